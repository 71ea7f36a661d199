#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "mfegan/config.hpp"
#include "mfegan/errors.hpp"

namespace {

using mfegan::ExperimentConfig;

// Exit codes: 0 ok, 2 input error, 3 training abort, 4 artifact mismatch.
constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kTrainingAbort = 3;
constexpr int kArtifactMismatch = 4;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

// Attaches -c/--config plus the --seed and --out overrides that let one
// config file drive several runs.
void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
  auto* c = cmd->add_option("-c,--config", opts.config_path,
                            "experiment config file");
  if (config_required) c->required();
  cmd->add_option("--seed", opts.seed,
                  "override the seed from the config file");
  cmd->add_option("--out", opts.out_dir,
                  "override the output directory from the config file");
}

ExperimentConfig load_overridden(const CommonOpts& opts) {
  ExperimentConfig cfg = mfegan::load_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out_dir) cfg.out_dir = *opts.out_dir;
  cfg.validate();
  return cfg;
}

int map_exception() {
  try {
    throw;
  } catch (const mfegan::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kTrainingAbort;
  } catch (const mfegan::FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  } catch (const mfegan::ParameterError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  } catch (const mfegan::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    // DimensionError, ContractError, and anything unforeseen: the inputs
    // were readable but do not fit together.
    std::fprintf(stderr, "error: %s\n", e.what());
    return kArtifactMismatch;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperspectral patch classification workbench"};
  app.require_subcommand(1);

  CommonOpts prep_opts;
  auto* prepare = app.add_subcommand(
      "prepare", "build the scene, cut patches, write the train/test split");
  add_common(prepare, prep_opts, true);

  CommonOpts train_opts;
  auto* train = app.add_subcommand(
      "train", "train every method listed in the config");
  add_common(train, train_opts, true);

  CommonOpts eval_opts;
  std::string eval_model;
  std::string eval_name;
  auto* evaluate = app.add_subcommand(
      "evaluate", "score a trained model on the test split");
  add_common(evaluate, eval_opts, true);
  evaluate
      ->add_option("--model", eval_model,
                   "checkpoint to score (cnn, ro+cnn, acgan, mfegan) or knn")
      ->required();
  evaluate->add_option("--name", eval_name,
                       "report name (defaults to the model name)");

  CommonOpts cmp_opts;
  std::vector<std::string> cmp_inputs;
  auto* compare = app.add_subcommand(
      "compare", "pairwise McNemar tests over prediction files");
  add_common(compare, cmp_opts, true);
  compare
      ->add_option("inputs", cmp_inputs,
                   "two or more prediction files or evaluate names")
      ->expected(-2);

  CommonOpts map_opts;
  std::string map_labels;
  std::string map_out;
  auto* render = app.add_subcommand(
      "render-map", "render a label raster to a P6 pixmap");
  add_common(render, map_opts, false);
  render->add_option("--labels", map_labels, "label raster file");
  render->add_option("--map-out", map_out, "output .ppm path");

  bool inject_grad_bug = false;
  auto* selftest = app.add_subcommand(
      "selftest", "gradient checks, shape contracts, and metric oracles");
  selftest->add_flag("--inject-grad-bug", inject_grad_bug)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (prepare->parsed()) {
      mfegan::cli::cmd_prepare(load_overridden(prep_opts));
    } else if (train->parsed()) {
      mfegan::cli::cmd_train(load_overridden(train_opts));
    } else if (evaluate->parsed()) {
      const std::string name = eval_name.empty() ? eval_model : eval_name;
      mfegan::cli::cmd_evaluate(load_overridden(eval_opts), eval_model, name);
    } else if (compare->parsed()) {
      mfegan::cli::cmd_compare(load_overridden(cmp_opts), cmp_inputs);
    } else if (render->parsed()) {
      std::string labels = map_labels;
      std::string out = map_out;
      if (!map_opts.config_path.empty()) {
        const ExperimentConfig cfg = load_overridden(map_opts);
        if (labels.empty()) labels = (cfg.out_dir / "labels.hsl").string();
        if (out.empty()) out = (cfg.out_dir / "truth_map.ppm").string();
      }
      if (labels.empty() || out.empty()) {
        throw mfegan::ParameterError(
            "render-map: need --labels and --map-out (or --config)");
      }
      mfegan::cli::cmd_render_map(labels, out);
    } else if (selftest->parsed()) {
      return mfegan::cli::cmd_selftest(inject_grad_bug);
    }
  } catch (...) {
    return map_exception();
  }
  return kOk;
}
