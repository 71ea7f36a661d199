#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mfegan/config.hpp"
#include "mfegan/hsi.hpp"
#include "mfegan/networks.hpp"
#include "mfegan/training.hpp"

// Shared plumbing for the command implementations: the artifact layout under
// the experiment's output directory, deterministic CSV formatting, and the
// prediction-file format that `evaluate` writes and `compare` reads.
namespace mfegan::cli {

// Every artifact lives directly under the experiment's output directory
// with a fixed name, so a config file pins the complete artifact set.
struct Paths {
  std::filesystem::path dir;

  std::filesystem::path cube() const { return dir / "cube.hsc"; }
  std::filesystem::path labels() const { return dir / "labels.hsl"; }
  std::filesystem::path patches() const { return dir / "patches.hsp"; }
  std::filesystem::path split() const { return dir / "split.hss"; }

  std::filesystem::path checkpoint(const std::string& name) const {
    return dir / (name + ".mfw");
  }
  std::filesystem::path trace(const std::string& name) const {
    return dir / (name + "_trace.csv");
  }
  std::filesystem::path timing(const std::string& name) const {
    return dir / (name + "_timing.csv");
  }
  std::filesystem::path report(const std::string& name) const {
    return dir / (name + "_report.csv");
  }
  std::filesystem::path predictions(const std::string& name) const {
    return dir / (name + "_predictions.csv");
  }
  std::filesystem::path map(const std::string& name) const {
    return dir / (name + "_map.ppm");
  }
  std::filesystem::path mcnemar_matrix() const { return dir / "mcnemar.csv"; }
};

// Fixed-precision decimal rendering (printf semantics), so identical values
// always serialize to identical bytes.
std::string fixed6(double v);
std::string fixed3(double v);
std::string fixed2(double v);

// Writes text to a file in binary mode (no newline translation anywhere).
void write_text(const std::filesystem::path& path, const std::string& text);

// Trace CSV, one row per optimizer step.  Columns depend on the variant:
//   cnn    epoch,batch,loss_c
//   acgan  epoch,batch,loss_s,loss_c,loss_d,loss_g
//   mfegan epoch,batch,loss_s,loss_c,loss_d,
//          fq_minmax,fq_heuristic,fq_leastsquare, fd_..., fm_...,survivor
std::string trace_csv(Variant variant, const TrainTrace& trace);

// Timing sidecar: epoch,seconds.  Wall-clock, hence deliberately kept out of
// the deterministic artifact set.
std::string timing_csv(const TrainTrace& trace);

// metric,value rows: class_1..class_N, oa, aa, kappa (all percentages with
// two decimals), then time_epoch_sec.
std::string report_csv(const std::vector<double>& per_class, double oa,
                       double aa, double kappa, double time_epoch_sec);

// index,truth,pred rows over the test split.
struct Predictions {
  std::vector<std::uint32_t> index;
  std::vector<int> truth;
  std::vector<int> pred;
};
std::string predictions_csv(const Predictions& p);
Predictions read_predictions(const std::filesystem::path& path);

// Eval-mode classification of every patch in `set`, in fixed-size chunks.
std::vector<int> classify_all(Discriminator& d, const PatchSet& set);

// Mean of TrainTrace::epoch_seconds persisted earlier by `train` (0 when the
// sidecar is absent, e.g. for the untrained nearest-neighbour baseline).
double mean_epoch_seconds(const std::filesystem::path& timing_path);

}  // namespace mfegan::cli
