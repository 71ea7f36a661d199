#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mfegan/hsi.hpp"
#include "mfegan/training.hpp"

// Experiment configuration: a plain-text key=value file with [data], [train]
// and [output] sections.  '#' starts a comment; keys may appear once; every
// parse error names the offending line and key.  Nothing is read from the
// environment, so a config file plus a seed pins a run completely.
namespace mfegan {

// The trainable methods.  "ro+cnn" is the plain classifier fed randomly
// oversampled (balanced) training data.  The nearest-neighbour baseline is
// not trained and therefore not a method token; it is selected at
// evaluation time.
enum class Method { Cnn, RoCnn, Acgan, Mfegan };

const char* method_name(Method m);
Method method_from_name(const std::string& token);  // FormatError on unknown

struct ExperimentConfig {
  // [data] — either a cube/labels file pair or an inline synthetic scene.
  std::filesystem::path cube_path;
  std::filesystem::path labels_path;
  bool synthetic = false;
  SyntheticSpec synth;
  int sp = 20;                  // patch side, a positive multiple of 4
  double train_fraction = 0.05;
  std::map<int, int> train_count_overrides;  // class id -> sample count
  std::uint64_t seed = 1;

  // [train]
  std::vector<Method> methods = {Method::Mfegan};
  TrainConfig train;
  int knn_k = 5;

  // [output]
  std::filesystem::path out_dir;

  // Cross-field checks (data source chosen exactly one way, fraction in
  // range, ...).  Parsing already calls this; it is public so that
  // programmatically built configs can be checked too.
  void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace mfegan
