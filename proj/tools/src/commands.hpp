#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mfegan/config.hpp"

// The six subcommand bodies.  Each throws the library's error types; the
// entry point maps them to exit codes (0 ok, 2 input error, 3 training
// abort, 4 artifact mismatch).
namespace mfegan::cli {

// Builds or loads the scene, normalizes, reduces to 3 principal components,
// cuts patches, splits train/test, and writes cube/labels/patches/split
// into the output directory.  Prints the class histogram and imbalance
// ratio.
void cmd_prepare(const ExperimentConfig& cfg);

// Trains every method listed in the config on the prepared training split;
// writes <method>.mfw, <method>_trace.csv and the <method>_timing.csv
// wall-clock sidecar (the only artifact exempt from byte-for-byte
// reproducibility).
void cmd_train(const ExperimentConfig& cfg);

// Scores `model` ("cnn", "ro+cnn", "acgan", "mfegan" checkpoints, or "knn"
// for the nearest-neighbour baseline) on the test split: writes
// <name>_report.csv, <name>_predictions.csv and the full-scene
// <name>_map.ppm where every labeled pixel carries its predicted class.
void cmd_evaluate(const ExperimentConfig& cfg, const std::string& model,
                  const std::string& name);

// Pairwise McNemar statistics over two or more prediction files (given as
// paths or as evaluate output names); writes mcnemar.csv and flags values
// above 1.96.
void cmd_compare(const ExperimentConfig& cfg,
                 const std::vector<std::string>& inputs);

// Renders a label raster file to a P6 pixmap.
void cmd_render_map(const std::filesystem::path& labels_path,
                    const std::filesystem::path& out_path);

// Engine self-test: gradient checks for every layer type, architecture
// shape contracts, metric and loss oracles, survivor selection.  Returns
// the number of failed checks; inject_grad_bug deliberately breaks the
// conv2d gradient path to prove failures are detected and named.
int cmd_selftest(bool inject_grad_bug);

}  // namespace mfegan::cli
