#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mfegan/tensor.hpp"

namespace mfegan {

// One named array in a weight file.
struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

// Weight-file format, all integers little-endian:
//   magic "MFW1"
//   repeated until end of file:
//     u32 name length, name bytes,
//     u32 rank, u32 extents[rank],
//     f32 payload (product of extents values)
// Loading a file with the wrong magic or a truncated record raises
// FormatError naming the file and byte offset.
void save_records(const std::filesystem::path& path,
                  const std::vector<CheckpointRecord>& records);
std::vector<CheckpointRecord> load_records(const std::filesystem::path& path);

}  // namespace mfegan
