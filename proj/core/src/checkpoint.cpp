#include "mfegan/checkpoint.hpp"

#include "binio.hpp"

namespace mfegan {

void save_records(const std::filesystem::path& path,
                  const std::vector<CheckpointRecord>& records) {
  std::ofstream out = binio::open_out(path, "MFW1");
  for (const CheckpointRecord& r : records) {
    if (shape_numel(r.shape) != r.values.size()) {
      throw ContractError("checkpoint record '" + r.name +
                          "': payload does not fill its shape");
    }
    binio::put_u32(out, static_cast<std::uint32_t>(r.name.size()));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    binio::put_u32(out, static_cast<std::uint32_t>(r.shape.size()));
    for (int e : r.shape) binio::put_u32(out, static_cast<std::uint32_t>(e));
    binio::put_f32(out, r.values.data(), r.values.size());
  }
  if (!out) throw FormatError(path.string() + ": write failed");
}

std::vector<CheckpointRecord> load_records(const std::filesystem::path& path) {
  binio::Reader rd(path, "MFW1");
  std::vector<CheckpointRecord> records;
  while (!rd.at_eof()) {
    CheckpointRecord rec;
    const std::uint32_t name_len = rd.u32("record name length");
    if (name_len == 0 || name_len > 4096) rd.fail("implausible name length");
    rec.name.resize(name_len);
    rd.bytes(rec.name.data(), name_len, "record name");
    const std::uint32_t rank = rd.u32("record rank");
    if (rank > 8) rd.fail("implausible rank");
    rec.shape.resize(rank);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t e = rd.u32("record extent");
      rec.shape[i] = static_cast<int>(e);
      numel *= e;
    }
    rec.values.resize(numel);
    rd.bytes(rec.values.data(), numel * 4, "record payload");
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace mfegan
