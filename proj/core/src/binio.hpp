#pragma once

// Little-endian binary file helpers shared by the on-disk formats.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "mfegan/errors.hpp"

namespace mfegan::binio {

inline void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f32(std::ostream& os, const float* v, std::size_t n) {
  static_assert(sizeof(float) == 4);
  // float32 bit patterns; little-endian hosts write them directly
  os.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(n * 4));
}

struct Reader {
  std::ifstream in;
  std::filesystem::path path;
  std::uint64_t offset = 0;

  Reader(const std::filesystem::path& p, const char* magic)
      : in(p, std::ios::binary), path(p) {
    if (!in) throw FormatError(path.string() + ": cannot open");
    char got[4];
    bytes(got, 4, "magic");
    if (std::string_view(got, 4) != std::string_view(magic, 4)) {
      throw FormatError(path.string() + ": bad magic, expected '" +
                        std::string(magic, 4) + "'");
    }
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw FormatError(path.string() + ": " + why + " at offset " +
                      std::to_string(offset));
  }

  bool at_eof() { return in.peek() == std::ifstream::traits_type::eof(); }

  void bytes(void* dst, std::size_t n, const char* what) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
      fail(std::string("truncated ") + what);
    }
    offset += n;
  }

  std::uint16_t u16(const char* what) {
    unsigned char b[2];
    bytes(b, 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    bytes(b, 4, what);
    return static_cast<std::uint32_t>(b[0]) |
           (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }
};

inline std::ofstream open_out(const std::filesystem::path& path,
                              const char* magic) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out.write(magic, 4);
  return out;
}

}  // namespace mfegan::binio
