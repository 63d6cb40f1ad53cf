#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "retina/error.hpp"
#include "retina/raster.hpp"

namespace retina {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kMagic = {'R', 'G', 'R', 'D'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_float_grid(const fs::path& path, const GrayPlane& plane) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(plane.width()));
  put_u32(out, static_cast<std::uint32_t>(plane.height()));
  for (double v : plane.values()) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!out) throw Error(ErrorKind::io, "short write to " + path.string());
}

GrayPlane load_float_grid(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  unsigned char header[12];
  if (!in.read(reinterpret_cast<char*>(header), sizeof header) ||
      std::memcmp(header, kMagic.data(), kMagic.size()) != 0) {
    throw Error(ErrorKind::format, "not a float grid: " + path.string());
  }
  const std::uint32_t w = get_u32(header + 4);
  const std::uint32_t h = get_u32(header + 8);
  if (w > (1u << 16) || h > (1u << 16)) {
    throw Error(ErrorKind::format, "implausible grid size in " + path.string());
  }
  std::vector<double> data(static_cast<std::size_t>(w) * h);
  std::vector<unsigned char> raw(data.size() * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size()))) {
    throw Error(ErrorKind::format, "truncated float grid " + path.string());
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_u32(raw.data() + 4 * i));
  }
  return GrayPlane(static_cast<int>(w), static_cast<int>(h), std::move(data));
}

}  // namespace retina
