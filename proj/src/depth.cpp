#include "physworld/depth.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "physworld/error.hpp"

namespace physworld::depth {

DepthMap::DepthMap(std::uint32_t width, std::uint32_t height)
    : width_(width),
      height_(height),
      values_(std::size_t(width) * height, 0.0f),
      mask_(std::size_t(width) * height, 0) {}

void DepthMap::set(std::uint32_t u, std::uint32_t v, double depth) {
  const std::size_t i = index(u, v);
  const float f = static_cast<float>(depth);
  values_[i] = f;
  mask_[i] = (std::isfinite(f) && f > 0.0f) ? 1 : 0;
}

std::size_t DepthMap::valid_count() const {
  std::size_t n = 0;
  for (auto m : mask_) n += m != 0;
  return n;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
}

Aabb PointCloud::bounds() const {
  Aabb box;
  for (const auto& p : points) box.extend(p);
  return box;
}

namespace {
constexpr std::array<char, 4> kMagic = {'P', 'W', 'D', 'M'};
}

void write_depth_map(const std::filesystem::path& path, const DepthMap& map) {
  io::Writer out(path);
  out.magic(kMagic);
  out.u32(map.width());
  out.u32(map.height());
  for (float f : map.values()) out.f32(f);
  out.bytes(map.mask().data(), map.mask().size());
  out.finish();
}

DepthMap read_depth_map(const std::filesystem::path& path) {
  io::Reader in(path);
  in.expect_magic(kMagic);
  const std::uint32_t width = in.u32();
  const std::uint32_t height = in.u32();
  if (std::uint64_t(width) * height > (std::uint64_t(1) << 28)) {
    throw Error(ErrorCode::kFormat, path.string() + ": implausible dimensions");
  }
  DepthMap map(width, height);
  std::vector<float> values(std::size_t(width) * height);
  for (auto& f : values) f = in.f32();
  std::vector<std::uint8_t> mask(values.size());
  in.bytes(mask.data(), mask.size());
  in.expect_end();
  for (std::uint32_t v = 0; v < height; ++v) {
    for (std::uint32_t u = 0; u < width; ++u) {
      const std::size_t i = map.index(u, v);
      if (mask[i] > 1) throw Error(ErrorCode::kFormat, path.string() + ": mask byte not 0/1");
      map.set(u, v, values[i]);
      if (mask[i] == 0) map.invalidate(u, v);
    }
  }
  return map;
}

}  // namespace physworld::depth
