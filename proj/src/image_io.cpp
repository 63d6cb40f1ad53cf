#include <algorithm>
#include <limits>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <string>
#include <system_error>

#include "retina/error.hpp"
#include "retina/raster.hpp"

namespace retina {

namespace fs = std::filesystem;

namespace {

cv::Mat read_any(const fs::path& path, int flags) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorKind::io, "cannot read file: " + path.string());
  }
  cv::Mat m;
  try {
    m = cv::imread(path.string(), flags);
  } catch (const cv::Exception& e) {
    throw Error(ErrorKind::format,
                "cannot decode " + path.string() + ": " + e.what());
  }
  if (m.empty()) {
    throw Error(ErrorKind::format,
                "unsupported or corrupt image: " + path.string());
  }
  return m;
}

void write_any(const fs::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw Error(ErrorKind::io,
                "cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw Error(ErrorKind::io, "cannot write " + path.string());
}

}  // namespace

RgbImage load_rgb(const fs::path& path) {
  const cv::Mat bgr = read_any(path, cv::IMREAD_COLOR);
  RgbImage img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.set(x, y, row[x][2], row[x][1], row[x][0]);
    }
  }
  return img;
}

BinaryMask load_mask(const fs::path& path) {
  const cv::Mat gray = read_any(path, cv::IMREAD_GRAYSCALE);
  BinaryMask mask(gray.cols, gray.rows);
  for (int y = 0; y < gray.rows; ++y) {
    const auto* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < gray.cols; ++x) mask.set(x, y, row[x] != 0);
  }
  return mask;
}

void save_mask_png(const fs::path& path, const BinaryMask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width(); ++x) row[x] = mask.at(x, y) ? 255 : 0;
  }
  write_any(path, m);
}

void save_rgb_png(const fs::path& path, const RgbImage& img) {
  cv::Mat m(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = img.index(x, y);
      row[x] = cv::Vec3b(img.blue[i], img.green[i], img.red[i]);
    }
  }
  write_any(path, m);
}

void save_plane_preview(const fs::path& path, const GrayPlane& plane,
                        const BinaryMask* region) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < plane.size(); ++i) {
    if (region && !(*region)[i]) continue;
    lo = std::min(lo, plane[i]);
    hi = std::max(hi, plane[i]);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  cv::Mat m(plane.height(), plane.width(), CV_8UC1);
  for (int y = 0; y < plane.height(); ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < plane.width(); ++x) {
      const double v = (plane.at(x, y) - lo) / span;
      row[x] = static_cast<std::uint8_t>(
          std::clamp(std::lround(v * 255.0), 0L, 255L));
    }
  }
  write_any(path, m);
}

}  // namespace retina
