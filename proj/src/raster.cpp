#include "retina/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <string>

#include "retina/error.hpp"

namespace retina {

namespace {

void check_dimensions(int width, int height) {
  if (width < 0 || height < 0) {
    throw Error(ErrorKind::contract,
                "negative dimensions " + shape_string(width, height));
  }
}

}  // namespace

std::string shape_string(int width, int height) {
  return std::to_string(width) + "x" + std::to_string(height);
}

GrayPlane::GrayPlane(int width, int height, double fill)
    : width_(width), height_(height) {
  check_dimensions(width, height);
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayPlane::GrayPlane(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dimensions(width, height);
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorKind::contract,
                "plane data length " + std::to_string(data_.size()) +
                    " does not match " + shape_string(width, height));
  }
}

BinaryMask::BinaryMask(int width, int height, bool fill)
    : width_(width), height_(height) {
  check_dimensions(width, height);
  bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

bool BinaryMask::subset_of(const BinaryMask& other) const {
  if (!same_shape(*this, other)) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

RgbImage::RgbImage(int w, int h) : width(w), height(h) {
  check_dimensions(w, h);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  red.assign(n, 0);
  green.assign(n, 0);
  blue.assign(n, 0);
}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g,
                   std::uint8_t b) {
  const std::size_t i = index(x, y);
  red[i] = r;
  green[i] = g;
  blue[i] = b;
}

GrayPlane green_channel(const RgbImage& img) {
  GrayPlane out(img.width, img.height);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.green[i];
  return out;
}

GrayPlane intensity_channel(const RgbImage& img) {
  GrayPlane out(img.width, img.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (static_cast<double>(img.red[i]) + img.green[i] + img.blue[i]) /
             3.0;
  }
  return out;
}

double otsu_threshold(std::span<const double> values) {
  std::array<double, 256> hist{};
  for (double v : values) {
    const int bin = std::clamp(static_cast<int>(std::floor(v)), 0, 255);
    hist[bin] += 1.0;
  }
  const double total = static_cast<double>(values.size());
  double weighted_total = 0.0;
  for (int i = 0; i < 256; ++i) weighted_total += i * hist[i];

  double best_level = 0.0;
  double best_between = -1.0;
  double w0 = 0.0;
  double sum0 = 0.0;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (weighted_total - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best_between) {
      best_between = between;
      best_level = t;
    }
  }
  return best_level;
}

BinaryMask box_smooth(const BinaryMask& mask, int size) {
  const int r = size / 2;
  BinaryMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      int on = 0;
      int total = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (!mask.contains(x + dx, y + dy)) continue;
          ++total;
          on += mask.at(x + dx, y + dy) ? 1 : 0;
        }
      }
      out.set(x, y, 2 * on >= total + 1);
    }
  }
  return out;
}

BinaryMask erode_square(const BinaryMask& mask, int size) {
  const int r = size / 2;
  const int w = mask.width();
  const int h = mask.height();
  // Separable: a horizontal pass then a vertical pass.
  BinaryMask rows(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool all = true;
      for (int dx = -r; dx <= r && all; ++dx) {
        if (mask.contains(x + dx, y)) all = mask.at(x + dx, y);
      }
      rows.set(x, y, all);
    }
  }
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool all = true;
      for (int dy = -r; dy <= r && all; ++dy) {
        if (rows.contains(x, y + dy)) all = rows.at(x, y + dy);
      }
      out.set(x, y, all);
    }
  }
  return out;
}

BinaryMask largest_component(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<int> label(mask.size(), -1);
  std::vector<std::size_t> sizes;
  std::queue<std::pair<int, int>> frontier;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y) || label[mask.index(x, y)] >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      sizes.push_back(0);
      label[mask.index(x, y)] = id;
      frontier.emplace(x, y);
      while (!frontier.empty()) {
        const auto [cx, cy] = frontier.front();
        frontier.pop();
        ++sizes[id];
        constexpr int dx[] = {1, -1, 0, 0};
        constexpr int dy[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + dx[k];
          const int ny = cy + dy[k];
          if (!mask.contains(nx, ny) || !mask.at(nx, ny)) continue;
          int& l = label[mask.index(nx, ny)];
          if (l >= 0) continue;
          l = id;
          frontier.emplace(nx, ny);
        }
      }
    }
  }
  BinaryMask out(w, h);
  if (sizes.empty()) return out;
  const int keep = static_cast<int>(
      std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < label.size(); ++i) out.set(i, label[i] == keep);
  return out;
}

FovMaskStages compute_fov_mask_stages(const RgbImage& img) {
  FovMaskStages stages;
  const GrayPlane intensity = intensity_channel(img);
  stages.threshold = otsu_threshold(intensity.values());
  stages.thresholded = BinaryMask(img.width, img.height);
  for (std::size_t i = 0; i < intensity.size(); ++i) {
    stages.thresholded.set(i, intensity[i] > stages.threshold);
  }
  if (stages.thresholded.count() == 0) {
    throw Error(ErrorKind::degenerate,
                "FOV mask: no foreground pixels after thresholding");
  }
  stages.smoothed = box_smooth(stages.thresholded, 5);
  stages.eroded = largest_component(erode_square(stages.smoothed, 5));
  if (stages.eroded.count() == 0) {
    throw Error(ErrorKind::degenerate, "FOV mask: foreground vanished");
  }
  return stages;
}

BinaryMask compute_fov_mask(const RgbImage& img) {
  return compute_fov_mask_stages(img).eroded;
}

}  // namespace retina
