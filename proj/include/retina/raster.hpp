#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace retina {

// Row-major plane of real intensities. Units depend on the pipeline stage.
class GrayPlane {
 public:
  GrayPlane() = default;
  GrayPlane(int width, int height, double fill = 0.0);
  GrayPlane(int width, int height, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int x, int y) { return data_[index(x, y)]; }
  double at(int x, int y) const { return data_[index(x, y)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  friend bool operator==(const GrayPlane&, const GrayPlane&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

// One flag per pixel; used both for the FOV and for vessel labels.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  std::size_t count() const noexcept;
  // Every set pixel of *this is also set in `other`.
  bool subset_of(const BinaryMask& other) const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> red;
  std::vector<std::uint8_t> green;
  std::vector<std::uint8_t> blue;

  RgbImage() = default;
  RgbImage(int w, int h);

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

template <typename A, typename B>
bool same_shape(const A& a, const B& b) {
  return a.width() == b.width() && a.height() == b.height();
}

// Throws Error(contract) naming `what` when the shapes differ.
template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what);

std::string shape_string(int width, int height);

// Decodes PNG, PPM/PGM, TIFF or JPEG. Grayscale files are replicated into
// the three channels.
RgbImage load_rgb(const std::filesystem::path& path);
// Any nonzero sample becomes foreground.
BinaryMask load_mask(const std::filesystem::path& path);
void save_mask_png(const std::filesystem::path& path, const BinaryMask& mask);
void save_rgb_png(const std::filesystem::path& path, const RgbImage& img);
// Linear stretch of [min, max] (over `region` if given) onto [0, 255].
void save_plane_preview(const std::filesystem::path& path,
                        const GrayPlane& plane,
                        const BinaryMask* region = nullptr);

// Binary float grid: magic "RGRD", uint32 width, uint32 height, then
// width * height float32 samples, row-major, all little-endian.
void save_float_grid(const std::filesystem::path& path, const GrayPlane& plane);
GrayPlane load_float_grid(const std::filesystem::path& path);

GrayPlane green_channel(const RgbImage& img);
// HSI intensity, (R + G + B) / 3.
GrayPlane intensity_channel(const RgbImage& img);

struct FovMaskStages {
  double threshold = 0.0;  // Otsu level on the intensity channel
  BinaryMask thresholded;
  BinaryMask smoothed;
  BinaryMask eroded;  // final FOV (largest 4-connected component)
};

// Otsu threshold over a 256-bin histogram of values in [0, 255]. Returns the
// level t such that foreground is `value > t`.
double otsu_threshold(std::span<const double> values);
// Majority vote of the size x size window, off-image pixels ignored.
BinaryMask box_smooth(const BinaryMask& mask, int size);
// A pixel survives iff every in-image pixel of the size x size window is set.
BinaryMask erode_square(const BinaryMask& mask, int size);
BinaryMask largest_component(const BinaryMask& mask);

FovMaskStages compute_fov_mask_stages(const RgbImage& img);
BinaryMask compute_fov_mask(const RgbImage& img);

}  // namespace retina

#include "retina/detail/raster_impl.hpp"
