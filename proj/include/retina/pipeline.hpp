#pragma once

#include <optional>
#include <string>

#include "retina/cluster.hpp"
#include "retina/lineop.hpp"
#include "retina/preprocess.hpp"
#include "retina/raster.hpp"
#include "retina/tvfilter.hpp"

namespace retina {

enum class Method { kmeans, tv };

const char* to_string(Method m);
Method method_from_string(const std::string& name);

inline constexpr double kKMeansThreshold = 0.77;
inline constexpr double kTvThreshold = 1.25;
// Written to non-FOV pixels of a normalized plane.
inline constexpr double kOutsideFov = -1e6;

struct MethodConfig {
  Method method = Method::kmeans;
  double threshold = kKMeansThreshold;
  WeberParams weber;
  int expansion_iterations = kDefaultExpansionIterations;
  int kmeans_max_iter = kDefaultKMeansMaxIter;
  bool clip_df = true;
  TvParams tv;
  LineOpParams line;
  // When false the line operator runs on the complement of the
  // preprocessed plane (the ablation baseline).
  bool lesion_suppression = true;
};

MethodConfig default_config(Method method);
void validate(const MethodConfig& cfg);

std::string config_to_json(const MethodConfig& cfg);
// Missing keys keep the defaults of the method named in the document (or of
// `base` when no method is given).
MethodConfig config_from_json(const std::string& text,
                              const MethodConfig& base = {});

struct StagePlanes {
  GrayPlane green;
  GrayPlane weber;
  GrayPlane expanded;
  GrayPlane suppressed;  // df plane, SD plane, or complement when ablated
  GrayPlane inverted;    // TV output v_sd (method 2 only)
  GrayPlane response;    // raw multi-scale response
  std::optional<ClusterState> clusters;
  std::optional<TvRun> tv;
};

struct Provenance {
  std::string config_json;
  std::string input_digest;  // SHA-256 over dimensions and RGB samples
  std::string fov_digest;    // SHA-256 over dimensions and mask bits
  std::string version;
};

struct SegmentationResult {
  BinaryMask vessels;
  GrayPlane normalized;
  Provenance provenance;
  std::optional<StagePlanes> stages;  // filled when keep_stages is set
};

// (resp - mean) / stddev over FOV pixels; outside pixels get kOutsideFov.
GrayPlane normalize_response(const GrayPlane& resp, const BinaryMask& fov);
inline GrayPlane normalize_response(const ResponseMap& resp,
                                    const BinaryMask& fov) {
  return normalize_response(resp.response, fov);
}

// 1 iff norm >= t inside the FOV.
BinaryMask threshold_binary(const GrayPlane& norm, double t,
                            const BinaryMask& fov);

std::string image_digest(const RgbImage& img);
std::string mask_digest(const BinaryMask& mask);

SegmentationResult run_method1(const RgbImage& img, const BinaryMask& fov,
                               const MethodConfig& cfg,
                               bool keep_stages = false);
SegmentationResult run_method2(const RgbImage& img, const BinaryMask& fov,
                               const MethodConfig& cfg,
                               bool keep_stages = false);
// Dispatches on cfg.method.
SegmentationResult segment(const RgbImage& img, const BinaryMask& fov,
                           const MethodConfig& cfg, bool keep_stages = false);

const char* library_version();

}  // namespace retina
