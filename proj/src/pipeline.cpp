#include "retina/pipeline.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "retina/error.hpp"

#ifndef RETINA_VERSION
#define RETINA_VERSION "0.0.0"
#endif

namespace retina {

using json = nlohmann::json;

const char* library_version() { return RETINA_VERSION; }

const char* to_string(Method m) {
  return m == Method::kmeans ? "kmeans" : "tv";
}

Method method_from_string(const std::string& name) {
  if (name == "kmeans" || name == "1") return Method::kmeans;
  if (name == "tv" || name == "2") return Method::tv;
  throw Error(ErrorKind::contract, "unknown method '" + name + "'");
}

MethodConfig default_config(Method method) {
  MethodConfig cfg;
  cfg.method = method;
  cfg.threshold = method == Method::kmeans ? kKMeansThreshold : kTvThreshold;
  return cfg;
}

void validate(const MethodConfig& cfg) {
  if (!std::isfinite(cfg.threshold)) {
    throw Error(ErrorKind::contract, "MethodConfig: threshold must be finite");
  }
  if (!(cfg.weber.k > 0.0)) {
    throw Error(ErrorKind::contract, "MethodConfig: weber k must be > 0");
  }
  if (cfg.expansion_iterations < 0) {
    throw Error(ErrorKind::contract,
                "MethodConfig: expansion iterations must be >= 0");
  }
  if (cfg.kmeans_max_iter < 1) {
    throw Error(ErrorKind::contract, "MethodConfig: kmeans_max_iter >= 1");
  }
  if (cfg.method == Method::tv) validate(cfg.tv);
  validate(cfg.line);
}

std::string config_to_json(const MethodConfig& cfg) {
  json j;
  j["method"] = to_string(cfg.method);
  j["threshold"] = cfg.threshold;
  j["weber_k"] = cfg.weber.k;
  j["expansion_iterations"] = cfg.expansion_iterations;
  j["lesion_suppression"] = cfg.lesion_suppression;
  j["kmeans"] = {{"max_iter", cfg.kmeans_max_iter}, {"clip_df", cfg.clip_df}};
  j["tv"] = {
      {"a", cfg.tv.a},
      {"lambda_mode",
       cfg.tv.lambda_mode == LambdaMode::fixed ? "fixed" : "auto"},
      {"lambda", cfg.tv.lambda},
      {"lambda_update_period", cfg.tv.lambda_update_period},
      {"iterations", cfg.tv.iterations},
      {"neighborhood", cfg.tv.neighborhood == Neighborhood::four ? 4 : 8},
      {"lambda_floor", cfg.tv.lambda_floor},
      {"early_stop", cfg.tv.early_stop},
  };
  j["line"] = {{"window_sizes", cfg.line.window_sizes},
               {"n_angles", cfg.line.n_angles}};
  return j.dump(2);
}

MethodConfig config_from_json(const std::string& text,
                              const MethodConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::format, "config: not an object");
  try {
    MethodConfig cfg = base;
    if (j.contains("method")) {
      cfg = default_config(method_from_string(j.at("method").get<std::string>()));
    }
    auto read = [](const json& o, const char* key, auto& field) {
      if (o.contains(key)) {
        field = o.at(key).get<std::decay_t<decltype(field)>>();
      }
    };
    read(j, "threshold", cfg.threshold);
    read(j, "weber_k", cfg.weber.k);
    read(j, "expansion_iterations", cfg.expansion_iterations);
    read(j, "lesion_suppression", cfg.lesion_suppression);
    if (j.contains("kmeans")) {
      const json& k = j.at("kmeans");
      read(k, "max_iter", cfg.kmeans_max_iter);
      read(k, "clip_df", cfg.clip_df);
    }
    if (j.contains("tv")) {
      const json& t = j.at("tv");
      read(t, "a", cfg.tv.a);
      if (t.contains("lambda_mode")) {
        const auto mode = t.at("lambda_mode").get<std::string>();
        if (mode == "fixed") {
          cfg.tv.lambda_mode = LambdaMode::fixed;
        } else if (mode == "auto") {
          cfg.tv.lambda_mode = LambdaMode::automatic;
        } else {
          throw Error(ErrorKind::format, "config: bad lambda_mode " + mode);
        }
      }
      read(t, "lambda", cfg.tv.lambda);
      read(t, "lambda_update_period", cfg.tv.lambda_update_period);
      read(t, "iterations", cfg.tv.iterations);
      if (t.contains("neighborhood")) {
        const int nb = t.at("neighborhood").get<int>();
        if (nb != 4 && nb != 8) {
          throw Error(ErrorKind::format, "config: neighborhood must be 4 or 8");
        }
        cfg.tv.neighborhood = nb == 4 ? Neighborhood::four : Neighborhood::eight;
      }
      read(t, "lambda_floor", cfg.tv.lambda_floor);
      read(t, "early_stop", cfg.tv.early_stop);
    }
    if (j.contains("line")) {
      const json& l = j.at("line");
      read(l, "window_sizes", cfg.line.window_sizes);
      read(l, "n_angles", cfg.line.n_angles);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("config: ") + e.what());
  }
}

GrayPlane normalize_response(const GrayPlane& resp, const BinaryMask& fov) {
  require_same_shape(resp, fov, "normalize_response");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < resp.size(); ++i) {
    if (!fov[i]) continue;
    sum += resp[i];
    ++n;
  }
  if (n == 0) throw Error(ErrorKind::degenerate, "normalize_response: empty FOV");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < resp.size(); ++i) {
    if (fov[i]) ss += (resp[i] - mean) * (resp[i] - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    throw Error(ErrorKind::degenerate,
                "normalize_response: response has zero variance over the FOV");
  }
  GrayPlane out(resp.width(), resp.height(), kOutsideFov);
  for (std::size_t i = 0; i < resp.size(); ++i) {
    if (fov[i]) out[i] = (resp[i] - mean) / sd;
  }
  return out;
}

BinaryMask threshold_binary(const GrayPlane& norm, double t,
                            const BinaryMask& fov) {
  require_same_shape(norm, fov, "threshold_binary");
  BinaryMask out(norm.width(), norm.height());
  for (std::size_t i = 0; i < norm.size(); ++i) {
    out.set(i, fov[i] && norm[i] >= t);
  }
  return out;
}

namespace {

// SHA-256 over the dimensions followed by each byte buffer, in hex.
std::string sha256_hex(int width, int height,
                       std::initializer_list<std::span<const std::uint8_t>> parts) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free);
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(width),
                                 static_cast<std::uint32_t>(height)};
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx.get(), dims, sizeof dims);
  for (const auto& part : parts) EVP_DigestUpdate(ctx.get(), part.data(), part.size());
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace

std::string image_digest(const RgbImage& img) {
  return sha256_hex(img.width, img.height, {img.red, img.green, img.blue});
}

std::string mask_digest(const BinaryMask& mask) {
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) bytes[i] = mask[i] ? 1 : 0;
  return sha256_hex(mask.width(), mask.height(), {bytes});
}

namespace {

template <typename F>
auto in_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    rethrow_in_stage(e, stage);
  }
}

void check_method(const MethodConfig& cfg, Method expected) {
  if (cfg.method != expected) {
    throw Error(ErrorKind::contract,
                std::string("pipeline: config is for method ") +
                    to_string(cfg.method) + ", expected " + to_string(expected));
  }
}

struct Preprocessed {
  GrayPlane green;
  GrayPlane weber;
  GrayPlane expanded;
};

Preprocessed preprocess(const RgbImage& img, const BinaryMask& fov,
                        const MethodConfig& cfg) {
  if (img.width != fov.width() || img.height != fov.height()) {
    throw Error(ErrorKind::contract,
                "pipeline: image " + shape_string(img.width, img.height) +
                    " and FOV " + shape_string(fov.width(), fov.height()) +
                    " differ");
  }
  Preprocessed p;
  p.green = green_channel(img);
  p.weber = in_stage("weber", [&] { return weber_transform(p.green, cfg.weber); });
  p.expanded = in_stage("expand", [&] {
    return expand_fov_boundary(p.weber, fov, cfg.expansion_iterations);
  });
  return p;
}

GrayPlane complement(const GrayPlane& v, const WeberParams& weber) {
  const double top = std::log1p(255.0) / weber.k;
  GrayPlane out(v.width(), v.height());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = top - v[i];
  return out;
}

SegmentationResult finish(const RgbImage& img, const BinaryMask& fov,
                          const MethodConfig& cfg, Preprocessed pre,
                          GrayPlane suppressed, bool keep_stages,
                          std::optional<ClusterState> clusters,
                          std::optional<TvRun> tv) {
  ResponseMap resp = in_stage("line operator", [&] {
    return multi_scale_response(suppressed, cfg.line);
  });
  SegmentationResult result;
  result.normalized =
      in_stage("normalize", [&] { return normalize_response(resp, fov); });
  result.vessels = threshold_binary(result.normalized, cfg.threshold, fov);
  result.provenance.config_json = config_to_json(cfg);
  result.provenance.input_digest = image_digest(img);
  result.provenance.fov_digest = mask_digest(fov);
  result.provenance.version = library_version();
  if (keep_stages) {
    StagePlanes s;
    s.green = std::move(pre.green);
    s.weber = std::move(pre.weber);
    s.expanded = std::move(pre.expanded);
    s.suppressed = std::move(suppressed);
    if (tv) s.inverted = tv->u;
    s.response = std::move(resp.response);
    s.clusters = clusters;
    s.tv = std::move(tv);
    result.stages = std::move(s);
  }
  return result;
}

}  // namespace

SegmentationResult run_method1(const RgbImage& img, const BinaryMask& fov,
                               const MethodConfig& cfg, bool keep_stages) {
  check_method(cfg, Method::kmeans);
  validate(cfg);
  Preprocessed pre = preprocess(img, fov, cfg);
  std::optional<ClusterState> clusters;
  GrayPlane suppressed;
  if (cfg.lesion_suppression) {
    clusters = in_stage("kmeans", [&] {
      return kmeans3(pre.expanded, fov, cfg.kmeans_max_iter);
    });
    suppressed = df_plane(pre.expanded, *clusters, DfOptions{cfg.clip_df});
  } else {
    suppressed = complement(pre.expanded, cfg.weber);
  }
  return finish(img, fov, cfg, std::move(pre), std::move(suppressed),
                keep_stages, clusters, std::nullopt);
}

SegmentationResult run_method2(const RgbImage& img, const BinaryMask& fov,
                               const MethodConfig& cfg, bool keep_stages) {
  check_method(cfg, Method::tv);
  validate(cfg);
  Preprocessed pre = preprocess(img, fov, cfg);
  std::optional<TvRun> tv;
  GrayPlane suppressed;
  if (cfg.lesion_suppression) {
    tv = in_stage("tv filter",
                  [&] { return run_tv_detailed(pre.expanded, cfg.tv, &fov); });
    suppressed = sd_plane(tv->u, pre.expanded);
  } else {
    suppressed = complement(pre.expanded, cfg.weber);
  }
  return finish(img, fov, cfg, std::move(pre), std::move(suppressed),
                keep_stages, std::nullopt, std::move(tv));
}

SegmentationResult segment(const RgbImage& img, const BinaryMask& fov,
                           const MethodConfig& cfg, bool keep_stages) {
  return cfg.method == Method::kmeans ? run_method1(img, fov, cfg, keep_stages)
                                      : run_method2(img, fov, cfg, keep_stages);
}

}  // namespace retina
