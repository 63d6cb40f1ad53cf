// vesselseg: segment fundus images, extract FOV masks, evaluate predictions.
//
// Exit status: 0 on success, 1 when any image or evaluation fails, 2 on usage
// errors.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "retina/dataset.hpp"
#include "retina/error.hpp"
#include "retina/eval.hpp"
#include "retina/pipeline.hpp"
#include "retina/raster.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace retina;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Raised for inconsistent arguments that CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(ErrorKind::io, "cannot write " + path.string());
}

void make_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw Error(ErrorKind::io, "cannot create output directory " + dir.string());
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each slot records its
// own error so reporting stays in input order whatever the pool size.
std::vector<std::string> run_pool(std::size_t n, unsigned threads,
                                  const std::function<void(std::size_t)>& fn) {
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "unknown error";
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return errors;
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// ------------------------------------------------------------------ config

struct ConfigFlags {
  std::string method;
  std::string config_path;
  std::optional<double> threshold;
  std::optional<double> weber_k;
  std::optional<int> expansion_iterations;
  std::optional<int> kmeans_max_iter;
  bool no_df_clip = false;
  std::optional<double> tv_a;
  std::optional<double> tv_lambda;  // switches to fixed mode
  std::optional<int> tv_lambda_period;
  std::optional<int> tv_iterations;
  std::optional<int> tv_neighborhood;
  std::optional<double> tv_lambda_floor;
  std::optional<double> tv_early_stop;
  std::optional<std::vector<int>> window_sizes;
  std::optional<int> angles;
  bool no_lesion_suppression = false;

  void add_to(CLI::App& app, bool with_threshold) {
    app.add_option("--method", method, "kmeans (df plane) or tv (SD plane)")
        ->required()
        ->check(CLI::IsMember({"kmeans", "tv"}));
    app.add_option("--config", config_path,
                   "JSON config or provenance sidecar; flags override it")
        ->check(CLI::ExistingFile);
    if (with_threshold) app.add_option("--threshold", threshold, "Threshold on the normalized response");
    app.add_option("--weber-k", weber_k, "Weber transform divisor");
    app.add_option("--expansion-iterations", expansion_iterations, "FOV boundary growth rings");
    app.add_option("--kmeans-max-iter", kmeans_max_iter, "k-means iteration cap");
    app.add_flag("--no-df-clip", no_df_clip, "Keep negative df values");
    app.add_option("--tv-a", tv_a, "TV regularization a");
    app.add_option("--tv-lambda", tv_lambda, "Fixed TV fitting weight (disables auto mode)");
    app.add_option("--tv-lambda-period", tv_lambda_period, "Auto lambda update period");
    app.add_option("--tv-iterations", tv_iterations, "TV iterations");
    app.add_option("--tv-neighborhood", tv_neighborhood, "4 or 8")
        ->check(CLI::IsMember({4, 8}));
    app.add_option("--tv-lambda-floor", tv_lambda_floor, "Lower bound of auto lambda");
    app.add_option("--tv-early-stop", tv_early_stop, "Relative change stop (0 disables)");
    app.add_option("--window-sizes", window_sizes, "Line operator window sizes")->delimiter(',');
    app.add_option("--angles", angles, "Number of line directions over 180 degrees");
    app.add_flag("--no-lesion-suppression", no_lesion_suppression,
                 "Run the line operator on the complement plane (ablation)");
  }

  MethodConfig build() const {
    const Method m = method_from_string(method);
    MethodConfig cfg = default_config(m);
    if (!config_path.empty()) {
      json doc;
      try {
        doc = json::parse(read_text(config_path));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::format, config_path + ": " + e.what());
      }
      // A provenance sidecar carries the config under "config".
      const json& body = doc.is_object() && doc.contains("config") ? doc.at("config") : doc;
      if (body.is_object() && body.contains("method") &&
          body.at("method") != std::string(to_string(m))) {
        throw UsageError("--config names method " + body.at("method").dump() +
                         " but --method is " + method);
      }
      cfg = config_from_json(body.dump(), cfg);
    }
    if (threshold) cfg.threshold = *threshold;
    if (weber_k) cfg.weber.k = *weber_k;
    if (expansion_iterations) cfg.expansion_iterations = *expansion_iterations;
    if (kmeans_max_iter) cfg.kmeans_max_iter = *kmeans_max_iter;
    if (no_df_clip) cfg.clip_df = false;
    if (tv_a) cfg.tv.a = *tv_a;
    if (tv_lambda) {
      cfg.tv.lambda_mode = LambdaMode::fixed;
      cfg.tv.lambda = *tv_lambda;
    }
    if (tv_lambda_period) cfg.tv.lambda_update_period = *tv_lambda_period;
    if (tv_iterations) cfg.tv.iterations = *tv_iterations;
    if (tv_neighborhood) cfg.tv.neighborhood = *tv_neighborhood == 4 ? Neighborhood::four : Neighborhood::eight;
    if (tv_lambda_floor) cfg.tv.lambda_floor = *tv_lambda_floor;
    if (tv_early_stop) cfg.tv.early_stop = *tv_early_stop;
    if (window_sizes) cfg.line.window_sizes = *window_sizes;
    if (angles) cfg.line.n_angles = *angles;
    if (no_lesion_suppression) cfg.lesion_suppression = false;
    try {
      validate(cfg);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
};

// ------------------------------------------------------------------ inputs

struct SourceFlags {
  std::string image;
  std::string mask;
  std::string id;
  std::string manifest;
  std::string tag;
  bool dataset_mask = false;

  void add_to(CLI::App& app) {
    auto* img = app.add_option("--image", image, "Single input image")->check(CLI::ExistingFile);
    app.add_option("--mask", mask, "FOV mask for --image (default: computed)")
        ->check(CLI::ExistingFile)
        ->needs(img);
    app.add_option("--id", id, "Output id for --image (default: file stem)")->needs(img);
    auto* man = app.add_option("--manifest", manifest, "Dataset manifest")->check(CLI::ExistingFile);
    app.add_option("--tag", tag, "Only manifest entries with this tag")->needs(man);
    app.add_flag("--dataset-mask", dataset_mask, "Use the manifest's FOV masks")->needs(man);
    img->excludes(man);
  }

  void require_one() const {
    if (image.empty() == manifest.empty())
      throw UsageError("exactly one of --image or --manifest is required");
  }
};

struct WorkItem {
  std::string id;
  fs::path image;
  std::optional<fs::path> mask;  // FOV file; computed when empty
  std::string mask_source;       // computed | file | dataset
};

DatasetManifest load_selected(const std::string& path, const std::string& tag) {
  DatasetManifest m = load_manifest(path);
  if (!tag.empty()) {
    m = subset(m, tag);
    if (m.entries.empty()) throw Error(ErrorKind::contract, "no manifest entries tagged '" + tag + "'");
  }
  return m;
}

std::vector<WorkItem> work_items(const SourceFlags& src) {
  std::vector<WorkItem> items;
  if (!src.image.empty()) {
    WorkItem w;
    w.id = src.id.empty() ? fs::path(src.image).stem().string() : src.id;
    w.image = src.image;
    if (!src.mask.empty()) w.mask = src.mask;
    w.mask_source = src.mask.empty() ? "computed" : "file";
    items.push_back(std::move(w));
    return items;
  }
  const DatasetManifest m = load_selected(src.manifest, src.tag);
  for (const DatasetEntry& e : m.entries) {
    WorkItem w;
    w.id = e.id;
    w.image = m.resolve(e.image);
    w.mask_source = "computed";
    if (src.dataset_mask) {
      if (!e.mask) throw Error(ErrorKind::contract, "--dataset-mask: entry '" + e.id + "' has no mask");
      w.mask = m.resolve(*e.mask);
      w.mask_source = "dataset";
    }
    items.push_back(std::move(w));
  }
  return items;
}

BinaryMask load_fov(const WorkItem& w, const RgbImage& img) {
  if (!w.mask) return compute_fov_mask(img);
  BinaryMask fov = load_mask(*w.mask);
  if (fov.width() != img.width || fov.height() != img.height) {
    throw Error(ErrorKind::contract, "mask " + w.mask->string() + " is " +
                                         shape_string(fov.width(), fov.height()) + ", image is " +
                                         shape_string(img.width, img.height));
  }
  return fov;
}

int report_failures(const std::vector<std::string>& ids, const std::vector<std::string>& errors,
                    const fs::path& out_dir) {
  std::string log;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (errors[i].empty()) continue;
    log += ids[i] + ": " + errors[i] + "\n";
  }
  if (log.empty()) return 0;
  std::cerr << log;
  write_text(out_dir / "errors.log", log);
  return kExitFailure;
}

// ----------------------------------------------------------------- segment

void write_debug(const fs::path& dir, const std::string& id, const StagePlanes& s,
                 const BinaryMask& fov) {
  auto plane = [&](const char* name, const GrayPlane& p) {
    if (p.size() == 0) return;
    save_float_grid(dir / (id + "_" + name + ".f32"), p);
    save_plane_preview(dir / (id + "_" + name + ".png"), p, &fov);
  };
  plane("green", s.green);
  plane("weber", s.weber);
  plane("expanded", s.expanded);
  plane("suppressed", s.suppressed);
  plane("inverted", s.inverted);
  plane("raw_response", s.response);
  json j = json::object();
  if (s.clusters) {
    j["clusters"] = {{"vessel", s.clusters->vessel},
                     {"background", s.clusters->background},
                     {"foreground", s.clusters->foreground},
                     {"iterations", s.clusters->iterations},
                     {"converged", s.clusters->converged},
                     {"reseeded", s.clusters->reseeded}};
  }
  if (s.tv) {
    j["tv"] = {{"iterations", s.tv->iterations},
               {"noise_variance", s.tv->noise_variance},
               {"lambda_trace", s.tv->lambda_trace},
               {"energy_trace", s.tv->energy_trace}};
  }
  write_text(dir / (id + "_stages.json"), j.dump(2) + "\n");
}

struct SegmentArgs {
  ConfigFlags config;
  SourceFlags source;
  std::string out_dir;
  std::string debug_dir;
  unsigned threads = 0;
};

int cmd_segment(const SegmentArgs& a) {
  a.source.require_one();
  const MethodConfig cfg = a.config.build();
  const std::vector<WorkItem> items = work_items(a.source);
  const fs::path out = a.out_dir;
  make_output_dir(out);
  if (!a.debug_dir.empty()) make_output_dir(a.debug_dir);

  std::vector<std::string> ids;
  for (const auto& w : items) ids.push_back(w.id);
  const auto errors = run_pool(items.size(), resolve_threads(a.threads), [&](std::size_t i) {
    const WorkItem& w = items[i];
    const RgbImage img = load_rgb(w.image);
    const BinaryMask fov = load_fov(w, img);
    const SegmentationResult r = segment(img, fov, cfg, !a.debug_dir.empty());
    save_mask_png(out / (w.id + "_vessels.png"), r.vessels);
    save_float_grid(out / (w.id + "_response.f32"), r.normalized);
    save_mask_png(out / (w.id + "_fov.png"), fov);
    json prov = {
        {"id", w.id},
        {"image", fs::absolute(w.image).string()},
        {"image_digest", r.provenance.input_digest},
        {"fov_source", w.mask_source},
        {"fov", w.mask ? json(fs::absolute(*w.mask).string()) : json(nullptr)},
        {"fov_digest", r.provenance.fov_digest},
        {"version", r.provenance.version},
        {"config", json::parse(r.provenance.config_json)},
    };
    write_text(out / (w.id + "_provenance.json"), prov.dump(2) + "\n");
    if (r.stages) write_debug(a.debug_dir, w.id, *r.stages, fov);
  });
  const int status = report_failures(ids, errors, out);
  std::cout << "segmented " << items.size() - static_cast<std::size_t>(std::count_if(
                                                   errors.begin(), errors.end(),
                                                   [](const std::string& e) { return !e.empty(); }))
            << " of " << items.size() << " images into " << out.string() << "\n";
  return status;
}

// -------------------------------------------------------------------- mask

struct MaskArgs {
  SourceFlags source;
  std::string out;
  unsigned threads = 0;
};

int cmd_mask(const MaskArgs& a) {
  a.source.require_one();
  if (!a.source.mask.empty() || a.source.dataset_mask)
    throw UsageError("mask computes the FOV; --mask and --dataset-mask do not apply");
  if (!a.source.image.empty()) {
    // Single image: -o names the PNG unless it is an existing directory.
    fs::path target = a.out;
    const std::string id =
        a.source.id.empty() ? fs::path(a.source.image).stem().string() : a.source.id;
    if (fs::is_directory(target)) target /= id + "_fov.png";
    save_mask_png(target, compute_fov_mask(load_rgb(a.source.image)));
    return 0;
  }
  const std::vector<WorkItem> items = work_items(a.source);
  make_output_dir(a.out);
  std::vector<std::string> ids;
  for (const auto& w : items) ids.push_back(w.id);
  const auto errors = run_pool(items.size(), resolve_threads(a.threads), [&](std::size_t i) {
    save_mask_png(fs::path(a.out) / (items[i].id + "_fov.png"),
                  compute_fov_mask(load_rgb(items[i].image)));
  });
  return report_failures(ids, errors, a.out);
}

// ------------------------------------------------------------ eval and roc

struct Scored {
  std::string id;
  BinaryMask pred;
  BinaryMask gt;
  BinaryMask fov;
  std::optional<GrayPlane> response;
};

struct EvalArgs {
  std::string predictions;
  std::string manifest;
  std::string tag;
  std::string labeler;
  std::string out_dir;
  bool dataset_mask = false;
  unsigned threads = 0;
};

std::string labeler_for(const DatasetEntry& e, const std::string& wanted) {
  if (!wanted.empty()) return wanted;
  if (e.gt.empty()) throw Error(ErrorKind::contract, "entry '" + e.id + "' has no ground truth");
  return e.gt.begin()->first;
}

// Prediction ids from <id>_vessels.png files, sorted.
std::vector<std::string> prediction_ids(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::io, "no prediction directory " + dir.string());
  const std::string suffix = "_vessels.png";
  std::vector<std::string> ids;
  for (const auto& f : fs::directory_iterator(dir)) {
    const std::string name = f.path().filename().string();
    if (f.is_regular_file() && name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  if (ids.empty()) throw Error(ErrorKind::contract, "no *_vessels.png predictions in " + dir.string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

// FOV precedence: the segmenter's <id>_fov.png, the manifest mask, then a
// mask computed from the image. --dataset-mask forces the manifest mask.
std::vector<Scored> load_scored(const EvalArgs& a) {
  const DatasetManifest m = load_selected(a.manifest, a.tag);
  const fs::path dir = a.predictions;
  const std::vector<std::string> ids = prediction_ids(dir);
  std::vector<Scored> out(ids.size());
  const auto errors = run_pool(ids.size(), resolve_threads(a.threads), [&](std::size_t i) {
    const DatasetEntry& e = m.entry(ids[i]);
    Scored& s = out[i];
    s.id = e.id;
    s.gt = resolve_gt(m, e.id, labeler_for(e, a.labeler));
    s.pred = load_mask(dir / (e.id + "_vessels.png"));
    const fs::path fov_file = dir / (e.id + "_fov.png");
    if (a.dataset_mask) {
      const auto mask = resolve_mask(m, e.id);
      if (!mask) throw Error(ErrorKind::contract, "entry '" + e.id + "' has no mask");
      s.fov = *mask;
    } else if (fs::exists(fov_file)) {
      s.fov = load_mask(fov_file);
    } else if (auto mask = resolve_mask(m, e.id)) {
      s.fov = *mask;
    } else {
      s.fov = compute_fov_mask(load_rgb(m.resolve(e.image)));
    }
    const fs::path resp = dir / (e.id + "_response.f32");
    if (fs::exists(resp)) s.response = load_float_grid(resp);
    require_same_shape(s.pred, s.gt, "prediction vs ground truth");
    require_same_shape(s.fov, s.gt, "FOV vs ground truth");
    if (s.response) require_same_shape(*s.response, s.gt, "response vs ground truth");
  });
  std::string failed;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (!errors[i].empty()) failed += "\n  " + ids[i] + ": " + errors[i];
  if (!failed.empty()) throw Error(ErrorKind::contract, "evaluation inputs failed:" + failed);
  return out;
}

std::optional<RocCurve> roc_of(const std::vector<Scored>& scored) {
  std::vector<GrayPlane> r;
  std::vector<BinaryMask> g, f;
  for (const Scored& s : scored) {
    if (!s.response) return std::nullopt;
    r.push_back(*s.response);
    g.push_back(s.gt);
    f.push_back(s.fov);
  }
  return roc_curve(r, g, f);
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

int cmd_eval(const EvalArgs& a) {
  const std::vector<Scored> scored = load_scored(a);
  make_output_dir(a.out_dir);
  std::vector<MeasureRow> rows;
  for (const Scored& s : scored) {
    MeasureRow row = measures(confusion(s.pred, s.gt, s.fov), s.id);
    if (s.response && row.tp_rate && row.fp_rate) {
      row.auc = roc_curve(std::span(&*s.response, 1), std::span(&s.gt, 1), std::span(&s.fov, 1)).auc;
    }
    rows.push_back(std::move(row));
  }
  const EvalReport report = aggregate(std::move(rows));
  {
    std::ofstream out(fs::path(a.out_dir) / "metrics.csv");
    write_metrics_csv(out, report);
  }
  const std::optional<RocCurve> curve = roc_of(scored);
  if (curve) {
    std::ofstream out(fs::path(a.out_dir) / "roc.csv");
    write_roc_csv(out, *curve);
  } else {
    std::cerr << "note: some predictions lack <id>_response.f32; roc.csv not written\n";
  }
  const MeasureRow& m = report.mean;
  std::printf("mean over %zu images: accuracy=%.4f tp_rate=%s fp_rate=%s auc=%s roc_auc=%s\n",
              report.rows.size(), m.accuracy, fmt_opt(m.tp_rate).c_str(),
              fmt_opt(m.fp_rate).c_str(), fmt_opt(m.auc).c_str(),
              fmt_opt(curve ? std::optional(curve->auc) : std::nullopt).c_str());
  return 0;
}

int cmd_roc(const EvalArgs& a) {
  const std::vector<Scored> scored = load_scored(a);
  const std::optional<RocCurve> curve = roc_of(scored);
  if (!curve) throw Error(ErrorKind::contract, "roc needs <id>_response.f32 for every prediction");
  make_output_dir(a.out_dir);
  std::ofstream out(fs::path(a.out_dir) / "roc.csv");
  write_roc_csv(out, *curve);
  std::printf("AUC %.5f over %zu images\n", curve->auc, scored.size());
  return 0;
}

// --------------------------------------------------------------- calibrate

struct CalibrateArgs {
  ConfigFlags config;
  std::string manifest;
  std::string tag;
  std::string labeler;
  std::string out_dir;
  bool dataset_mask = false;
  double target = 0.02;
  unsigned threads = 0;
};

int cmd_calibrate(const CalibrateArgs& a) {
  const MethodConfig cfg = a.config.build();
  const DatasetManifest m = load_selected(a.manifest, a.tag);
  const std::size_t n = m.entries.size();
  std::vector<GrayPlane> norms(n);
  std::vector<BinaryMask> gts(n), fovs(n);
  std::vector<std::string> ids;
  for (const auto& e : m.entries) ids.push_back(e.id);
  const auto errors = run_pool(n, resolve_threads(a.threads), [&](std::size_t i) {
    const DatasetEntry& e = m.entries[i];
    gts[i] = resolve_gt(m, e.id, labeler_for(e, a.labeler));
    const RgbImage img = load_rgb(m.resolve(e.image));
    if (a.dataset_mask) {
      const auto mask = resolve_mask(m, e.id);
      if (!mask) throw Error(ErrorKind::contract, "entry '" + e.id + "' has no mask");
      fovs[i] = *mask;
    } else {
      fovs[i] = compute_fov_mask(img);
    }
    norms[i] = segment(img, fovs[i], cfg).normalized;
  });
  std::string failed;
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty()) failed += ids[i] + ": " + errors[i] + "\n";
  if (!failed.empty()) {
    std::cerr << failed;
    return kExitFailure;
  }
  const RocCurve curve = roc_curve(norms, gts, fovs);
  const std::size_t k = calibrate_threshold(curve, a.target);
  const double fn = mean_fn_rates(curve)[k];
  if (!a.out_dir.empty()) {
    make_output_dir(a.out_dir);
    std::ofstream out(fs::path(a.out_dir) / "roc.csv");
    write_roc_csv(out, curve);
  }
  std::printf("threshold %.2f (mean FN rate %.4f, target %.4f, %zu images, AUC %.5f)\n",
              curve.samples[k].threshold, fn, a.target, n, curve.auc);
  return 0;
}

void add_eval_options(CLI::App& app, EvalArgs& a) {
  app.add_option("--predictions", a.predictions, "Directory of <id>_vessels.png files")->required();
  app.add_option("--manifest", a.manifest, "Dataset manifest with ground truth")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--tag", a.tag, "Only manifest entries with this tag");
  app.add_option("--labeler", a.labeler, "Ground-truth key (default: first of each entry)");
  app.add_option("-o,--output", a.out_dir, "Output directory")->required();
  app.add_flag("--dataset-mask", a.dataset_mask, "Score inside the manifest's FOV masks");
  app.add_option("--threads", a.threads, "Worker threads (default: all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retinal vessel segmentation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", library_version());

  SegmentArgs seg;
  auto* segment_cmd = app.add_subcommand("segment", "Segment one image or a manifest");
  seg.config.add_to(*segment_cmd, true);
  seg.source.add_to(*segment_cmd);
  segment_cmd->add_option("-o,--output", seg.out_dir, "Output directory")->required();
  segment_cmd->add_option("--debug-dir", seg.debug_dir, "Also write intermediate planes here");
  segment_cmd->add_option("--threads", seg.threads, "Worker threads (default: all cores; 1 is serial)");

  MaskArgs mask;
  auto* mask_cmd = app.add_subcommand("mask", "Compute FOV masks only");
  mask.source.add_to(*mask_cmd);
  mask_cmd->add_option("-o,--output", mask.out, "PNG path (single image) or directory")->required();
  mask_cmd->add_option("--threads", mask.threads, "Worker threads");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions: metrics.csv and roc.csv");
  add_eval_options(*eval_cmd, eval);

  EvalArgs roc;
  auto* roc_cmd = app.add_subcommand("roc", "ROC sweep of saved responses: roc.csv");
  add_eval_options(*roc_cmd, roc);

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Threshold whose mean FN rate is nearest a target");
  cal.config.add_to(*cal_cmd, false);
  cal_cmd->add_option("--manifest", cal.manifest, "Dataset manifest with ground truth")
      ->required()
      ->check(CLI::ExistingFile);
  cal_cmd->add_option("--tag", cal.tag, "Only manifest entries with this tag");
  cal_cmd->add_option("--labeler", cal.labeler, "Ground-truth key (default: first of each entry)");
  cal_cmd->add_option("--target", cal.target, "Target mean FN rate")->check(CLI::Range(0.0, 1.0));
  cal_cmd->add_option("-o,--output", cal.out_dir, "Optional directory for roc.csv");
  cal_cmd->add_flag("--dataset-mask", cal.dataset_mask, "Use the manifest's FOV masks");
  cal_cmd->add_option("--threads", cal.threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*segment_cmd) return cmd_segment(seg);
    if (*mask_cmd) return cmd_mask(mask);
    if (*eval_cmd) return cmd_eval(eval);
    if (*roc_cmd) return cmd_roc(roc);
    if (*cal_cmd) return cmd_calibrate(cal);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
