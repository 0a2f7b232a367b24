#include "easal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "easal/image.hpp"
#include "easal/metrics.hpp"

namespace easal {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  json j = json::parse(in);
  RunConfig cfg;
  cfg.dataset_root = j.value("dataset_root", cfg.dataset_root.string());
  cfg.images_subdir = j.value("images_subdir", cfg.images_subdir);
  cfg.masks_subdir = j.value("masks_subdir", cfg.masks_subdir);
  cfg.output_dir = j.value("output_dir", cfg.output_dir.string());
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("rbd")) {
    const json& r = j["rbd"];
    cfg.rbd.k_regions = r.value("k_regions", cfg.rbd.k_regions);
    cfg.rbd.compactness = r.value("compactness", cfg.rbd.compactness);
    cfg.rbd.sigma_clr = r.value("sigma_clr", cfg.rbd.sigma_clr);
    cfg.rbd.delta_bndcon = r.value("delta_bndcon", cfg.rbd.delta_bndcon);
    cfg.rbd.sigma_spa = r.value("sigma_spa", cfg.rbd.sigma_spa);
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    if (m.contains("widths")) {
      const auto w = m["widths"].get<std::vector<int>>();
      if (w.size() != 4) throw std::runtime_error("config: model.widths must list 4 encoder widths");
      std::copy(w.begin(), w.end(), cfg.plan.encoder.begin());
    }
    cfg.plan.fusion_width = m.value("fusion_width", cfg.plan.fusion_width);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    cfg.train.base_lr = t.value("base_lr", cfg.train.base_lr);
    cfg.train.momentum = t.value("momentum", cfg.train.momentum);
    cfg.train.poly_power = t.value("poly_power", cfg.train.poly_power);
    cfg.train.max_iter = t.value("max_iter", cfg.train.max_iter);
    cfg.train.image_size = t.value("image_size", cfg.train.image_size);
  }
  cfg.train.seed = cfg.seed;
  if (j.contains("synth")) {
    const json& s = j["synth"];
    cfg.synth.count = s.value("count", cfg.synth.count);
    cfg.synth.size = s.value("size", cfg.synth.size);
  }
  return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["dataset_root"] = cfg.dataset_root.string();
  j["images_subdir"] = cfg.images_subdir;
  j["masks_subdir"] = cfg.masks_subdir;
  j["output_dir"] = cfg.output_dir.string();
  j["seed"] = cfg.seed;
  j["rbd"] = {{"k_regions", cfg.rbd.k_regions},
              {"compactness", cfg.rbd.compactness},
              {"sigma_clr", cfg.rbd.sigma_clr},
              {"delta_bndcon", cfg.rbd.delta_bndcon},
              {"sigma_spa", cfg.rbd.sigma_spa}};
  j["model"] = {{"widths", cfg.plan.encoder}, {"fusion_width", cfg.plan.fusion_width}};
  j["train"] = {{"base_lr", cfg.train.base_lr},
                {"momentum", cfg.train.momentum},
                {"poly_power", cfg.train.poly_power},
                {"max_iter", cfg.train.max_iter},
                {"image_size", cfg.train.image_size}};
  j["synth"] = {{"count", cfg.synth.count}, {"size", cfg.synth.size}};
  return j.dump(2);
}

std::string config_hash(const RunConfig& cfg) {
  const std::string s = config_to_json(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

ImageMeta meta_for(const RunConfig& cfg) {
  return {{std::string(kToolVersion) + " config_hash=" + config_hash(cfg) + " seed=" + std::to_string(cfg.seed)}};
}

std::string csv_prelude(const RunConfig& cfg) {
  return "# " + std::string(kToolVersion) + " config_hash=" + config_hash(cfg) +
         " seed=" + std::to_string(cfg.seed) + "\n";
}

std::vector<fs::path> sorted_files(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) return files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

DatasetIndex index_dataset(const fs::path& images_dir, const fs::path& masks_dir) {
  DatasetIndex idx;
  std::map<std::string, fs::path> masks;
  for (const fs::path& p : sorted_files(masks_dir)) masks[p.stem().string()] = p;
  std::map<std::string, bool> used;
  for (const fs::path& p : sorted_files(images_dir)) {
    auto it = masks.find(p.stem().string());
    if (it == masks.end()) {
      idx.unmatched.push_back(p);
    } else {
      idx.pairs.emplace_back(p, it->second);
      used[it->first] = true;
    }
  }
  for (const auto& [stem, p] : masks)
    if (!used.count(stem)) idx.unmatched.push_back(p);
  return idx;
}

namespace {

struct SynthRng {
  std::mt19937_64 rng;
  explicit SynthRng(std::uint64_t seed) : rng(seed) {}
  double uniform() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }
  int uniform_int(int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); }
};

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

}  // namespace

int cmd_synth(const RunConfig& cfg, std::ostream& log) {
  const int n = cfg.synth.count, size = cfg.synth.size;
  if (n < 1 || size < 16) {
    log << "synth: count must be >= 1 and size >= 16\n";
    return kExitUsage;
  }
  const fs::path images_dir = cfg.dataset_root / cfg.images_subdir;
  const fs::path masks_dir = cfg.dataset_root / cfg.masks_subdir;
  fs::create_directories(images_dir);
  fs::create_directories(masks_dir);
  const ImageMeta meta = meta_for(cfg);

  SynthRng rng(cfg.seed);
  int small_count = 0;
  for (int idx = 0; idx < n; ++idx) {
    Tensor image({3, size, size});
    Tensor mask({1, size, size});

    // Dim textured background: base tint plus per-pixel noise and a mild
    // diagonal luminance ramp.
    const double base = rng.uniform(0.12, 0.30);
    const double tint_r = rng.uniform(0.9, 1.1), tint_g = rng.uniform(0.9, 1.1), tint_b = rng.uniform(0.9, 1.1);
    const double ramp = rng.uniform(-0.06, 0.06);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double noise = rng.uniform(-0.05, 0.05);
        const double l = base + noise + ramp * (x + y) / (2.0 * size);
        image.at(0, y, x) = std::clamp(l * tint_r, 0.0, 1.0);
        image.at(1, y, x) = std::clamp(l * tint_g, 0.0, 1.0);
        image.at(2, y, x) = std::clamp(l * tint_b, 0.0, 1.0);
      }
    }

    const int n_shapes = rng.uniform_int(1, 3);
    // Every 4th image carries only a small object (area < 1/25 of the
    // frame) to cover the small-object split.
    const bool small_image = idx % 4 == 0;
    for (int s = 0; s < (small_image ? 1 : n_shapes); ++s) {
      int sw, sh;
      if (small_image) {
        sw = rng.uniform_int(6, 12);
        sh = rng.uniform_int(6, 12);
        while (sw * sh >= size * size / 25) sh -= 1;
      } else {
        sw = rng.uniform_int(12, size / 2);
        sh = rng.uniform_int(12, size / 2);
      }
      const int margin = 3;
      const int x0 = rng.uniform_int(margin, size - margin - sw);
      const int y0 = rng.uniform_int(margin, size - margin - sh);
      const bool ellipse = rng.uniform() < 0.5;
      const auto rgb = hsv_to_rgb(rng.uniform(), rng.uniform(0.7, 1.0), rng.uniform(0.75, 1.0));
      const double cx = x0 + sw / 2.0, cy = y0 + sh / 2.0;
      for (int y = y0; y < y0 + sh; ++y) {
        for (int x = x0; x < x0 + sw; ++x) {
          if (ellipse) {
            const double dx = (x - cx) / (sw / 2.0), dy = (y - cy) / (sh / 2.0);
            if (dx * dx + dy * dy > 1.0) continue;
          }
          image.at(0, y, x) = rgb[0];
          image.at(1, y, x) = rgb[1];
          image.at(2, y, x) = rgb[2];
          mask.at(0, y, x) = 1.0;
        }
      }
    }
    if (small_image) ++small_count;

    // Guarantee a nonempty mask.
    bool any = std::any_of(mask.data.begin(), mask.data.end(), [](double v) { return v == 1.0; });
    if (!any) {
      for (int y = size / 2 - 4; y < size / 2 + 4; ++y)
        for (int x = size / 2 - 4; x < size / 2 + 4; ++x) {
          mask.at(0, y, x) = 1.0;
          image.at(0, y, x) = 0.9;
          image.at(1, y, x) = 0.2;
          image.at(2, y, x) = 0.2;
        }
    }

    std::ostringstream name;
    name << "img" << std::setw(4) << std::setfill('0') << idx;
    write_color(images_dir / (name.str() + ".ppm"), image, meta);
    write_gray(masks_dir / (name.str() + ".pgm"), mask, meta);
  }
  log << "synth: wrote " << n << " image/mask pairs (" << small_count << " small-object) to "
      << cfg.dataset_root.string() << "\n";
  return kExitOk;
}

int cmd_relabel(const RunConfig& cfg, std::ostream& log) {
  const fs::path masks_dir = cfg.dataset_root / cfg.masks_subdir;
  fs::create_directories(cfg.output_dir);
  const ImageMeta meta = meta_for(cfg);
  const auto files = sorted_files(masks_dir);
  int done = 0, failed = 0;
  double edge_fraction_sum = 0.0;
  for (const fs::path& p : files) {
    try {
      const BinaryMap mask = to_binary_mask(read_gray(p));
      const TriLabelMap labels = three_category_labels(mask);
      write_gray(cfg.output_dir / (p.stem().string() + "_labels.pgm"), trilabel_to_gray(labels), meta);
      edge_fraction_sum += static_cast<double>(labels.counts[1]) / static_cast<double>(labels.total());
      ++done;
    } catch (const std::exception& e) {
      log << "relabel: skipping " << p.string() << ": " << e.what() << "\n";
      ++failed;
    }
  }
  const double mean_edge = done > 0 ? edge_fraction_sum / done : 0.0;
  log << "relabel: " << done << " masks relabeled, " << failed << " failed, mean edge fraction " << fmt(mean_edge)
      << "\n";
  return kExitOk;
}

int cmd_rbd(const RunConfig& cfg, std::ostream& log) {
  const DatasetIndex idx = index_dataset(cfg.dataset_root / cfg.images_subdir, cfg.dataset_root / cfg.masks_subdir);
  for (const fs::path& p : idx.unmatched) log << "rbd: unmatched file " << p.string() << "\n";
  fs::create_directories(cfg.output_dir);
  const ImageMeta meta = meta_for(cfg);
  int done = 0;
  for (const auto& [image_path, mask_path] : idx.pairs) {
    try {
      const Tensor image = read_image(image_path);
      const Tensor sal = rbd_saliency(image, cfg.rbd);
      write_gray(cfg.output_dir / (image_path.stem().string() + "_rbd.pgm"), sal, meta);
      ++done;
    } catch (const std::exception& e) {
      log << "rbd: failed on " << image_path.string() << ": " << e.what() << "\n";
      return kExitData;
    }
  }
  log << "rbd: wrote " << done << " saliency maps\n";
  return kExitOk;
}

namespace {

int load_pairs(const RunConfig& cfg, std::ostream& log, std::vector<TrainSample>* out) {
  const DatasetIndex idx = index_dataset(cfg.dataset_root / cfg.images_subdir, cfg.dataset_root / cfg.masks_subdir);
  for (const fs::path& p : idx.unmatched) log << "dataset: unmatched file " << p.string() << "\n";
  int skipped = 0;
  for (const auto& [image_path, mask_path] : idx.pairs) {
    try {
      TrainSample s;
      s.image = read_image(image_path);
      s.mask = to_binary_mask(read_gray(mask_path));
      if (s.image.dim(1) != s.mask.height || s.image.dim(2) != s.mask.width) {
        log << "dataset: size mismatch for " << image_path.stem().string() << ", skipped\n";
        ++skipped;
        continue;
      }
      out->push_back(std::move(s));
    } catch (const std::exception& e) {
      log << "dataset: skipping " << image_path.stem().string() << ": " << e.what() << "\n";
      ++skipped;
    }
  }
  return skipped;
}

}  // namespace

int cmd_train(const RunConfig& cfg, std::ostream& log) {
  std::vector<TrainSample> dataset;
  const int skipped = load_pairs(cfg, log, &dataset);
  if (dataset.empty()) {
    log << "train: no usable image/mask pairs\n";
    return kExitData;
  }

  Model model = build_model(cfg.plan, cfg.seed);
  const TrainResult result = train(model, dataset, cfg.train, cfg.rbd);

  fs::create_directories(cfg.output_dir);
  save_checkpoint(model, cfg.output_dir / "model.ckpt");

  std::ostringstream csv;
  csv << csv_prelude(cfg) << "iter,lr,loss_frontend,loss_final\n";
  for (const TraceRow& row : result.trace)
    csv << row.iter << "," << fmt(row.lr) << "," << fmt(row.loss_frontend) << "," << fmt(row.loss_final) << "\n";
  write_text_atomic(cfg.output_dir / "trace.csv", csv.str());
  write_text_atomic(cfg.output_dir / "config_echo.json", csv_prelude(cfg) + config_to_json(cfg) + "\n");

  log << "train: " << result.trace.size() << " iterations on " << dataset.size() << " pairs (" << skipped
      << " skipped), final loss " << fmt(result.trace.back().loss_final) << "\n";
  return kExitOk;
}

int cmd_infer(const RunConfig& cfg, const fs::path& checkpoint, std::ostream& log) {
  Model model;
  try {
    model = load_checkpoint(checkpoint);
  } catch (const std::exception& e) {
    log << "infer: " << e.what() << "\n";
    return kExitData;
  }
  fs::create_directories(cfg.output_dir);
  const ImageMeta meta = meta_for(cfg);
  int done = 0;
  for (const fs::path& p : sorted_files(cfg.dataset_root / cfg.images_subdir)) {
    try {
      const Tensor image = read_image(p);
      const InferResult r = infer(model, image, cfg.rbd);
      write_gray(cfg.output_dir / (p.stem().string() + "_sal.pgm"), r.saliency, meta);
      write_gray(cfg.output_dir / (p.stem().string() + "_edge.pgm"), r.salient_edge, meta);
      ++done;
    } catch (const std::exception& e) {
      log << "infer: failed on " << p.string() << ": " << e.what() << "\n";
      return kExitData;
    }
  }
  log << "infer: wrote saliency and edge maps for " << done << " images\n";
  return kExitOk;
}

namespace {

std::string normalize_pred_stem(const std::string& stem) {
  for (const char* suffix : {"_sal", "_rbd"}) {
    const std::string s(suffix);
    if (stem.size() > s.size() && stem.compare(stem.size() - s.size(), s.size(), s) == 0)
      return stem.substr(0, stem.size() - s.size());
  }
  return stem;
}

struct EvalData {
  MetricsReport report;
  std::vector<std::string> names;
  int missing = 0;
};

bool collect_eval(const fs::path& pred_dir, const fs::path& gt_dir, std::ostream& log, EvalData* out) {
  std::map<std::string, fs::path> gts;
  for (const fs::path& p : sorted_files(gt_dir)) gts[p.stem().string()] = p;
  std::vector<ImageMetrics> per_image;
  for (const fs::path& p : sorted_files(pred_dir)) {
    const std::string stem = normalize_pred_stem(p.stem().string());
    if (p.stem().string().size() > 5 &&
        p.stem().string().compare(p.stem().string().size() - 5, 5, "_edge") == 0)
      continue;  // edge maps are not scored against the object mask
    auto it = gts.find(stem);
    if (it == gts.end()) {
      log << "eval: no ground truth for " << p.string() << "\n";
      out->missing += 1;
      continue;
    }
    try {
      const Tensor sal = read_gray(p);
      const BinaryMap gt = to_binary_mask(read_gray(it->second));
      per_image.push_back(evaluate_image(sal, gt));
      out->names.push_back(stem);
    } catch (const std::exception& e) {
      log << "eval: skipping " << p.string() << ": " << e.what() << "\n";
      out->missing += 1;
    }
  }
  if (per_image.empty()) {
    log << "eval: no evaluable prediction/ground-truth pairs\n";
    return false;
  }
  out->report = aggregate(std::move(per_image));
  out->report.skipped = out->missing;
  return true;
}

std::string pr_csv(const RunConfig& cfg, const MetricsReport& report) {
  std::ostringstream csv;
  csv << csv_prelude(cfg) << "threshold,precision,recall,f_beta\n";
  for (int t = 0; t < kNumThresholds; ++t)
    csv << t << "," << fmt(report.mean_pr[t].precision) << "," << fmt(report.mean_pr[t].recall) << ","
        << fmt(report.mean_f_curve[t]) << "\n";
  return csv.str();
}

}  // namespace

int cmd_eval(const RunConfig& cfg, const fs::path& pred_dir, const fs::path& gt_dir, std::ostream& log) {
  EvalData data;
  if (!collect_eval(pred_dir, gt_dir, log, &data)) return kExitData;
  fs::create_directories(cfg.output_dir);

  std::ostringstream csv;
  csv << csv_prelude(cfg) << "name,mae,max_f,mean_f,degenerate_gt\n";
  for (std::size_t i = 0; i < data.names.size(); ++i) {
    const ImageMetrics& m = data.report.per_image[i];
    const double best = *std::max_element(m.f_beta.begin(), m.f_beta.end());
    double mean = 0.0;
    for (double f : m.f_beta) mean += f;
    mean /= kNumThresholds;
    csv << data.names[i] << "," << fmt(m.mae) << "," << fmt(best) << "," << fmt(mean) << ","
        << (m.degenerate_gt ? 1 : 0) << "\n";
  }
  csv << "aggregate_mean_mae," << fmt(data.report.mean_mae) << ",,,\n";
  csv << "aggregate_max_f_curve_averaged," << fmt(data.report.max_f) << ",,,\n";
  csv << "aggregate_mean_f_curve_averaged," << fmt(data.report.mean_f) << ",,,\n";
  csv << "aggregate_mean_per_image_best_f," << fmt(data.report.mean_best_f) << ",,,\n";
  csv << "evaluated," << data.report.evaluated << ",,,\n";
  csv << "skipped," << data.report.skipped << ",,,\n";
  write_text_atomic(cfg.output_dir / "report.csv", csv.str());
  write_text_atomic(cfg.output_dir / "pr_curve.csv", pr_csv(cfg, data.report));

  log << "eval: " << data.report.evaluated << " images, mean MAE " << fmt(data.report.mean_mae) << ", max F "
      << fmt(data.report.max_f) << ", mean F " << fmt(data.report.mean_f) << "\n";
  return kExitOk;
}

int cmd_export_pr(const RunConfig& cfg, const fs::path& pred_dir, const fs::path& gt_dir, std::ostream& log) {
  EvalData data;
  if (!collect_eval(pred_dir, gt_dir, log, &data)) return kExitData;
  fs::create_directories(cfg.output_dir);
  write_text_atomic(cfg.output_dir / "pr_curve.csv", pr_csv(cfg, data.report));
  log << "export-pr: wrote " << kNumThresholds << "-row PR curve for " << data.report.evaluated << " images\n";
  return kExitOk;
}

}  // namespace easal
