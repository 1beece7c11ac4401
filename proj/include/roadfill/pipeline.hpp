#pragma once

// End-to-end correction run: integrate, mask, regularity, complete,
// deintegrate, flatten, save. Outputs are staged next to the target
// directory and moved into place only when every stage succeeded.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "roadfill/complete.hpp"
#include "roadfill/eval.hpp"
#include "roadfill/features.hpp"
#include "roadfill/integrate.hpp"
#include "roadfill/mask.hpp"
#include "roadfill/mesh_io.hpp"
#include "roadfill/png_io.hpp"
#include "roadfill/regularity.hpp"
#include "roadfill/remap.hpp"

namespace roadfill {

enum class MaskSource { kNone, kImage, kBoxes, kDetectCommand };

struct PipelineConfig {
  std::filesystem::path input;
  // Ground coordinates first (g0 min, g1 min, g0 max, g1 max), then the
  // optional height range. Ground axes follow `up`.
  std::vector<double> roi;
  double gsd = 0.0;
  UpAxis up = UpAxis::Z;

  std::filesystem::path mask_path;
  std::filesystem::path bbox_path;
  std::string detect_cmd;
  double dilation = kDefaultDilation;

  std::filesystem::path out;
  std::uint64_t seed = 0;
  CompletionParams completion;
  std::optional<std::vector<double>> directions_deg;  // skips regularity detection
  std::filesystem::path eval_ref;
  bool dump_debug = false;

  MaskSource mask_source() const {
    int n = 0;
    MaskSource s = MaskSource::kNone;
    if (!mask_path.empty()) ++n, s = MaskSource::kImage;
    if (!bbox_path.empty()) ++n, s = MaskSource::kBoxes;
    if (!detect_cmd.empty()) ++n, s = MaskSource::kDetectCommand;
    if (n > 1) throw Error("config", "give exactly one of --mask, --bboxes, --detect-cmd");
    return s;
  }

  Box3 roi_box() const {
    const auto [g0, g1, u] = axis_order(up);
    Box3 b;
    b.min[g0] = roi[0];
    b.min[g1] = roi[1];
    b.max[g0] = roi[2];
    b.max[g1] = roi[3];
    if (roi.size() == 6) {
      b.min[u] = roi[4];
      b.max[u] = roi[5];
    }
    return b;
  }

  void validate() const {
    if (input.empty()) throw Error("config", "--input is required");
    if (out.empty()) throw Error("config", "--out is required");
    if (roi.size() != 4 && roi.size() != 6) throw Error("config", "--roi needs 4 or 6 comma-separated values");
    if (!(roi[0] < roi[2] && roi[1] < roi[3])) throw Error("config", "roi must satisfy x_min < x_max and y_min < y_max");
    if (roi.size() == 6 && !(roi[4] <= roi[5])) throw Error("config", "roi must satisfy z_min <= z_max");
    if (!(gsd > 0.0)) throw Error("config", "--gsd must be positive");
    if (!(dilation >= 0.0 && dilation <= 1.0)) throw Error("config", "--dilation must lie in [0, 1]");
    mask_source();
    try {
      completion.validate();
    } catch (const Error& e) {
      throw Error("config", e.what());
    }
  }
};

namespace detail {

inline std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

// Hue from offset angle, saturation from offset length.
inline RgbImage visualize_nnf(const NNField& nnf, const BinaryImage& mask) {
  RgbImage out(mask.width(), mask.height(), 255);
  double max_len = 1.0;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y)) max_len = std::max(max_len, std::hypot(nnf(x, y, 0), nnf(x, y, 1)));
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      const double hue = (std::atan2(nnf(x, y, 1), nnf(x, y, 0)) + kPi) / (2.0 * kPi) * 6.0;
      const double sat = std::hypot(nnf(x, y, 0), nnf(x, y, 1)) / max_len;
      const int sector = static_cast<int>(hue) % 6;
      const double f = hue - std::floor(hue);
      const double p = 1.0 - sat, q = 1.0 - sat * f, t = 1.0 - sat * (1.0 - f);
      double r = 1, g = 1, b = 1;
      switch (sector) {
        case 0: r = 1, g = t, b = p; break;
        case 1: r = q, g = 1, b = p; break;
        case 2: r = p, g = 1, b = t; break;
        case 3: r = p, g = q, b = 1; break;
        case 4: r = t, g = p, b = 1; break;
        default: r = 1, g = p, b = q; break;
      }
      out(x, y, 0) = clamp_to_u8(255 * r);
      out(x, y, 1) = clamp_to_u8(255 * g);
      out(x, y, 2) = clamp_to_u8(255 * b);
    }
  return out;
}

inline RgbImage outline_mask(const RgbImage& img, const BinaryImage& mask) {
  RgbImage out = img;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      bool border = false;
      for (Pixel d : {Pixel{-1, 0}, Pixel{1, 0}, Pixel{0, -1}, Pixel{0, 1}}) {
        const Pixel q{x + d.x, y + d.y};
        if (!mask.contains(q) || !mask(q)) border = true;
      }
      if (border) {
        out(x, y, 0) = 255;
        out(x, y, 1) = 0;
        out(x, y, 2) = 0;
      }
    }
  return out;
}

inline BoxFile run_detect_command(const std::string& cmd, const std::filesystem::path& image,
                                  const std::filesystem::path& json_out) {
  const std::string line = cmd + " " + quoted(image.string()) + " --out " + quoted(json_out.string());
  const int rc = std::system(line.c_str());
  if (rc != 0) throw Error("mask", "detector command failed with status " + std::to_string(rc) + ": " + line);
  return load_box_file(json_out);
}

class StagingDir {
 public:
  explicit StagingDir(const std::filesystem::path& target) : target_(target) {
    namespace fs = std::filesystem;
    const auto parent = fs::absolute(target).parent_path();
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw Error("cli", "cannot create '" + parent.string() + "': " + ec.message());
    for (int i = 0;; ++i) {
      path_ = parent / ("." + target.filename().string() + ".partial" + std::to_string(i));
      if (fs::create_directory(path_, ec)) break;
      if (ec || i > 1000) throw Error("cli", "cannot create staging directory in '" + parent.string() + "'");
    }
  }
  ~StagingDir() {
    std::error_code ec;
    if (!committed_) std::filesystem::remove_all(path_, ec);
  }
  StagingDir(const StagingDir&) = delete;
  StagingDir& operator=(const StagingDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

  void commit() {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (fs::exists(target_)) {
      if (!fs::is_directory(target_) || (!fs::is_empty(target_) && !fs::exists(target_ / "report.json")))
        throw Error("cli", "refusing to replace '" + target_.string() + "': not a previous run directory");
      fs::remove_all(target_, ec);
      if (ec) throw Error("cli", "cannot replace '" + target_.string() + "': " + ec.message());
    }
    fs::rename(path_, target_, ec);
    if (ec) throw Error("cli", "cannot move outputs to '" + target_.string() + "': " + ec.message());
    committed_ = true;
  }

 private:
  std::filesystem::path target_;
  std::filesystem::path path_;
  bool committed_ = false;
};

}  // namespace detail

// Flat key=value text accepted back by `--config`.
inline std::string effective_config_text(const PipelineConfig& c) {
  std::ostringstream o;
  const auto& p = c.completion;
  o << "input=" << detail::quoted(c.input.string()) << "\n";
  o << "roi=" << detail::quoted([&] {
    std::string s;
    for (std::size_t i = 0; i < c.roi.size(); ++i) s += (i ? "," : "") + detail::fmt_num(c.roi[i]);
    return s;
  }()) << "\n";
  o << "gsd=" << detail::fmt_num(c.gsd) << "\n";
  o << "up-axis=" << detail::quoted(to_string(c.up)) << "\n";
  if (!c.mask_path.empty()) o << "mask=" << detail::quoted(c.mask_path.string()) << "\n";
  if (!c.bbox_path.empty()) o << "bboxes=" << detail::quoted(c.bbox_path.string()) << "\n";
  if (!c.detect_cmd.empty()) o << "detect-cmd=" << detail::quoted(c.detect_cmd) << "\n";
  o << "dilation=" << detail::fmt_num(c.dilation) << "\n";
  o << "out=" << detail::quoted(c.out.string()) << "\n";
  o << "seed=" << c.seed << "\n";
  o << "patch-size=" << p.patch_size << "\n";
  o << "lambda1=" << detail::fmt_num(p.lambda_proximity) << "\n";
  o << "lambda2=" << detail::fmt_num(p.lambda_regularity) << "\n";
  o << "iters=" << p.iterations << "\n";
  o << "coarsest-size=" << p.coarsest_max_dim << "\n";
  o << "edge-threshold=" << p.edge_threshold << "\n";
  o << "synthesis=" << detail::quoted(to_string(p.synthesis)) << "\n";
  o << "no-directional-guidance=" << (p.directional_guidance ? "false" : "true") << "\n";
  o << "no-linear-ordering=" << (p.linear_ordering ? "false" : "true") << "\n";
  if (p.regularity_cost == RegularityCost::kLiteralCosine) o << "literal-regularity-cost=true\n";
  if (!p.search_around_match) o << "search-around-pixel=true\n";
  if (c.directions_deg) {
    std::string s;
    for (std::size_t i = 0; i < c.directions_deg->size(); ++i)
      s += (i ? "," : "") + detail::fmt_num((*c.directions_deg)[i]);
    o << "directions=" << detail::quoted(s) << "\n";
  }
  if (!c.eval_ref.empty()) o << "eval-ref=" << detail::quoted(c.eval_ref.string()) << "\n";
  o << "dump-debug=" << (c.dump_debug ? "true" : "false") << "\n";
  return o.str();
}

struct RunReport {
  std::string status = "ok";
  std::size_t void_pixels = 0;
  nlohmann::json doc;
};

inline RunReport run_pipeline(const PipelineConfig& config) {
  namespace fs = std::filesystem;
  using clock = std::chrono::steady_clock;
  config.validate();

  RunReport report;
  auto& doc = report.doc;
  nlohmann::json timings = nlohmann::json::object();
  auto t0 = clock::now();
  auto lap = [&](const char* stage) {
    const auto now = clock::now();
    timings[stage] = std::chrono::duration<double, std::milli>(now - t0).count();
    t0 = now;
  };

  detail::StagingDir staging(config.out);
  const fs::path dir = staging.path();

  std::vector<std::string> warnings;
  const TexturedMesh mesh = load_textured_mesh(config.input, &warnings);
  lap("load");

  const ProjectionSpec proj = build_projection(config.roi_box(), config.gsd, config.up);
  const RasterPair raster = rasterize(mesh, proj);
  if (raster.empty) warnings.push_back("no facet intersects the roi; rasters are all invalid");
  write_png(raster.color.rgb, dir / "rendered.png");
  lap("integrate");

  const int w = proj.width, h = proj.height;
  MaskRaster mask(w, h, 0);
  std::vector<BoundingBox> boxes;
  switch (config.mask_source()) {
    case MaskSource::kNone: break;
    case MaskSource::kImage: mask = load_mask(config.mask_path, w, h); break;
    case MaskSource::kBoxes:
    case MaskSource::kDetectCommand: {
      const BoxFile bf = config.mask_source() == MaskSource::kBoxes
                             ? load_box_file(config.bbox_path)
                             : detail::run_detect_command(config.detect_cmd, dir / "rendered.png", dir / "boxes.json");
      if (bf.width != w || bf.height != h)
        throw Error("mask", "bounding-box file is for a " + std::to_string(bf.width) + "x" +
                                std::to_string(bf.height) + " image, raster is " + std::to_string(w) + "x" +
                                std::to_string(h));
      boxes = bf.boxes;
      mask = boxes_to_mask(boxes, w, h, config.dilation);
      break;
    }
  }
  report.void_pixels = count_set(mask);
  write_binary_png(mask, dir / "mask.png");
  write_png(detail::outline_mask(raster.color.rgb, mask), dir / "boxes.png");
  {
    RgbImage masked = raster.color.rgb;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (mask(x, y))
          for (int c = 0; c < 3; ++c) masked(x, y, c) = 255;
    write_png(masked, dir / "masked.png");
  }
  lap("mask");

  nlohmann::json diagnostics = nlohmann::json::object();
  diagnostics["facets"] = mesh.facets.size();
  diagnostics["facets_in_roi"] = raster.facets_in_roi;
  diagnostics["void_pixels"] = report.void_pixels;
  diagnostics["viewport"] = {w, h};

  RgbImage completed = raster.color.rgb;
  TexturedMesh result_mesh = mesh;
  nlohmann::json theta_json = nlohmann::json::array();

  if (report.void_pixels == 0) {
    report.status = "0 void pixels";
  } else {
    OrientationSet directions;
    if (config.directions_deg) {
      for (double d : *config.directions_deg) directions.push_back({d * kPi / 180.0, 0, false});
      diagnostics["regularity"] = "directions given";
    } else {
      const DogFeatureBackend backend;
      const auto reg = extract_regularities(raster.color.rgb, mask, backend, stage_seed(config.seed, "regularity"));
      directions = reg.directions;
      diagnostics["regularity"] = to_string(reg.status);
      diagnostics["keypoints"] = reg.keypoints;
      diagnostics["matches"] = reg.matches.size();
      if (reg.status != RegularityStatus::kOk) warnings.push_back(to_string(reg.status));
    }
    for (const auto& d : directions) theta_json.push_back(d.theta * 180.0 / kPi);
    lap("regularity");

    CompletionParams params = config.completion;
    params.seed = stage_seed(config.seed, "complete");
    const BinaryImage edges = prewitt_edges(raster.color.rgb, mask, params.edge_threshold);
    SnapshotCallback dump;
    if (config.dump_debug) {
      fs::create_directories(dir / "debug");
      dump = [&](const LevelSnapshot& s) {
        const std::string stem = "level" + std::to_string(s.level) + "_iter" +
                                 (s.iteration < 0 ? std::string("init") : std::to_string(s.iteration));
        write_png(to_u8(*s.image), dir / "debug" / (stem + ".png"));
        write_png(detail::visualize_nnf(*s.nnf, *s.mask), dir / "debug" / (stem + "_nnf.png"));
      };
    }
    const auto res = complete(raster.color.rgb, mask, directions, edges, params, dump);
    completed = res.image;
    diagnostics["pyramid_levels"] = res.stats.levels;
    diagnostics["passes"] = res.stats.passes;
    diagnostics["adoptions"] = res.stats.adoptions;
    diagnostics["energy_increases"] = res.stats.energy_increases;
    diagnostics["final_energy"] = res.stats.final_energy;
    lap("complete");

    const TexelMap tmap = build_texel_map(mesh, raster.facets, proj);
    const auto de = deintegrate(completed, mask, tmap, mesh);
    diagnostics["texels_written"] = de.texels_written;
    diagnostics["collided_texels"] = de.collided_texels;
    diagnostics["unmapped_pixels"] = de.unmapped_pixels;
    lap("deintegrate");

    const auto masked_facets = collect_masked_facets(raster.facets, mask);
    FlattenOptions fo;
    fo.seed = stage_seed(config.seed, "flatten");
    auto fl = flatten_facets(de.mesh, masked_facets, raster.facets, proj, fo);
    diagnostics["masked_facets"] = masked_facets.size();
    diagnostics["moved_vertices"] = fl.moved_vertices;
    diagnostics["plane"] = {fl.plane.a, fl.plane.b, fl.plane.c};
    diagnostics["plane_inliers"] = fl.inliers;
    result_mesh = std::move(fl.mesh);
    lap("flatten");
  }
  write_png(completed, dir / "completed.png");
  save_textured_mesh(result_mesh, dir / "mesh");
  lap("save");

  if (!config.eval_ref.empty()) {
    const RgbImage ref = read_png_rgb(config.eval_ref);
    nlohmann::json ev;
    const auto full = evaluate(completed, ref);
    ev["full"] = {{"psnr", full.psnr_db}, {"ssim", full.ssim}};
    if (report.void_pixels > 0) {
      const auto hole = evaluate(completed, ref, &mask);
      ev["hole"] = {{"psnr", hole.psnr_db}, {"ssim", hole.ssim}};
    }
    doc["eval"] = ev;
  }

  const auto& p = config.completion;
  doc["status"] = report.status;
  doc["seed"] = config.seed;
  doc["params"] = {{"input", config.input.string()},
                   {"roi", config.roi},
                   {"gsd", config.gsd},
                   {"up_axis", to_string(config.up)},
                   {"mask", config.mask_path.string()},
                   {"bboxes", config.bbox_path.string()},
                   {"detect_cmd", config.detect_cmd},
                   {"dilation", config.dilation},
                   {"out", config.out.string()},
                   {"patch_size", p.patch_size},
                   {"lambda1", p.lambda_proximity},
                   {"lambda2", p.lambda_regularity},
                   {"iters", p.iterations},
                   {"coarsest_size", p.coarsest_max_dim},
                   {"coarsest_void_size", p.coarsest_void_dim},
                   {"edge_threshold", p.edge_threshold},
                   {"synthesis", to_string(p.synthesis)},
                   {"directional_guidance", p.directional_guidance},
                   {"linear_ordering", p.linear_ordering},
                   {"search_around_match", p.search_around_match},
                   {"regularity_cost", p.regularity_cost == RegularityCost::kUndirected ? "undirected" : "literal"},
                   {"eval_ref", config.eval_ref.string()},
                   {"dump_debug", config.dump_debug}};
  doc["theta_deg"] = theta_json;
  doc["diagnostics"] = diagnostics;
  doc["warnings"] = warnings;
  doc["timings_ms"] = timings;
  {
    std::ofstream f(dir / "report.json");
    f << doc.dump(2) << "\n";
    std::ofstream cfg(dir / "effective.cfg");
    cfg << effective_config_text(config);
    if (!f || !cfg) throw Error("cli", "cannot write report");
  }
  staging.commit();
  return report;
}

}  // namespace roadfill
