// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"

using namespace roadfill;
using namespace fixtures;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream o;
  o << f.rdbuf();
  return o.str();
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> m;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) m[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return m;
}

Box3 ground_box(double x0, double y0, double x1, double y1) {
  Box3 b;
  b.min.x = x0;
  b.min.y = y0;
  b.max.x = x1;
  b.max.y = y1;
  return b;
}

BoundingBox box(double x0, double y0, double x1, double y1) {
  BoundingBox b;
  b.x_min = x0;
  b.y_min = y0;
  b.x_max = x1;
  b.y_max = y1;
  return b;
}

// Random grid mesh with up to 1000 facets, rough heights, jittered UVs and
// one or two atlases of random size.
TexturedMesh random_mesh(Rng& rng) {
  const int nx = 1 + static_cast<int>(uniform_index(rng, 25));
  const int ny = 1 + static_cast<int>(uniform_index(rng, std::min<std::size_t>(25, 500 / nx)));
  const int aw = 8 + static_cast<int>(uniform_index(rng, 120)), ah = 8 + static_cast<int>(uniform_index(rng, 120));
  auto m = grid_mesh(nx, ny, uniform(rng, 0.3, 2.0), [&](double, double) { return uniform(rng, 0.0, 3.0); },
                     random_image(aw, ah, rng));
  for (auto& uv : m.uvs) {
    uv.x = std::clamp(uv.x + uniform(rng, -0.2, 0.2) / nx, 0.0, 1.0);
    uv.y = std::clamp(uv.y + uniform(rng, -0.2, 0.2) / ny, 0.0, 1.0);
  }
  if (rng() % 2) {
    m.atlases.push_back({"second_mat", random_image(16 + static_cast<int>(uniform_index(rng, 64)), 32, rng)});
    for (std::size_t f = 0; f < m.facets.size(); ++f)
      if (rng() % 3 == 0) m.facet_atlas[f] = 1;
    m.tiles[0].atlas_end = 2;
  }
  return m;
}

Outcome round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  TempDir tmp("roadfill_acc");
  int identical = 0;
  std::size_t max_facets = 0;
  for (int s = 0; s < 25; ++s) {
    Rng rng(500 + s);
    const auto mesh = random_mesh(rng);
    max_facets = std::max(max_facets, mesh.facets.size());
    const auto in = tmp / ("in" + std::to_string(s)), out = tmp / ("out" + std::to_string(s));
    save_textured_mesh(mesh, in);
    const auto loaded = load_textured_mesh(in);
    Box3 roi;
    roi.min = {-1, -1, -1};
    roi.max = {60, 60, 10};
    const auto proj = build_projection(roi, uniform(rng, 0.05, 0.3));
    const auto r = rasterize(loaded, proj);
    const auto tm = build_texel_map(loaded, r.facets, proj);
    const auto res = deintegrate(r.color.rgb, BinaryImage(proj.width, proj.height, 0), tm, loaded);
    save_textured_mesh(res.mesh, out);
    if (tree(in) == tree(out) && res.texels_written == 0) ++identical;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {identical == 25 && secs < 10.0,
          fmt("%d/25 bundles byte-identical, up to %zu facets, %.2f s (limit 10 s)", identical, max_facets, secs)};
}

Outcome mapping_oracle() {
  Rng rng(77);
  TexturedMesh m = grid_mesh(10, 5, 2.0, [&](double, double) { return uniform(rng, 0, 1); }, random_image(300, 200, rng));
  for (auto& uv : m.uvs) {
    uv.x = std::clamp(uv.x + uniform(rng, -0.03, 0.03), 0.05, 0.95);
    uv.y = std::clamp(uv.y + uniform(rng, -0.03, 0.03), 0.05, 0.95);
  }
  const auto proj = build_projection(ground_box(0, 0, 20, 10), 0.05);
  const auto r = rasterize(m, proj);
  const auto tm = build_texel_map(m, r.facets, proj);

  std::map<int, std::vector<Pixel>> by_facet;
  for (int y = 0; y < proj.height; ++y)
    for (int x = 0; x < proj.width; ++x)
      if (const auto* rec = tm.at(x, y)) by_facet[rec->facet].push_back({x, y});
  std::vector<int> facets;
  for (const auto& [f, px] : by_facet)
    if (px.size() >= 100) facets.push_back(f);
  std::shuffle(facets.begin(), facets.end(), rng);
  if (facets.size() < 50) return {false, fmt("only %zu facets cover 100 pixels", facets.size())};
  facets.resize(50);

  const auto& atlas = m.atlases[0].image;
  double worst = 0.0;
  std::size_t checked = 0;
  for (int f : facets) {
    // Screen corners straight from the ground coordinates: x = g0 / gsd,
    // y = g1 / gsd for a roi anchored at the origin.
    std::array<Vec2, 3> s, t;
    for (int c = 0; c < 3; ++c) {
      const auto& v = m.vertices[m.facets[f][c]];
      s[c] = {v.x / 0.05, v.y / 0.05};
      const auto& uv = m.uvs[m.uv_facets[f][c]];
      t[c] = {uv.x * atlas.width() - 0.5, (1.0 - uv.y) * atlas.height() - 0.5};
    }
    auto& px = by_facet[f];
    std::shuffle(px.begin(), px.end(), rng);
    for (int i = 0; i < 100; ++i) {
      const Pixel p = px[i];
      // Solve p = s0 + a (s1 - s0) + b (s2 - s0) by Cramer's rule.
      const double ex = p.x + 0.5 - s[0].x, ey = p.y + 0.5 - s[0].y;
      const double ax = s[1].x - s[0].x, ay = s[1].y - s[0].y, bx = s[2].x - s[0].x, by = s[2].y - s[0].y;
      const double det = ax * by - ay * bx;
      const double a = (ex * by - ey * bx) / det, b = (ax * ey - ay * ex) / det;
      double u = t[0].x + a * (t[1].x - t[0].x) + b * (t[2].x - t[0].x);
      double v = t[0].y + a * (t[1].y - t[0].y) + b * (t[2].y - t[0].y);
      u = std::clamp(u, 0.0, atlas.width() - 1.0);
      v = std::clamp(v, 0.0, atlas.height() - 1.0);
      const auto* rec = tm.at(p.x, p.y);
      worst = std::max({worst, std::abs(rec->texel.u - u), std::abs(rec->texel.v - v)});
      ++checked;
    }
  }
  return {worst <= 1e-6 && checked == 5000, fmt("%zu pixel checks, max error %.3g texel (limit 1e-6)", checked, worst)};
}

Outcome energy_terms() {
  const double ep = proximity_cost({3, 4}, 0.0, std::max(800, 800) / 8.0);
  const double er = regularity_cost({7, 7}, directions_deg({0}));
  Rng rng(3);
  const auto half = random_image(120, 60, rng);
  RgbImage img(240, 60);
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 240; ++x)
      for (int c = 0; c < 3; ++c) img(x, y, c) = half(x % 120, y, c);
  CompletionParams p;
  p.lambda_proximity = 5e-4;
  CompletionLevel lvl(to_float(img), rect_mask(240, 60, 20, 20, 40, 40), directions_deg({0}), p);
  double worst_ea = 0.0;
  for (int y = 20; y < 40; ++y)
    for (int x = 20; x < 40; ++x) worst_ea = std::max(worst_ea, lvl.energy({x, y}, {120, 0}).appearance);
  const auto e = lvl.energy({30, 30}, {120, 0});
  const bool ok = std::abs(ep - 0.0025) <= 1e-9 && std::abs(er - (1.0 - std::cos(kPi / 4))) <= 1e-9 && worst_ea == 0.0 &&
                  e.regularity == 0.0 && std::abs(e.total - p.lambda_proximity * e.proximity) <= 1e-9;
  return {ok, fmt("E_p=%.12f (0.0025) E_r=%.12f (%.12f) max E_a on identical patches=%g", ep, er,
                  1.0 - std::cos(kPi / 4), worst_ea)};
}

// Recomputes every pixel's energy before and after each pass, independently
// of the pass's own bookkeeping, over a full coarse-to-fine run.
Outcome monotonicity() {
  std::size_t violations = 0, self_reported = 0, checks = 0;
  for (int s = 0; s < 10; ++s) {
    Rng rng(900 + s);
    RgbImage img = s % 2 ? stripes(160, 128) : random_image(160, 128, rng);
    if (s % 2 == 0)
      for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 160; ++x)
          for (int c = 0; c < 3; ++c) img(x, y, c) = static_cast<std::uint8_t>((img(x, y, c) / 4) + 3 * ((x / 10 + y / 10) % 2 ? 40 : 0));
    const int x0 = 30 + static_cast<int>(uniform_index(rng, 60)), y0 = 20 + static_cast<int>(uniform_index(rng, 50));
    const auto mask = rect_mask(160, 128, x0, y0, x0 + 20 + s * 3, y0 + 18 + s * 2);
    CompletionParams p;
    p.seed = s;
    p.coarsest_max_dim = 32;
    p.linear_ordering = s % 3 != 0;
    const auto dirs = s % 4 == 0 ? OrientationSet{} : directions_deg({45, 135});

    const auto pyramid = build_pyramid(to_float(img), mask, p);
    NNField nnf;
    RgbImagef current;
    for (int li = static_cast<int>(pyramid.size()) - 1; li >= 0; --li) {
      const auto& lv = pyramid[li];
      Rng lrng(indexed_seed(p.seed, li));
      if (li == static_cast<int>(pyramid.size()) - 1) {
        current = lv.image;
        fill_from_boundary(current, lv.mask);
        nnf = random_nnf(lv.mask, lrng);
      } else {
        nnf = upsample_nnf(nnf, pyramid[li + 1].mask, lv.mask, lrng);
        RgbImagef init = lv.image;
        for (int y = 0; y < init.height(); ++y)
          for (int x = 0; x < init.width(); ++x)
            if (lv.mask(x, y))
              for (int c = 0; c < 3; ++c) init(x, y, c) = current(x / 2, y / 2, c);
        current = synthesize(init, nnf, lv.mask, p);
      }
      for (int it = 0; it < p.iterations; ++it) {
        CompletionLevel level(current, lv.mask, dirs, p);
        const auto edges = prewitt_edges(to_u8(current), lv.mask, p.edge_threshold);
        const auto q = build_priority_queue(edges, lv.mask, level.distance(), p, it);
        std::vector<double> before;
        before.reserve(q.size());
        for (const Pixel px : q) before.push_back(level.energy(px, nnf_at(nnf, px)).total);
        self_reported += patchmatch_pass(nnf, level, q, lrng).energy_increases;
        for (std::size_t i = 0; i < q.size(); ++i, ++checks)
          if (level.energy(q[i], nnf_at(nnf, q[i])).total > before[i]) ++violations;
        current = synthesize(current, nnf, lv.mask, p);
      }
    }
    self_reported += complete(img, mask, dirs, {}, p).stats.energy_increases;
  }
  return {violations == 0 && self_reported == 0,
          fmt("%zu per-pixel checks over 10 instances, %zu violations, %zu self-reported", checks, violations,
              self_reported)};
}

Outcome nnf_optimality() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string ratios;
  double worst = 0.0, mean = 0.0;
  for (int s = 0; s < 5; ++s) {
    // Noisy asphalt with slow shading and a lane line crossing the hole.
    Rng noise(100 + s);
    RgbImage img(48, 48);
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x)
        for (int c = 0; c < 3; ++c) {
          const double d = std::abs((x - 24) * std::sin(0.5236) - (y - 24) * std::cos(0.5236));
          const double v = (d < 1.5 ? 230 : 100 + 10 * std::sin(0.1 * x + 0.07 * y)) + int(noise() % 31) - 15;
          img(x, y, c) = clamp_to_u8(v);
        }
    const auto mask = rect_mask(48, 48, 19, 19, 29, 29);
    auto f = to_float(img);
    fill_from_boundary(f, mask);
    CompletionParams p;
    p.seed = s;
    const CompletionLevel level(f, mask, directions_deg({30, 120}), p);
    Rng rng(s);
    auto nnf = random_nnf(mask, rng);
    const BinaryImage edges(48, 48, 0);
    int quiet = 0;
    for (int pass = 0; pass < 300 && quiet < 10; ++pass) {
      const auto st = patchmatch_pass(nnf, level, build_priority_queue(edges, mask, level.distance(), p, pass), rng);
      quiet = st.adoptions == 0 ? quiet + 1 : 0;
    }
    double optimum = 0.0;
    for (const Pixel px : level.void_pixels()) {
      double best = std::numeric_limits<double>::infinity();
      for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
          if (!mask(x, y)) best = std::min(best, level.energy(px, Pixel{x, y} - px).total);
      optimum += best;
    }
    const double ratio = total_energy(nnf, level) / optimum;
    worst = std::max(worst, ratio);
    mean += ratio / 5;
    ratios += fmt("%s%.3f", s ? " " : "", ratio);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1.10 && secs < 120.0,
          fmt("energy / optimum per seed [%s], mean %.3f, worst %.3f (limit 1.10), %.1f s (limit 120 s)",
              ratios.c_str(), mean, worst, secs)};
}

Outcome stripes_benchmark() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto truth = stripes(512, 512);
  const auto mask = rect_mask(512, 512, 224, 224, 288, 288);
  RgbImage input = truth;
  for (int y = 224; y < 288; ++y)
    for (int x = 224; x < 288; ++x)
      for (int c = 0; c < 3; ++c) input(x, y, c) = 0;
  const auto dirs = directions_deg({45, 135});
  const auto edges = prewitt_edges(input, mask);
  int above = 0, guided_wins = 0;
  std::string g_list, u_list;
  for (int s = 0; s < 10; ++s) {
    CompletionParams guided;
    guided.seed = s;
    CompletionParams plain = guided;
    plain.directional_guidance = false;
    plain.linear_ordering = false;
    const double g = psnr(complete(input, mask, dirs, edges, guided).image, truth, &mask);
    const double u = psnr(complete(input, mask, dirs, edges, plain).image, truth, &mask);
    if (g >= 25.0) ++above;
    if (g >= u) ++guided_wins;
    g_list += fmt("%s%.1f", s ? " " : "", g);
    u_list += fmt("%s%.1f", s ? " " : "", u);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {above >= 8 && guided_wins >= 8 && secs < 300.0,
          fmt("hole PSNR guided [%s] unguided [%s]; >=25 dB on %d/10, guided>=unguided on %d/10, %.1f s (limit 300 s)",
              g_list.c_str(), u_list.c_str(), above, guided_wins, secs)};
}

Outcome direction_recovery() {
  Rng angles(4242);
  std::vector<double> thetas;
  for (int i = 0; i < 10; ++i) thetas.push_back(uniform(angles, 0.0, kPi));
  int ok = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double theta = thetas[trial % 10];
    Rng rng(7000 + trial);
    const auto dirs = ransac_directions(planted_offsets(theta, 100, 0.3, rng), trial);
    double err = kPi;
    for (const auto& d : dirs)
      if (d.detected) err = std::min(err, line_angle_difference(d.theta, theta));
    worst = std::max(worst, err);
    if (err <= rad(2.0)) ++ok;
  }
  return {ok >= 95, fmt("%d/100 trials within 2 deg (need 95), worst error %.3f deg", ok, deg(worst))};
}

Outcome prewitt_oracle() {
  int equal = 0;
  for (int s = 0; s < 20; ++s) {
    Rng rng(300 + s);
    const auto img = random_image(64, 64, rng);
    BinaryImage mask(64, 64, 0);
    if (s % 2) mask = rect_mask(64, 64, 10 + s, 12, 30 + s, 40);
    if (prewitt_edges(img, mask, 40) == brute_prewitt(img, mask, 40)) ++equal;
  }
  return {equal == 20, fmt("%d/20 random 64x64 images identical to direct convolution", equal)};
}

Outcome mask_dilation() {
  const auto m = boxes_to_mask({box(10, 10, 30, 30)}, 64, 64, 0.10);
  BinaryImage brute(64, 64, 0);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const double cx = x + 0.5, cy = y + 0.5;
      if (cx >= 9 && cx < 31 && cy >= 9 && cy < 31) brute(x, y) = 1;
    }
  const bool ok = m == brute && m == rect_mask(64, 64, 9, 9, 31, 31);
  return {ok, fmt("%zu masked pixels, brute force %zu (22x22 = 484 expected)", count_set(m), count_set(brute))};
}

Outcome flattening() {
  Rng rng(12);
  const double gsd = 0.1;
  const auto mesh = bump_mesh(20, 0.5, 5.0, 0.5, 3.6, 6.4, random_image(64, 64, rng));
  const auto proj = build_projection(ground_box(0, 0, 10, 10), gsd);
  const auto r = rasterize(mesh, proj);
  // Vehicle box around the raised vertices in pixel units, then dilated.
  const auto mask = boxes_to_mask({box(33, 33, 67, 67)}, proj.width, proj.height, 0.10);
  const auto masked = collect_masked_facets(r.facets, mask);
  FlattenOptions opt;
  opt.seed = stage_seed(1, "flatten");
  const auto res = flatten_facets(mesh, masked, r.facets, proj, opt);
  std::vector<std::uint8_t> touched(mesh.vertices.size(), 0);
  for (auto f : masked)
    for (auto v : mesh.facets[f]) touched[v] = 1;
  double worst = 0.0;
  std::size_t changed_outside = 0, raised = 0;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    worst = std::max(worst, std::abs(res.mesh.vertices[v].z - 5.0));
    if (mesh.vertices[v].z != 5.0) ++raised;
    if (!touched[v] && std::memcmp(&res.mesh.vertices[v], &mesh.vertices[v], sizeof(Vec3)) != 0) ++changed_outside;
  }
  return {worst <= 2 * gsd && changed_outside == 0 && raised > 0,
          fmt("%zu raised vertices, max |z-5| after %.4f m (limit %.2f), %zu non-masked vertices changed", raised, worst,
              2 * gsd, changed_outside)};
}

Outcome determinism() {
  TempDir tmp("roadfill_acc");
  RgbImage atlas = stripes(128, 128);
  Rng rng(8);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x)
      for (int c = 0; c < 3; ++c) atlas(x, y, c) = clamp_to_u8(atlas(x, y, c) + int(rng() % 21) - 10);
  for (int y = 50; y < 78; ++y)
    for (int x = 40; x < 90; ++x)
      for (int c = 0; c < 3; ++c) atlas(x, y, c) = 30;
  save_textured_mesh(bump_mesh(16, 0.8, 5.0, 0.5, 4.0, 8.8, atlas), tmp / "scene");
  BoxFile bf;
  bf.width = bf.height = 128;
  bf.boxes = {box(41, 51, 89, 77)};
  std::ofstream(tmp / "boxes.json") << to_json(bf).dump();

  PipelineConfig c;
  c.input = tmp / "scene";
  c.roi = {0, 0, 12.8, 12.8};
  c.gsd = 0.1;
  c.bbox_path = tmp / "boxes.json";
  c.seed = 2024;
  c.out = tmp / "a";
  run_pipeline(c);
  c.out = tmp / "b";
  run_pipeline(c);
  auto a = tree(tmp / "a"), b = tree(tmp / "b");
  std::size_t compared = 0, differ = 0;
  for (const auto& [k, v] : a) {
    if (k == "report.json" || k == "effective.cfg") continue;
    ++compared;
    if (!b.count(k) || b[k] != v) ++differ;
  }
  const bool has_mesh = a.count("mesh/grid.obj") && a.count("mesh/grid.mtl") && a.count("completed.png");
  return {differ == 0 && compared == b.size() - 2 && has_mesh,
          fmt("%zu mesh and raster files compared, %zu differ", compared, differ)};
}

Outcome metric_sanity() {
  Rng rng(1);
  const auto a = random_image(64, 48, rng);
  const double p_same = psnr(a, a);
  const double p_extreme = psnr(constant_image(64, 48, 0, 0, 0), constant_image(64, 48, 255, 255, 255));
  const double s_same = ssim(a, a);
  return {p_same == 99.0 && p_extreme == 0.0 && s_same == 1.0,
          fmt("psnr(a,a)=%.4f psnr(0,255)=%.4f ssim(a,a)=%.6f", p_same, p_extreme, s_same)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"round-trip exactness", round_trip},
      {"mapping oracle", mapping_oracle},
      {"energy terms", energy_terms},
      {"energy monotonicity", monotonicity},
      {"nnf near-optimality", nnf_optimality},
      {"structured completion quality", stripes_benchmark},
      {"direction recovery", direction_recovery},
      {"prewitt oracle", prewitt_oracle},
      {"mask dilation", mask_dilation},
      {"flattening", flattening},
      {"determinism", determinism},
      {"metric sanity", metric_sanity},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  %-30s %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
