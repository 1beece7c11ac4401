#pragma once

// Texture de-integration: per-pixel pixel->texel mapping through the facet
// raster, write-back of edited pixels into the atlases, and flattening of
// geometry under the edit mask.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "roadfill/image.hpp"
#include "roadfill/integrate.hpp"
#include "roadfill/mesh.hpp"
#include "roadfill/rng.hpp"

namespace roadfill {

inline constexpr double kDegenerateArea = 1e-12;

struct Barycentric {
  double a = 0.0, b = 0.0, c = 0.0;
};

// Closed-form barycentric coordinates of p in (t0, t1, t2).
inline Barycentric barycentric(const std::array<Vec2, 3>& tri, Vec2 p) {
  const double area = cross(tri[1] - tri[0], tri[2] - tri[0]);
  if (!(std::abs(area) > kDegenerateArea)) throw Error("remap", "degenerate triangle");
  const double a = cross(tri[1] - p, tri[2] - p) / area;
  const double b = cross(tri[2] - p, tri[0] - p) / area;
  return {a, b, 1.0 - a - b};
}

inline Vec2 interpolate(const std::array<Vec2, 3>& tri, const Barycentric& w) {
  return {w.a * tri[0].x + w.b * tri[1].x + w.c * tri[2].x, w.a * tri[0].y + w.b * tri[1].y + w.c * tri[2].y};
}

// 2x3 affine map: out = [m0 m1; m3 m4] * p + [m2; m5].
struct Affine2 {
  std::array<double, 6> m{};

  Vec2 operator()(Vec2 p) const { return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]}; }
};

// The affine map taking triangle `from` onto triangle `to` vertex by vertex.
inline std::optional<Affine2> triangle_affine(const std::array<Vec2, 3>& from, const std::array<Vec2, 3>& to) {
  const Vec2 e1 = from[1] - from[0], e2 = from[2] - from[0];
  const double det = cross(e1, e2);
  if (!(std::abs(det) > kDegenerateArea)) return std::nullopt;
  // inverse of [e1 e2]
  const double i00 = e2.y / det, i01 = -e2.x / det;
  const double i10 = -e1.y / det, i11 = e1.x / det;
  const Vec2 f1 = to[1] - to[0], f2 = to[2] - to[0];
  Affine2 a;
  a.m[0] = f1.x * i00 + f2.x * i10;
  a.m[1] = f1.x * i01 + f2.x * i11;
  a.m[3] = f1.y * i00 + f2.y * i10;
  a.m[4] = f1.y * i01 + f2.y * i11;
  a.m[2] = to[0].x - (a.m[0] * from[0].x + a.m[1] * from[0].y);
  a.m[5] = to[0].y - (a.m[3] * from[0].x + a.m[4] * from[0].y);
  return a;
}

struct TexelRecord {
  Texel texel;
  std::int32_t facet = kNoFacet;
};

struct TexelMap {
  int width = 0;
  int height = 0;
  std::vector<TexelRecord> records;
  std::size_t unmapped_pixels = 0;  // valid pixels whose facet is degenerate

  const TexelRecord* at(int x, int y) const {
    const auto& r = records[static_cast<std::size_t>(y) * width + x];
    return r.facet == kNoFacet ? nullptr : &r;
  }
};

// Screen-space and texel-space triangles of facet k, corner order matched.
inline std::array<Vec2, 3> facet_screen_triangle(const TexturedMesh& mesh, std::size_t k, const ProjectionSpec& proj) {
  std::array<Vec2, 3> out;
  for (int c = 0; c < 3; ++c) {
    const auto s = proj.to_screen(mesh.vertices[mesh.facets[k][c]]);
    out[c] = {s.x, s.y};
  }
  return out;
}

inline std::array<Vec2, 3> facet_texel_triangle(const TexturedMesh& mesh, std::size_t k) {
  const auto& atlas = mesh.atlases[mesh.facet_atlas[k]].image;
  std::array<Vec2, 3> out;
  for (int c = 0; c < 3; ++c) out[c] = uv_to_texel(mesh.uvs[mesh.uv_facets[k][c]], atlas.width(), atlas.height());
  return out;
}

// Per-facet pixel->texel affine maps, evaluated at each valid pixel centre.
inline TexelMap build_texel_map(const TexturedMesh& mesh, const FacetRaster& raster_f, const ProjectionSpec& proj) {
  TexelMap map;
  map.width = raster_f.width();
  map.height = raster_f.height();
  map.records.assign(static_cast<std::size_t>(map.width) * map.height, TexelRecord{});

  std::unordered_map<std::int32_t, std::optional<Affine2>> cache;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const auto f = raster_f(x, y);
      if (f == kNoFacet) continue;
      auto it = cache.find(f);
      if (it == cache.end()) {
        const auto from = facet_screen_triangle(mesh, static_cast<std::size_t>(f), proj);
        const auto to = facet_texel_triangle(mesh, static_cast<std::size_t>(f));
        std::optional<Affine2> affine;
        if (std::abs(cross(to[1] - to[0], to[2] - to[0])) > kDegenerateArea) affine = triangle_affine(from, to);
        it = cache.emplace(f, affine).first;
      }
      if (!it->second) {
        ++map.unmapped_pixels;
        continue;
      }
      const auto& atlas = mesh.atlases[mesh.facet_atlas[f]].image;
      const Vec2 t = clamp_texel((*it->second)({x + 0.5, y + 0.5}), atlas.width(), atlas.height());
      auto& rec = map.records[static_cast<std::size_t>(y) * map.width + x];
      rec.texel = {t.x, t.y, mesh.facet_atlas[f]};
      rec.facet = f;
    }
  }
  return map;
}

inline Pixel nearest_texel(const Texel& t) {
  return {static_cast<int>(std::floor(t.u + 0.5)), static_cast<int>(std::floor(t.v + 0.5))};
}

struct DeintegrateResult {
  TexturedMesh mesh;
  std::size_t pixels_written = 0;
  std::size_t texels_written = 0;
  std::size_t collided_texels = 0;   // texels targeted by more than one pixel
  std::size_t unmapped_pixels = 0;   // edited pixels without a texel record
};

// Writes every edited pixel to its nearest texel; colliding pixels are
// averaged. Texels no pixel targets are left untouched.
inline DeintegrateResult deintegrate(const RgbImage& edited, const BinaryImage& edit_mask, const TexelMap& tmap,
                                     const TexturedMesh& mesh) {
  if (!edited.same_size(edit_mask) || edited.width() != tmap.width || edited.height() != tmap.height)
    throw Error("remap", "deintegrate: raster dimensions differ");

  struct Accum {
    std::array<std::uint64_t, 3> sum{};
    std::uint32_t count = 0;
  };
  std::vector<std::unordered_map<std::size_t, Accum>> acc(mesh.atlases.size());

  DeintegrateResult out;
  for (int y = 0; y < edited.height(); ++y) {
    for (int x = 0; x < edited.width(); ++x) {
      if (!edit_mask(x, y)) continue;
      const auto* rec = tmap.at(x, y);
      if (!rec) {
        ++out.unmapped_pixels;
        continue;
      }
      const auto& atlas = mesh.atlases[rec->texel.atlas_id].image;
      const Pixel t = nearest_texel(rec->texel);
      const int tx = std::clamp(t.x, 0, atlas.width() - 1);
      const int ty = std::clamp(t.y, 0, atlas.height() - 1);
      auto& a = acc[rec->texel.atlas_id][static_cast<std::size_t>(ty) * atlas.width() + tx];
      for (int c = 0; c < 3; ++c) a.sum[c] += edited(x, y, c);
      ++a.count;
      ++out.pixels_written;
    }
  }

  out.mesh = mesh;
  for (std::size_t id = 0; id < acc.size(); ++id) {
    auto& img = out.mesh.atlases[id].image;
    for (const auto& [index, a] : acc[id]) {
      const int tx = static_cast<int>(index % img.width());
      const int ty = static_cast<int>(index / img.width());
      for (int c = 0; c < 3; ++c)
        img(tx, ty, c) = static_cast<std::uint8_t>((a.sum[c] + a.count / 2) / a.count);
      ++out.texels_written;
      if (a.count > 1) ++out.collided_texels;
    }
  }
  return out;
}

// Sorted, unique facet indices seen under at least one masked pixel.
inline std::vector<std::uint32_t> collect_masked_facets(const FacetRaster& raster_f, const BinaryImage& mask) {
  if (!raster_f.same_size(mask)) throw Error("remap", "collect_masked_facets: raster dimensions differ");
  std::vector<std::uint32_t> out;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y) && raster_f(x, y) != kNoFacet) out.push_back(static_cast<std::uint32_t>(raster_f(x, y)));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Height as a function of the two ground coordinates: h = a*g0 + b*g1 + c.
struct GroundPlane {
  double a = 0.0, b = 0.0, c = 0.0;

  double height(double g0, double g1) const { return a * g0 + b * g1 + c; }
  double distance(double g0, double g1, double h) const {
    return std::abs(height(g0, g1) - h) / std::sqrt(a * a + b * b + 1.0);
  }
};

namespace detail {

struct GroundPoint {
  double g0, g1, h;
};

inline std::optional<GroundPlane> plane_through(const GroundPoint& p, const GroundPoint& q, const GroundPoint& r) {
  // Solve [g0 g1 1] * (a b c)^T = h for the three points.
  const double d1x = q.g0 - p.g0, d1y = q.g1 - p.g1, d1h = q.h - p.h;
  const double d2x = r.g0 - p.g0, d2y = r.g1 - p.g1, d2h = r.h - p.h;
  const double det = d1x * d2y - d1y * d2x;
  if (std::abs(det) < 1e-12) return std::nullopt;
  GroundPlane pl;
  pl.a = (d1h * d2y - d1y * d2h) / det;
  pl.b = (d1x * d2h - d1h * d2x) / det;
  pl.c = p.h - pl.a * p.g0 - pl.b * p.g1;
  return pl;
}

inline std::optional<GroundPlane> least_squares_plane(const std::vector<GroundPoint>& pts) {
  // Normal equations, centred for conditioning.
  double m0 = 0, m1 = 0, mh = 0;
  for (const auto& p : pts) {
    m0 += p.g0;
    m1 += p.g1;
    mh += p.h;
  }
  const double n = static_cast<double>(pts.size());
  m0 /= n;
  m1 /= n;
  mh /= n;
  double s00 = 0, s01 = 0, s11 = 0, s0h = 0, s1h = 0;
  for (const auto& p : pts) {
    const double x = p.g0 - m0, y = p.g1 - m1, h = p.h - mh;
    s00 += x * x;
    s01 += x * y;
    s11 += y * y;
    s0h += x * h;
    s1h += y * h;
  }
  const double det = s00 * s11 - s01 * s01;
  if (!(std::abs(det) > 1e-12 * std::max(1.0, s00 * s11))) return std::nullopt;
  GroundPlane pl;
  pl.a = (s0h * s11 - s01 * s1h) / det;
  pl.b = (s00 * s1h - s01 * s0h) / det;
  pl.c = mh - pl.a * m0 - pl.b * m1;
  return pl;
}

}  // namespace detail

struct FlattenOptions {
  int iterations = 1000;
  double inlier_gsd_factor = 2.0;
  std::uint64_t seed = 0;
};

struct FlattenResult {
  TexturedMesh mesh;
  GroundPlane plane;
  std::size_t support_vertices = 0;
  std::size_t inliers = 0;
  std::size_t moved_vertices = 0;
};

// Fits one RANSAC ground plane to the vertices of visible, unmasked ROI
// facets and drops every vertex used only by masked facets onto it.
inline FlattenResult flatten_facets(const TexturedMesh& mesh, const std::vector<std::uint32_t>& masked,
                                    const FacetRaster& raster_f, const ProjectionSpec& proj,
                                    const FlattenOptions& opt = {}) {
  FlattenResult out;
  out.mesh = mesh;
  if (masked.empty()) return out;
  for (auto f : masked)
    if (f >= mesh.facets.size()) throw Error("remap", "masked facet index out of range");

  std::vector<std::uint8_t> is_masked(mesh.facets.size(), 0);
  for (auto f : masked) is_masked[f] = 1;

  const auto [g0, g1, up] = axis_order(proj.up);
  std::vector<std::uint8_t> support_flag(mesh.vertices.size(), 0);
  std::vector<std::uint8_t> seen(mesh.facets.size(), 0);
  for (auto f : raster_f.data()) {
    if (f == kNoFacet || seen[f]) continue;
    seen[f] = 1;
    if (is_masked[f]) continue;
    for (auto v : mesh.facets[f]) support_flag[v] = 1;
  }
  std::vector<detail::GroundPoint> support;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    if (support_flag[v]) support.push_back({mesh.vertices[v][g0], mesh.vertices[v][g1], mesh.vertices[v][up]});
  out.support_vertices = support.size();
  if (support.size() < 3) throw Error("remap", "cannot fit ground plane: fewer than 3 support vertices");

  const double threshold = opt.inlier_gsd_factor * proj.gsd;
  auto count_inliers = [&](const GroundPlane& pl) {
    std::size_t n = 0;
    for (const auto& p : support)
      if (pl.distance(p.g0, p.g1, p.h) <= threshold) ++n;
    return n;
  };

  std::optional<GroundPlane> best;
  std::size_t best_inliers = 0;
  for (int it = 0; it < opt.iterations; ++it) {
    Rng rng(indexed_seed(opt.seed, static_cast<std::uint64_t>(it)));
    const auto i = uniform_index(rng, support.size());
    const auto j = uniform_index(rng, support.size());
    const auto k = uniform_index(rng, support.size());
    if (i == j || j == k || i == k) continue;
    auto pl = detail::plane_through(support[i], support[j], support[k]);
    if (!pl) continue;
    const auto n = count_inliers(*pl);
    if (n > best_inliers) {
      best_inliers = n;
      best = pl;
    }
  }
  if (!best) {
    best = detail::least_squares_plane(support);
    if (!best) throw Error("remap", "cannot fit ground plane: support vertices are collinear");
  }
  std::vector<detail::GroundPoint> inliers;
  for (const auto& p : support)
    if (best->distance(p.g0, p.g1, p.h) <= threshold) inliers.push_back(p);
  if (inliers.size() >= 3)
    if (auto refined = detail::least_squares_plane(inliers)) best = refined;
  out.plane = *best;
  out.inliers = count_inliers(out.plane);

  std::vector<std::uint8_t> keep(mesh.vertices.size(), 0);
  for (std::size_t f = 0; f < mesh.facets.size(); ++f)
    if (!is_masked[f])
      for (auto v : mesh.facets[f]) keep[v] = 1;
  std::vector<std::uint8_t> moved(mesh.vertices.size(), 0);
  for (auto f : masked)
    for (auto v : mesh.facets[f]) {
      if (keep[v] || moved[v]) continue;
      auto& p = out.mesh.vertices[v];
      p[up] = out.plane.height(p[g0], p[g1]);
      moved[v] = 1;
      ++out.moved_vertices;
    }
  return out;
}

}  // namespace roadfill
