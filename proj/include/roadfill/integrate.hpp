#pragma once

// Texture integration: top-down orthographic software rasterisation of the
// ROI into a colour raster and a facet-index raster.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "roadfill/image.hpp"
#include "roadfill/mesh.hpp"

namespace roadfill {

enum class UpAxis { X, Y, Z };

inline UpAxis parse_up_axis(std::string_view s) {
  if (s == "x" || s == "X") return UpAxis::X;
  if (s == "y" || s == "Y") return UpAxis::Y;
  if (s == "z" || s == "Z") return UpAxis::Z;
  throw Error("integrate", "unknown up axis '" + std::string(s) + "'");
}

inline const char* to_string(UpAxis a) {
  switch (a) {
    case UpAxis::X: return "x";
    case UpAxis::Y: return "y";
    case UpAxis::Z: return "z";
  }
  return "z";
}

// Indices of the two ground axes followed by the up axis.
inline std::array<int, 3> axis_order(UpAxis up) {
  switch (up) {
    case UpAxis::X: return {1, 2, 0};
    case UpAxis::Y: return {0, 2, 1};
    case UpAxis::Z: return {0, 1, 2};
  }
  return {0, 1, 2};
}

struct Box3 {
  Vec3 min{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity()};
  Vec3 max{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity()};
};

inline constexpr int kMaxViewport = 16384;

using Mat4 = std::array<double, 16>;  // column-major, as GLM

inline Mat4 mat_mul(const Mat4& a, const Mat4& b) {
  Mat4 r{};
  for (int c = 0; c < 4; ++c)
    for (int row = 0; row < 4; ++row) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a[k * 4 + row] * b[c * 4 + k];
      r[c * 4 + row] = s;
    }
  return r;
}

inline std::array<double, 4> mat_apply(const Mat4& m, const std::array<double, 4>& v) {
  std::array<double, 4> r{};
  for (int row = 0; row < 4; ++row)
    r[row] = m[row] * v[0] + m[4 + row] * v[1] + m[8 + row] * v[2] + m[12 + row] * v[3];
  return r;
}

// glm::ortho(left, right, bottom, top, near, far)
inline Mat4 ortho(double l, double r, double b, double t, double n, double f) {
  Mat4 m{};
  m[0] = 2.0 / (r - l);
  m[5] = 2.0 / (t - b);
  m[10] = -2.0 / (f - n);
  m[12] = -(r + l) / (r - l);
  m[13] = -(t + b) / (t - b);
  m[14] = -(f + n) / (f - n);
  m[15] = 1.0;
  return m;
}

struct ScreenPoint {
  double x = 0.0;  // pixel units, pixel (i, j) spans [i, i+1) x [j, j+1)
  double y = 0.0;
  double height = 0.0;  // model-space up coordinate; larger is nearer the camera
};

struct ProjectionSpec {
  Mat4 projection{};
  Mat4 view{};
  int width = 0;
  int height = 0;
  double gsd = 0.0;
  Box3 roi;
  UpAxis up = UpAxis::Z;

  ScreenPoint to_screen(const Vec3& p) const {
    const auto eye = mat_apply(view, {p.x, p.y, p.z, 1.0});
    const auto clip = mat_apply(projection, eye);
    return {(clip[0] + 1.0) * 0.5 * width, (clip[1] + 1.0) * 0.5 * height, -eye[2]};
  }

  bool facet_in_roi(const Vec3& a, const Vec3& b, const Vec3& c) const {
    for (int axis = 0; axis < 3; ++axis) {
      const double lo = std::min({a[axis], b[axis], c[axis]});
      const double hi = std::max({a[axis], b[axis], c[axis]});
      if (hi < roi.min[axis] || lo > roi.max[axis]) return false;
    }
    return true;
  }
};

// Top-down view looking along -up. Pixel (0,0) sits at the ROI corner with
// minimal ground coordinates; x follows the first ground axis, y the second.
inline ProjectionSpec build_projection(const Box3& roi, double gsd, UpAxis up = UpAxis::Z) {
  if (!(gsd > 0.0)) throw Error("integrate", "gsd must be positive");
  const auto [g0, g1, u] = axis_order(up);
  const double ext0 = roi.max[g0] - roi.min[g0];
  const double ext1 = roi.max[g1] - roi.min[g1];
  if (!(ext0 > 0.0) || !(ext1 > 0.0) || !std::isfinite(ext0) || !std::isfinite(ext1))
    throw Error("integrate", "roi must have positive finite ground extent");
  if (roi.max[u] < roi.min[u]) throw Error("integrate", "roi height range is inverted");

  // The small slack keeps exact multiples such as 10 / 0.1 from rounding up.
  const double w = std::ceil(ext0 / gsd - 1e-9);
  const double h = std::ceil(ext1 / gsd - 1e-9);
  if (w > kMaxViewport || h > kMaxViewport)
    throw Error("integrate", "viewport " + std::to_string(static_cast<long long>(w)) + "x" +
                                 std::to_string(static_cast<long long>(h)) +
                                 " exceeds 16384; roi too large for gsd");

  ProjectionSpec spec;
  spec.width = std::max(1, static_cast<int>(w));
  spec.height = std::max(1, static_cast<int>(h));
  spec.gsd = gsd;
  spec.roi = roi;
  spec.up = up;

  // Eye space: x, y = ground offsets from the ROI corner, camera looks down -z.
  Mat4 view{};
  view[g0 * 4 + 0] = 1.0;
  view[g1 * 4 + 1] = 1.0;
  view[u * 4 + 2] = -1.0;
  view[12] = -roi.min[g0];
  view[13] = -roi.min[g1];
  view[15] = 1.0;
  spec.view = view;

  double near_plane = -1.0, far_plane = 1.0;
  if (std::isfinite(roi.min[u]) && std::isfinite(roi.max[u])) {
    near_plane = roi.min[u] - 1.0;
    far_plane = roi.max[u] + 1.0;
  }
  spec.projection = ortho(0.0, spec.width * gsd, 0.0, spec.height * gsd, near_plane, far_plane);
  return spec;
}

inline constexpr std::int32_t kNoFacet = -1;

struct ColorRaster {
  RgbImage rgb;
  BinaryImage valid;

  int width() const { return rgb.width(); }
  int height() const { return rgb.height(); }
};

using FacetRaster = Image<std::int32_t, 1>;

struct RasterPair {
  ColorRaster color;
  FacetRaster facets;
  std::size_t facets_in_roi = 0;
  bool empty = false;  // no facet intersects the ROI
};

// Bilinear texture lookup at a texel-centre coordinate, clamped to edge texels.
inline std::array<double, 3> sample_bilinear(const RgbImage& tex, double u, double v) {
  const int w = tex.width(), h = tex.height();
  const double fu = std::floor(u), fv = std::floor(v);
  const double au = u - fu, av = v - fv;
  const int x0 = std::clamp(static_cast<int>(fu), 0, w - 1);
  const int y0 = std::clamp(static_cast<int>(fv), 0, h - 1);
  const int x1 = std::clamp(static_cast<int>(fu) + 1, 0, w - 1);
  const int y1 = std::clamp(static_cast<int>(fv) + 1, 0, h - 1);
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double top = (1.0 - au) * tex(x0, y0, c) + au * tex(x1, y0, c);
    const double bottom = (1.0 - au) * tex(x0, y1, c) + au * tex(x1, y1, c);
    out[c] = (1.0 - av) * top + av * bottom;
  }
  return out;
}

namespace detail {

inline double edge_fn(Vec2 a, Vec2 b, Vec2 p) { return cross(b - a, p - a); }

// For triangles with positive signed area in y-down pixel space.
inline bool top_left(Vec2 a, Vec2 b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

inline bool covers(double w, bool top_left_edge) { return w > 0.0 || (w == 0.0 && top_left_edge); }

}  // namespace detail

// Facet k projected to pixel space, oriented to positive signed area.
struct ScreenTriangle {
  std::array<Vec2, 3> p;
  std::array<double, 3> height;
  std::array<int, 3> corner;  // which mesh corner each entry came from
  double area = 0.0;
};

inline ScreenTriangle project_facet(const TexturedMesh& mesh, std::size_t k, const ProjectionSpec& proj) {
  ScreenTriangle t;
  for (int c = 0; c < 3; ++c) {
    const auto s = proj.to_screen(mesh.vertices[mesh.facets[k][c]]);
    t.p[c] = {s.x, s.y};
    t.height[c] = s.height;
    t.corner[c] = c;
  }
  t.area = cross(t.p[1] - t.p[0], t.p[2] - t.p[0]);
  if (t.area < 0.0) {
    std::swap(t.p[1], t.p[2]);
    std::swap(t.height[1], t.height[2]);
    std::swap(t.corner[1], t.corner[2]);
    t.area = -t.area;
  }
  return t;
}

// Normalised barycentric weights of p relative to the oriented triangle.
inline std::array<double, 3> screen_weights(const ScreenTriangle& t, Vec2 p) {
  return {detail::edge_fn(t.p[1], t.p[2], p) / t.area, detail::edge_fn(t.p[2], t.p[0], p) / t.area,
          detail::edge_fn(t.p[0], t.p[1], p) / t.area};
}

// Rasterises every facet that intersects the ROI. The nearest facet to the
// top-down camera wins each pixel; on equal depth the lower facet index wins.
inline RasterPair rasterize(const TexturedMesh& mesh, const ProjectionSpec& proj) {
  const int W = proj.width, H = proj.height;
  RasterPair out;
  out.color.rgb = RgbImage(W, H, 0);
  out.color.valid = BinaryImage(W, H, 0);
  out.facets = FacetRaster(W, H, kNoFacet);
  std::vector<double> depth(static_cast<std::size_t>(W) * H, -std::numeric_limits<double>::infinity());

  for (std::size_t k = 0; k < mesh.facets.size(); ++k) {
    const auto& f = mesh.facets[k];
    if (!proj.facet_in_roi(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]])) continue;
    ++out.facets_in_roi;
    const ScreenTriangle t = project_facet(mesh, k, proj);
    if (!(t.area > 1e-12)) continue;

    const double min_x = std::min({t.p[0].x, t.p[1].x, t.p[2].x});
    const double max_x = std::max({t.p[0].x, t.p[1].x, t.p[2].x});
    const double min_y = std::min({t.p[0].y, t.p[1].y, t.p[2].y});
    const double max_y = std::max({t.p[0].y, t.p[1].y, t.p[2].y});
    const int x0 = std::max(0, static_cast<int>(std::floor(min_x)));
    const int x1 = std::min(W - 1, static_cast<int>(std::ceil(max_x)));
    const int y0 = std::max(0, static_cast<int>(std::floor(min_y)));
    const int y1 = std::min(H - 1, static_cast<int>(std::ceil(max_y)));
    const bool tl0 = detail::top_left(t.p[1], t.p[2]);
    const bool tl1 = detail::top_left(t.p[2], t.p[0]);
    const bool tl2 = detail::top_left(t.p[0], t.p[1]);

    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec2 c{x + 0.5, y + 0.5};
        const double w0 = detail::edge_fn(t.p[1], t.p[2], c);
        const double w1 = detail::edge_fn(t.p[2], t.p[0], c);
        const double w2 = detail::edge_fn(t.p[0], t.p[1], c);
        if (!detail::covers(w0, tl0) || !detail::covers(w1, tl1) || !detail::covers(w2, tl2)) continue;
        const double z = (w0 * t.height[0] + w1 * t.height[1] + w2 * t.height[2]) / t.area;
        auto& best = depth[static_cast<std::size_t>(y) * W + x];
        if (z > best) {
          best = z;
          out.facets(x, y) = static_cast<std::int32_t>(k);
        }
      }
    }
  }

  // Shade the surviving facet of each pixel.
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const auto k = out.facets(x, y);
      if (k == kNoFacet) continue;
      const ScreenTriangle t = project_facet(mesh, static_cast<std::size_t>(k), proj);
      const auto l = screen_weights(t, {x + 0.5, y + 0.5});
      const auto& atlas = mesh.atlases[mesh.facet_atlas[k]].image;
      Vec2 uv{};
      for (int c = 0; c < 3; ++c) {
        const Vec2 corner_uv = mesh.uvs[mesh.uv_facets[k][t.corner[c]]];
        uv = uv + l[c] * corner_uv;
      }
      const Vec2 tx = clamp_texel(uv_to_texel(uv, atlas.width(), atlas.height()), atlas.width(),
                                   atlas.height());
      const auto rgb = sample_bilinear(atlas, tx.x, tx.y);
      for (int c = 0; c < 3; ++c) out.color.rgb(x, y, c) = clamp_to_u8(rgb[c]);
      out.color.valid(x, y) = 1;
    }
  }
  out.empty = out.facets_in_roi == 0;
  return out;
}

}  // namespace roadfill
