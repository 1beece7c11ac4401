#pragma once

// Synthetic meshes, images and helpers shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "roadfill/roadfill.hpp"

namespace fixtures {

using namespace roadfill;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "roadfill") {
    namespace fs = std::filesystem;
    static int counter = 0;
    Rng rng(std::random_device{}());
    path_ = fs::temp_directory_path() / (tag + "_" + std::to_string(rng() % 1000000000) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline RgbImage random_image(int w, int h, Rng& rng) {
  RgbImage img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

inline RgbImage constant_image(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img(x, y, 0) = r;
      img(x, y, 1) = g;
      img(x, y, 2) = b;
    }
  return img;
}

// Grid of nx by ny quads covering [x0, x0 + nx*cell] x [y0, y0 + ny*cell]
// (z-up) with heights from `height`. The atlas spans the grid so that at
// gsd == cell / texels_per_cell texel centres line up with pixel centres.
inline TexturedMesh grid_mesh(int nx, int ny, double cell, const std::function<double(double, double)>& height,
                              RgbImage atlas, double x0 = 0.0, double y0 = 0.0, std::string name = "grid") {
  TexturedMesh m;
  const double ex = nx * cell, ey = ny * cell;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const double x = x0 + i * cell, y = y0 + j * cell;
      m.vertices.push_back({x, y, height(x, y)});
      m.uvs.push_back({i * cell / ex, 1.0 - j * cell / ey});
    }
  auto vid = [&](int i, int j) { return static_cast<std::uint32_t>(j * (nx + 1) + i); };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Triangle t1{vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)};
      const Triangle t2{vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)};
      m.facets.push_back(t1);
      m.facets.push_back(t2);
      m.uv_facets.push_back(t1);
      m.uv_facets.push_back(t2);
      m.facet_atlas.push_back(0);
      m.facet_atlas.push_back(0);
    }
  m.atlases.push_back({name + "_mat", std::move(atlas)});
  Tile t;
  t.name = name;
  t.facet_end = m.facets.size();
  t.vertex_end = m.vertices.size();
  t.uv_end = m.uvs.size();
  t.atlas_end = 1;
  m.tiles.push_back(t);
  return m;
}

inline double flat(double, double) { return 0.0; }

// Road plane at height `base` with the grid vertices strictly inside
// (lo, hi)^2 raised by `bump`, like a parked vehicle baked into the mesh.
inline TexturedMesh bump_mesh(int n, double cell, double base, double bump, double lo, double hi, RgbImage atlas) {
  return grid_mesh(n, n, cell,
                   [=](double x, double y) { return (x > lo && x < hi && y > lo && y < hi) ? base + bump : base; },
                   std::move(atlas));
}

// 45 degree stripes with period 16 px along x: the value depends on
// (x + y) mod 16 only, so the image is invariant under (1,-1), (16,0), (8,8).
inline RgbImage stripes(int w, int h) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int k = (x + y) % 16;
      const double s = 0.5 + 0.5 * std::sin(2.0 * kPi * k / 16.0);
      img(x, y, 0) = clamp_to_u8(40 + 180 * s);
      img(x, y, 1) = clamp_to_u8(60 + 150 * s);
      img(x, y, 2) = clamp_to_u8(90 + 100 * (1.0 - s));
    }
  return img;
}

inline BinaryImage rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
  BinaryImage m(w, h, 0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m(x, y) = 1;
  return m;
}

inline double deg(double rad) { return rad * 180.0 / kPi; }
inline double rad(double deg) { return deg * kPi / 180.0; }

inline OrientationSet directions_deg(std::initializer_list<double> d) {
  OrientationSet out;
  for (double v : d) out.push_back({rad(v), 0, true});
  return out;
}

// A 32 px lattice of cells; every glyph (three Gaussian blobs) is drawn in
// exactly two randomly chosen cells, so true matches differ by lattice
// vectors and no descriptor is ambiguous.
inline RgbImage glyph_lattice(int cells, Rng& rng) {
  const int n = cells * cells;
  RgbImage img = constant_image(cells * 32, cells * 32, 128, 128, 128);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  struct Blob {
    double x, y, s, a;
  };
  for (int g = 0; g + 1 < n; g += 2) {
    std::vector<Blob> blobs;
    for (int b = 0; b < 3; ++b)
      blobs.push_back({uniform(rng, 8, 24), uniform(rng, 8, 24), uniform(rng, 1.5, 3.5), uniform(rng, -100, 100)});
    for (int k : {order[g], order[g + 1]}) {
      const int cx = (k % cells) * 32, cy = (k / cells) * 32;
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          double v = 128;
          for (const auto& b : blobs)
            v += b.a * std::exp(-((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y)) / (2 * b.s * b.s));
          for (int c = 0; c < 3; ++c) img(cx + x, cy + y, c) = clamp_to_u8(v);
        }
    }
  }
  return img;
}

// Offsets planted on the line through the origin at `theta` (lengths 10..200,
// jitter below 1 px) mixed with a fraction of uniform outliers in a 400 px box.
inline std::vector<OffsetVec> planted_offsets(double theta, int count, double outlier_fraction, Rng& rng) {
  std::vector<OffsetVec> out;
  const int outliers = static_cast<int>(std::lround(count * outlier_fraction));
  for (int i = 0; i < count - outliers; ++i) {
    const double len = uniform(rng, 10, 200), jitter = uniform(rng, -0.5, 0.5);
    const double dx = len * std::cos(theta) - jitter * std::sin(theta);
    const double dy = len * std::sin(theta) + jitter * std::cos(theta);
    out.push_back(canonical_offset({0, 0}, {dx, dy}));
  }
  for (int i = 0; i < outliers; ++i) out.push_back(canonical_offset({0, 0}, {uniform(rng, -200, 200), uniform(rng, -200, 200)}));
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

// Direct 3x3 Prewitt convolution on BT.601 grey, no shortcuts.
inline BinaryImage brute_prewitt(const RgbImage& img, const BinaryImage& mask, int threshold) {
  const int w = img.width(), h = img.height();
  auto grey = [&](int x, int y) {
    return (299 * img(x, y, 0) + 587 * img(x, y, 1) + 114 * img(x, y, 2) + 500) / 1000;
  };
  BinaryImage e(w, h, 0);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      bool touches = false;
      long gx = 0, gy = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (!mask.empty() && mask(x + dx, y + dy)) touches = true;
          gx += dx * grey(x + dx, y + dy);
          gy += dy * grey(x + dx, y + dy);
        }
      if (!touches && std::sqrt(double(gx * gx + gy * gy)) >= threshold) e(x, y) = 1;
    }
  return e;
}

}  // namespace fixtures
