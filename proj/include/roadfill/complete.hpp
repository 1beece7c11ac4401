#pragma once

// Structure-aware PatchMatch completion of masked raster regions.
//
// The nearest-neighbour field maps every void pixel p to an offset v such
// that p + v is a known pixel. Offsets are refined in edge-priority order by
// neighbour propagation and by random search inside bands along the
// regularity directions; colours are re-synthesised by Gaussian patch voting
// after every pass, coarse to fine over an image pyramid.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "roadfill/image.hpp"
#include "roadfill/regularity.hpp"
#include "roadfill/rng.hpp"

namespace roadfill {

enum class SynthesisMode { kVote, kCopy };
enum class RegularityCost { kUndirected, kLiteralCosine };

inline const char* to_string(SynthesisMode m) { return m == SynthesisMode::kVote ? "vote" : "copy"; }

struct CompletionParams {
  int patch_size = 21;
  double lambda_proximity = 5e-4;
  double lambda_regularity = 0.5;
  int iterations = 5;
  int coarsest_max_dim = 64;   // stop downsampling once the image fits
  int coarsest_void_dim = 8;   // ...or once the void bounding box fits
  std::uint64_t seed = 0;
  SynthesisMode synthesis = SynthesisMode::kVote;
  RegularityCost regularity_cost = RegularityCost::kUndirected;
  bool directional_guidance = true;
  bool linear_ordering = true;
  // Random search bands centred on the current source match p + N(p)
  // rather than on p itself.
  bool search_around_match = true;
  int edge_threshold = kDefaultEdgeThreshold;

  int radius() const { return patch_size / 2; }
  double weight_sigma() const { return patch_size / 4.0; }

  void validate() const {
    if (patch_size < 3 || patch_size % 2 == 0) throw Error("complete", "patch size must be odd and >= 3");
    if (lambda_proximity < 0.0 || lambda_regularity < 0.0) throw Error("complete", "lambdas must be >= 0");
    if (iterations < 1) throw Error("complete", "iterations must be >= 1");
  }
};

using NNField = Image<int, 2>;
using DistanceRaster = Image<double, 1>;

inline Offset2i nnf_at(const NNField& nnf, Pixel p) { return {nnf(p, 0), nnf(p, 1)}; }
inline void nnf_set(NNField& nnf, Pixel p, Offset2i v) {
  nnf(p, 0) = v.x;
  nnf(p, 1) = v.y;
}

// Euclidean distance from each pixel to the nearest non-void pixel; zero on
// non-void pixels. Exact two-pass squared EDT.
inline DistanceRaster distance_to_known(const BinaryImage& mask) {
  const int w = mask.width(), h = mask.height();
  const double inf = 1e20;
  DistanceRaster out(w, h, 0.0);
  auto edt_1d = [](const std::vector<double>& f, std::vector<double>& d) {
    const int n = static_cast<int>(f.size());
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
      double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
      while (s <= z[k]) {
        --k;
        s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
      while (z[k + 1] < q) ++k;
      d[q] = double(q - v[k]) * (q - v[k]) + f[v[k]];
    }
  };
  std::vector<double> f(std::max(w, h)), d(std::max(w, h));
  DistanceRaster tmp(w, h, 0.0);
  for (int x = 0; x < w; ++x) {
    f.resize(h);
    d.resize(h);
    for (int y = 0; y < h; ++y) f[y] = mask(x, y) ? inf : 0.0;
    edt_1d(f, d);
    for (int y = 0; y < h; ++y) tmp(x, y) = d[y];
  }
  for (int y = 0; y < h; ++y) {
    f.resize(w);
    d.resize(w);
    for (int x = 0; x < w; ++x) f[x] = tmp(x, y);
    edt_1d(f, d);
    for (int x = 0; x < w; ++x) out(x, y) = std::sqrt(d[x]);
  }
  return out;
}

// --- energy terms ---------------------------------------------------------

inline double proximity_cost(Offset2i v, double sigma_d, double sigma_c) {
  return (double(v.x) * v.x + double(v.y) * v.y) / (sigma_d * sigma_d + sigma_c * sigma_c);
}

// 0 when v lies along any regularity line, 1 when perpendicular to all of
// them. The literal variant is the raw minimum cosine.
inline double regularity_cost(Offset2i v, const OrientationSet& directions,
                              RegularityCost mode = RegularityCost::kUndirected) {
  if (directions.empty() || (v.x == 0 && v.y == 0)) return 0.0;
  const double tv = std::atan2(static_cast<double>(v.y), static_cast<double>(v.x));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& d : directions) {
    const double c = std::cos(tv - d.theta);
    best = std::min(best, mode == RegularityCost::kUndirected ? 1.0 - std::abs(c) : c);
  }
  return best;
}

struct EnergyTerms {
  double total = 0.0;
  double appearance = 0.0;
  double proximity = 0.0;
  double regularity = 0.0;
};

inline std::vector<double> gaussian_patch_weights(int patch_size, double sigma) {
  const int r = patch_size / 2;
  std::vector<double> w(static_cast<std::size_t>(patch_size) * patch_size);
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      w[(dy + r) * patch_size + (dx + r)] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
  return w;
}

// State of one pyramid level: current colours, void mask, distances and the
// regularity directions.
class CompletionLevel {
 public:
  CompletionLevel(RgbImagef image, BinaryImage mask, OrientationSet directions, const CompletionParams& params)
      : image_(std::move(image)),
        mask_(std::move(mask)),
        dist_(distance_to_known(mask_)),
        directions_(std::move(directions)),
        params_(params),
        weights_(gaussian_patch_weights(params.patch_size, params.weight_sigma())),
        sigma_c_(std::max(image_.width(), image_.height()) / 8.0) {
    if (!image_.same_size(mask_)) throw Error("complete", "image and mask sizes differ");
    for (int y = 0; y < mask_.height(); ++y)
      for (int x = 0; x < mask_.width(); ++x)
        if (mask_(x, y)) void_pixels_.push_back({x, y});
  }

  int width() const { return image_.width(); }
  int height() const { return image_.height(); }
  const RgbImagef& image() const { return image_; }
  RgbImagef& image() { return image_; }
  const BinaryImage& mask() const { return mask_; }
  const DistanceRaster& distance() const { return dist_; }
  const OrientationSet& directions() const { return directions_; }
  const CompletionParams& params() const { return params_; }
  const std::vector<Pixel>& void_pixels() const { return void_pixels_; }
  double sigma_c() const { return sigma_c_; }

  bool is_void(Pixel p) const { return mask_(p) != 0; }
  bool known(Pixel p) const { return mask_.contains(p) && !mask_(p); }
  // NNF invariant: the source centre is inside the image and not void.
  bool valid_offset(Pixel p, Offset2i v) const { return known(p + v); }

  double appearance(Pixel p, Offset2i v) const {
    const int r = params_.radius(), size = params_.patch_size;
    const int w = width(), h = height();
    // Footprint where both patches are inside the image.
    const int x0 = std::max({-r, -p.x, -(p.x + v.x)});
    const int x1 = std::min({r, w - 1 - p.x, w - 1 - (p.x + v.x)});
    const int y0 = std::max({-r, -p.y, -(p.y + v.y)});
    const int y1 = std::min({r, h - 1 - p.y, h - 1 - (p.y + v.y)});
    double sum = 0.0, wsum = 0.0;
    const float* data = image_.data().data();
    for (int dy = y0; dy <= y1; ++dy) {
      const float* trow = data + image_.index(p.x, p.y + dy);
      const float* srow = data + image_.index(p.x + v.x, p.y + v.y + dy);
      const double* wrow = weights_.data() + static_cast<std::size_t>(dy + r) * size + r;
      for (int dx = x0; dx <= x1; ++dx) {
        const float* t = trow + 3 * dx;
        const float* s = srow + 3 * dx;
        const double d = std::abs(t[0] - s[0]) + std::abs(t[1] - s[1]) + std::abs(t[2] - s[2]);
        sum += wrow[dx] * d;
        wsum += wrow[dx];
      }
    }
    return wsum > 0.0 ? sum / wsum : 0.0;
  }

  EnergyTerms energy(Pixel p, Offset2i v) const {
    EnergyTerms e;
    e.appearance = appearance(p, v);
    e.proximity = proximity_cost(v, dist_(p), sigma_c_);
    e.regularity = regularity_cost(v, directions_, params_.regularity_cost);
    e.total = e.appearance + params_.lambda_proximity * e.proximity + params_.lambda_regularity * e.regularity;
    return e;
  }

 private:
  RgbImagef image_;
  BinaryImage mask_;
  DistanceRaster dist_;
  OrientationSet directions_;
  CompletionParams params_;
  std::vector<double> weights_;
  double sigma_c_;
  std::vector<Pixel> void_pixels_;
};

// --- ordering -------------------------------------------------------------

// Void pixels ordered by the edge count in their W x W window (descending),
// then by distance to the known region, then row-major. Without linear
// ordering, scanline order that reverses on every second iteration.
inline std::vector<Pixel> build_priority_queue(const BinaryImage& edges, const BinaryImage& mask,
                                               const DistanceRaster& dist, const CompletionParams& params,
                                               int iteration = 0) {
  if (!edges.same_size(mask) || !dist.same_size(mask)) throw Error("complete", "priority queue: size mismatch");
  std::vector<Pixel> q;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y)) q.push_back({x, y});
  if (!params.linear_ordering) {
    if (iteration % 2 == 1) std::reverse(q.begin(), q.end());
    return q;
  }

  const int w = mask.width(), h = mask.height(), r = params.radius();
  std::vector<long> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      sat[(y + 1) * (w + 1) + (x + 1)] =
          (edges(x, y) ? 1 : 0) + sat[y * (w + 1) + (x + 1)] + sat[(y + 1) * (w + 1) + x] - sat[y * (w + 1) + x];
  auto window = [&](Pixel p) {
    const int x0 = std::max(0, p.x - r), x1 = std::min(w, p.x + r + 1);
    const int y0 = std::max(0, p.y - r), y1 = std::min(h, p.y + r + 1);
    return sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0] + sat[y0 * (w + 1) + x0];
  };
  std::vector<long> score(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) score[i] = window(q[i]);
  std::vector<std::size_t> order(q.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    const double da = dist(q[a]), db = dist(q[b]);
    if (da != db) return da < db;
    return q[a] < q[b];
  });
  std::vector<Pixel> out;
  out.reserve(q.size());
  for (auto i : order) out.push_back(q[i]);
  return out;
}

// --- random search --------------------------------------------------------

// Raw samples, one per radius tier r = 1, 2, ... while max(w,h) * 2^-r >= 1.
// Guided samples fall in a band 2W wide and 2 * radius long centred at
// `centre` along a direction drawn from `directions`; otherwise the angle
// is uniform on [0, 2pi) and the distance uniform on [0, radius].
inline std::vector<Pixel> sample_random_candidates(Pixel centre, const OrientationSet& directions, int width, int height,
                                                   const CompletionParams& params, Rng& rng) {
  std::vector<Pixel> out;
  const bool guided = params.directional_guidance && !directions.empty();
  const double half_band = params.patch_size;
  for (int r = 1;; ++r) {
    const double radius = std::max(width, height) * std::ldexp(1.0, -r);
    if (radius < 1.0) break;
    double ox, oy;
    if (guided) {
      const double theta = directions[uniform_index(rng, directions.size())].theta;
      const double along = uniform(rng, -radius, radius);
      const double across = uniform(rng, -half_band, half_band);
      ox = along * std::cos(theta) - across * std::sin(theta);
      oy = along * std::sin(theta) + across * std::cos(theta);
    } else {
      const double phi = uniform(rng, 0.0, 2.0 * kPi);
      const double dist = uniform(rng, 0.0, radius);
      ox = dist * std::cos(phi);
      oy = dist * std::sin(phi);
    }
    out.push_back({centre.x + static_cast<int>(std::lround(ox)), centre.y + static_cast<int>(std::lround(oy))});
  }
  return out;
}

// Samples that land outside the image or inside the void are dropped.
inline std::vector<Pixel> guided_random_candidates(Pixel centre, const OrientationSet& directions,
                                                   const BinaryImage& mask, const CompletionParams& params, Rng& rng) {
  auto raw = sample_random_candidates(centre, directions, mask.width(), mask.height(), params, rng);
  std::erase_if(raw, [&](Pixel c) { return !mask.contains(c) || mask(c); });
  return raw;
}

// --- NNF ------------------------------------------------------------------

inline Offset2i nearest_known_offset(const BinaryImage& mask, Pixel p) {
  const int maxr = std::max(mask.width(), mask.height());
  for (int r = 1; r <= maxr; ++r) {
    Offset2i best{0, 0};
    long best_d = std::numeric_limits<long>::max();
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
        const Pixel q{p.x + dx, p.y + dy};
        if (!mask.contains(q) || mask(q)) continue;
        const long d = long(dx) * dx + long(dy) * dy;
        if (d < best_d) {
          best_d = d;
          best = {dx, dy};
        }
      }
    if (best_d != std::numeric_limits<long>::max()) return best;
  }
  throw Error("complete", "mask has no known pixels");
}

inline Offset2i random_valid_offset(const BinaryImage& mask, Pixel p, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    const Pixel q{static_cast<int>(uniform_index(rng, mask.width())),
                  static_cast<int>(uniform_index(rng, mask.height()))};
    if (!mask(q)) return q - p;
  }
  return nearest_known_offset(mask, p);
}

inline NNField random_nnf(const BinaryImage& mask, Rng& rng) {
  NNField nnf(mask.width(), mask.height(), 0);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y)) nnf_set(nnf, {x, y}, random_valid_offset(mask, {x, y}, rng));
  return nnf;
}

inline bool nnf_valid(const NNField& nnf, const BinaryImage& mask) {
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      const Pixel s = Pixel{x, y} + nnf_at(nnf, {x, y});
      if (!mask.contains(s) || mask(s)) return false;
    }
  return true;
}

struct PassStats {
  std::size_t pixels = 0;
  std::size_t adoptions = 0;
  std::size_t rejected_invalid = 0;
  std::size_t energy_increases = 0;  // must stay zero
  double energy_before = 0.0;
  double energy_after = 0.0;
};

// One refinement sweep over the queue: neighbour propagation over N4 then
// guided random search, adopting only strict energy improvements. Candidate
// c proposes the offset c - p.
inline PassStats patchmatch_pass(NNField& nnf, const CompletionLevel& level, const std::vector<Pixel>& queue,
                                 Rng& rng) {
  PassStats st;
  const auto& mask = level.mask();
  static constexpr std::array<Pixel, 4> kN4{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
  for (const Pixel p : queue) {
    ++st.pixels;
    Offset2i best_v = nnf_at(nnf, p);
    double best = level.energy(p, best_v).total;
    const double start = best;
    auto consider = [&](Offset2i v) {
      if (v == best_v) return;
      if (!level.valid_offset(p, v)) {
        ++st.rejected_invalid;
        return;
      }
      const double e = level.energy(p, v).total;
      if (e < best) {
        best = e;
        best_v = v;
        ++st.adoptions;
      }
    };
    for (const auto d : kN4) {
      const Pixel q = p + d;
      if (mask.contains(q) && mask(q)) consider(nnf_at(nnf, q));
    }
    const Pixel centre = level.params().search_around_match ? p + best_v : p;
    for (const Pixel c : guided_random_candidates(centre, level.directions(), mask, level.params(), rng))
      consider(c - p);
    if (best > start) ++st.energy_increases;
    nnf_set(nnf, p, best_v);
    st.energy_before += start;
    st.energy_after += best;
  }
  return st;
}

inline double total_energy(const NNField& nnf, const CompletionLevel& level) {
  double s = 0.0;
  for (const Pixel p : level.void_pixels()) s += level.energy(p, nnf_at(nnf, p)).total;
  return s;
}

// New colours for the void pixels; known pixels are copied through.
inline RgbImagef synthesize(const RgbImagef& image, const NNField& nnf, const BinaryImage& mask,
                            const CompletionParams& params) {
  RgbImagef out = image;
  const int r = params.radius();
  const auto weights = gaussian_patch_weights(params.patch_size, params.weight_sigma());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      const Pixel p{x, y};
      std::array<double, 3> acc{};
      double wsum = 0.0;
      if (params.synthesis == SynthesisMode::kVote) {
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const Pixel q{x + dx, y + dy};
            if (!mask.contains(q) || !mask(q)) continue;
            const Pixel s = p + nnf_at(nnf, q);
            if (!mask.contains(s) || mask(s)) continue;
            const double wt = weights[(r - dy) * params.patch_size + (r - dx)];
            for (int c = 0; c < 3; ++c) acc[c] += wt * image(s, c);
            wsum += wt;
          }
      }
      if (wsum > 0.0) {
        for (int c = 0; c < 3; ++c) out(p, c) = static_cast<float>(acc[c] / wsum);
      } else {
        const Pixel s = p + nnf_at(nnf, p);
        for (int c = 0; c < 3; ++c) out(p, c) = image(s, c);
      }
    }
  }
  return out;
}

// --- pyramid --------------------------------------------------------------

struct PyramidLevel {
  RgbImagef image;
  BinaryImage mask;
};

// Box downsample by two; a coarse pixel is void iff any child is void and
// known coarse pixels average their (all known) children.
inline PyramidLevel downsample(const PyramidLevel& fine) {
  const int w = (fine.image.width() + 1) / 2, h = (fine.image.height() + 1) / 2;
  PyramidLevel c{RgbImagef(w, h, 0.0f), BinaryImage(w, h, 0)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::array<double, 3> acc{};
      int n = 0;
      bool any_void = false;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const int fx = 2 * x + dx, fy = 2 * y + dy;
          if (!fine.image.contains(fx, fy)) continue;
          if (fine.mask(fx, fy)) {
            any_void = true;
            continue;
          }
          for (int ch = 0; ch < 3; ++ch) acc[ch] += fine.image(fx, fy, ch);
          ++n;
        }
      c.mask(x, y) = any_void ? 1 : 0;
      if (n > 0)
        for (int ch = 0; ch < 3; ++ch) c.image(x, y, ch) = static_cast<float>(acc[ch] / n);
    }
  return c;
}

inline std::array<int, 2> void_extent(const BinaryImage& mask) {
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y)) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return {0, 0};
  return {x1 - x0 + 1, y1 - y0 + 1};
}

inline std::vector<PyramidLevel> build_pyramid(const RgbImagef& image, const BinaryImage& mask,
                                               const CompletionParams& params) {
  std::vector<PyramidLevel> levels{{image, mask}};
  while (true) {
    const auto& cur = levels.back();
    const auto ext = void_extent(cur.mask);
    if (std::max(cur.image.width(), cur.image.height()) <= params.coarsest_max_dim) break;
    if (std::max(ext[0], ext[1]) <= params.coarsest_void_dim) break;
    auto next = downsample(cur);
    if (count_set(next.mask) == next.mask.pixel_count()) break;
    levels.push_back(std::move(next));
  }
  return levels;
}

// Inverse-square-distance blend of the known pixels bordering the void.
inline void fill_from_boundary(RgbImagef& image, const BinaryImage& mask) {
  std::vector<Pixel> boundary;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(x, y)) continue;
      for (Pixel d : {Pixel{-1, 0}, Pixel{1, 0}, Pixel{0, -1}, Pixel{0, 1}}) {
        const Pixel q{x + d.x, y + d.y};
        if (mask.contains(q) && mask(q)) {
          boundary.push_back({x, y});
          break;
        }
      }
    }
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      std::array<double, 3> acc{};
      double wsum = 0.0;
      for (const Pixel b : boundary) {
        const double d2 = double(b.x - x) * (b.x - x) + double(b.y - y) * (b.y - y);
        const double wt = 1.0 / d2;
        for (int c = 0; c < 3; ++c) acc[c] += wt * image(b, c);
        wsum += wt;
      }
      for (int c = 0; c < 3; ++c) image(x, y, c) = wsum > 0.0 ? static_cast<float>(acc[c] / wsum) : 0.0f;
    }
}

// Coarse offsets doubled onto the children; invalid ones are re-drawn.
inline NNField upsample_nnf(const NNField& coarse, const BinaryImage& coarse_mask, const BinaryImage& fine_mask,
                            Rng& rng) {
  NNField fine(fine_mask.width(), fine_mask.height(), 0);
  for (int y = 0; y < fine_mask.height(); ++y)
    for (int x = 0; x < fine_mask.width(); ++x) {
      if (!fine_mask(x, y)) continue;
      const Pixel parent{x / 2, y / 2};
      Offset2i v{0, 0};
      bool ok = false;
      if (coarse_mask.contains(parent) && coarse_mask(parent)) {
        const auto cv = nnf_at(coarse, parent);
        v = {2 * cv.x, 2 * cv.y};
        const Pixel s = Pixel{x, y} + v;
        ok = fine_mask.contains(s) && !fine_mask(s);
      }
      if (!ok) v = random_valid_offset(fine_mask, {x, y}, rng);
      nnf_set(fine, {x, y}, v);
    }
  return fine;
}

struct LevelSnapshot {
  int level = 0;       // 0 is the finest
  int iteration = 0;   // -1 for the state right after initialisation
  const RgbImagef* image = nullptr;
  const NNField* nnf = nullptr;
  const BinaryImage* mask = nullptr;
};

struct CompletionStats {
  int levels = 0;
  std::size_t passes = 0;
  std::size_t adoptions = 0;
  std::size_t energy_increases = 0;
  std::size_t void_pixels = 0;
  double final_energy = 0.0;
};

struct CompletionResult {
  RgbImage image;
  NNField nnf;  // finest level
  CompletionStats stats;
};

using SnapshotCallback = std::function<void(const LevelSnapshot&)>;

// Completes the void pixels of `raster`. Known pixels are returned
// bit-identical. `edges` (optional) replaces the recomputed edge map at the
// finest level.
inline CompletionResult complete(const RgbImage& raster, const BinaryImage& mask, const OrientationSet& directions,
                                 const BinaryImage& edges, const CompletionParams& params,
                                 const SnapshotCallback& on_snapshot = {}) {
  params.validate();
  if (!raster.same_size(mask)) throw Error("complete", "raster and mask sizes differ");
  if (!edges.empty() && !edges.same_size(mask)) throw Error("complete", "edge map size differs");
  CompletionResult result;
  result.image = raster;
  result.stats.void_pixels = count_set(mask);
  if (result.stats.void_pixels == 0) {
    result.nnf = NNField(mask.width(), mask.height(), 0);
    return result;
  }
  if (result.stats.void_pixels == mask.pixel_count()) throw Error("complete", "mask has no known pixels");

  const auto pyramid = build_pyramid(to_float(raster), mask, params);
  result.stats.levels = static_cast<int>(pyramid.size());

  NNField nnf;
  RgbImagef current;
  for (int li = static_cast<int>(pyramid.size()) - 1; li >= 0; --li) {
    const auto& lvl = pyramid[li];
    Rng rng(indexed_seed(params.seed, static_cast<std::uint64_t>(li)));
    if (li == static_cast<int>(pyramid.size()) - 1) {
      current = lvl.image;
      fill_from_boundary(current, lvl.mask);
      nnf = random_nnf(lvl.mask, rng);
    } else {
      nnf = upsample_nnf(nnf, pyramid[li + 1].mask, lvl.mask, rng);
      // Void colours start from the previous level's synthesis, upsampled.
      RgbImagef init = lvl.image;
      for (int y = 0; y < init.height(); ++y)
        for (int x = 0; x < init.width(); ++x)
          if (lvl.mask(x, y))
            for (int c = 0; c < 3; ++c) init(x, y, c) = current(x / 2, y / 2, c);
      current = synthesize(init, nnf, lvl.mask, params);
    }

    CompletionLevel level(current, lvl.mask, directions, params);
    const BinaryImage level_edges =
        (li == 0 && !edges.empty()) ? edges : prewitt_edges(to_u8(level.image()), lvl.mask, params.edge_threshold);
    if (on_snapshot) on_snapshot({li, -1, &level.image(), &nnf, &lvl.mask});

    for (int it = 0; it < params.iterations; ++it) {
      const auto queue = build_priority_queue(level_edges, lvl.mask, level.distance(), params, it);
      const auto st = patchmatch_pass(nnf, level, queue, rng);
      ++result.stats.passes;
      result.stats.adoptions += st.adoptions;
      result.stats.energy_increases += st.energy_increases;
      level.image() = synthesize(level.image(), nnf, lvl.mask, params);
      if (on_snapshot) on_snapshot({li, it, &level.image(), &nnf, &lvl.mask});
    }
    if (li == 0) result.stats.final_energy = total_energy(nnf, level);
    current = level.image();
  }

  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y))
        for (int c = 0; c < 3; ++c) result.image(x, y, c) = clamp_to_u8(current(x, y, c));
  result.nnf = std::move(nnf);
  return result;
}

}  // namespace roadfill
