#pragma once

// Guidance signals for completion: translational-regularity directions
// estimated from self-match offsets, and a binary Prewitt edge map.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "roadfill/features.hpp"
#include "roadfill/image.hpp"
#include "roadfill/rng.hpp"

namespace roadfill {

struct RegularityOptions {
  double ratio_threshold = 0.8;
  double min_offset_length = 8.0;
  std::size_t min_matches = 20;
  int ransac_iterations = 1000;
  double inlier_distance = 5.0;
  double acceptance_ratio = 0.25;
  int max_lines = 2;
  double min_separation_deg = 10.0;
};

struct FeatureMatch {
  Vec2 p1;
  Vec2 p2;
  double ratio = 0.0;  // best / second-best descriptor distance
};

struct OffsetVec {
  double dx = 0.0;
  double dy = 0.0;
};

// Offsets live in a half-plane: dy > 0, or dy == 0 and dx > 0.
inline OffsetVec canonical_offset(Vec2 p1, Vec2 p2) {
  OffsetVec o{p2.x - p1.x, p2.y - p1.y};
  if (o.dy < 0.0 || (o.dy == 0.0 && o.dx < 0.0)) o = {-o.dx, -o.dy};
  return o;
}

struct Orientation {
  double theta = 0.0;  // undirected line angle in [0, pi)
  std::size_t inliers = 0;
  bool detected = true;  // false for appended orthogonals
};

using OrientationSet = std::vector<Orientation>;

inline double wrap_pi(double a) {
  a = std::fmod(a, kPi);
  if (a < 0.0) a += kPi;
  if (a >= kPi) a -= kPi;
  return a;
}

// Smallest angle between two undirected lines.
inline double line_angle_difference(double a, double b) {
  const double d = std::abs(wrap_pi(a) - wrap_pi(b));
  return std::min(d, kPi - d);
}

struct MatchResult {
  std::vector<FeatureMatch> matches;
  std::size_t keypoints = 0;
  bool sufficient = false;  // at least `min_matches` matches
};

// Self-matching with Lowe's ratio test and no geometric verification.
// Partners closer than the minimum offset length are not considered, so a
// keypoint cannot pair with itself or a duplicate detection at another scale.
inline MatchResult detect_and_match(const RgbImage& raster, const BinaryImage& mask, const FeatureBackend& backend,
                                    const RegularityOptions& opt = {}) {
  const auto features = backend.detect(to_gray_unit(raster), mask);
  const auto& kps = features.keypoints;
  const auto& desc = features.descriptors;
  MatchResult out;
  out.keypoints = kps.size();

  auto dist2 = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t i = 0; i < desc[a].size(); ++i) {
      const double d = static_cast<double>(desc[a][i]) - desc[b][i];
      s += d * d;
    }
    return s;
  };

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const double min_len2 = opt.min_offset_length * opt.min_offset_length;
  for (std::size_t i = 0; i < kps.size(); ++i) {
    double best = std::numeric_limits<double>::infinity(), second = best;
    std::size_t best_j = i;
    for (std::size_t j = 0; j < kps.size(); ++j) {
      const double ddx = kps[j].x - kps[i].x, ddy = kps[j].y - kps[i].y;
      if (j == i || ddx * ddx + ddy * ddy < min_len2) continue;
      const double d = dist2(i, j);
      if (d < best) {
        second = best;
        best = d;
        best_j = j;
      } else if (d < second) {
        second = d;
      }
    }
    if (best_j == i || !std::isfinite(second) || second <= 0.0) continue;
    const double ratio = std::sqrt(best / second);
    if (ratio >= opt.ratio_threshold) continue;
    const auto key = std::minmax(i, best_j);
    if (std::find(pairs.begin(), pairs.end(), std::pair{key.first, key.second}) != pairs.end()) continue;
    pairs.emplace_back(key.first, key.second);
    out.matches.push_back({{kps[i].x, kps[i].y}, {kps[best_j].x, kps[best_j].y}, ratio});
  }
  out.sufficient = out.matches.size() >= opt.min_matches;
  return out;
}

inline std::vector<OffsetVec> match_offsets(const std::vector<FeatureMatch>& matches, const RegularityOptions& opt = {}) {
  std::vector<OffsetVec> out;
  for (const auto& m : matches) {
    const auto o = canonical_offset(m.p1, m.p2);
    if (std::hypot(o.dx, o.dy) >= opt.min_offset_length) out.push_back(o);
  }
  return out;
}

namespace detail {

inline double line_distance(const OffsetVec& o, double theta) {
  return std::abs(-std::sin(theta) * o.dx + std::cos(theta) * o.dy);
}

// Principal direction of points about the origin (total least squares).
inline double principal_direction(const std::vector<OffsetVec>& pts) {
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : pts) {
    sxx += p.dx * p.dx;
    sxy += p.dx * p.dy;
    syy += p.dy * p.dy;
  }
  return wrap_pi(0.5 * std::atan2(2.0 * sxy, sxx - syy));
}

}  // namespace detail

// Sequential RANSAC for up to `max_lines` lines through the origin of offset
// space, each closed under its orthogonal direction.
inline OrientationSet ransac_directions(const std::vector<OffsetVec>& offsets, std::uint64_t seed,
                                        const RegularityOptions& opt = {}) {
  if (offsets.size() < opt.min_matches)
    throw Error("regularity", "ransac_directions needs at least " + std::to_string(opt.min_matches) +
                                  " offsets, got " + std::to_string(offsets.size()));
  OrientationSet detected;
  std::vector<OffsetVec> remaining = offsets;
  for (int line = 0; line < opt.max_lines && remaining.size() >= 2; ++line) {
    std::size_t best_count = 0;
    double best_theta = 0.0;
    for (int it = 0; it < opt.ransac_iterations; ++it) {
      Rng rng(indexed_seed(seed, static_cast<std::uint64_t>(line) * 1000003ULL + it));
      const auto& s = remaining[uniform_index(rng, remaining.size())];
      const double theta = wrap_pi(std::atan2(s.dy, s.dx));
      std::size_t n = 0;
      for (const auto& o : remaining)
        if (detail::line_distance(o, theta) <= opt.inlier_distance) ++n;
      if (n > best_count) {
        best_count = n;
        best_theta = theta;
      }
    }
    if (static_cast<double>(best_count) < opt.acceptance_ratio * static_cast<double>(remaining.size())) break;

    std::vector<OffsetVec> inliers, rest;
    for (const auto& o : remaining)
      (detail::line_distance(o, best_theta) <= opt.inlier_distance ? inliers : rest).push_back(o);
    double theta = detail::principal_direction(inliers);
    // Keep the refined fit only if it does not lose support.
    std::size_t refined = 0;
    for (const auto& o : remaining)
      if (detail::line_distance(o, theta) <= opt.inlier_distance) ++refined;
    if (refined < inliers.size()) theta = best_theta;
    detected.push_back({theta, inliers.size(), true});
    remaining = std::move(rest);
  }

  OrientationSet out;
  const double min_sep = opt.min_separation_deg * kPi / 180.0;
  auto add = [&](const Orientation& o) {
    for (const auto& e : out)
      if (line_angle_difference(e.theta, o.theta) < min_sep) return;
    out.push_back(o);
  };
  for (const auto& d : detected) add(d);
  for (const auto& d : detected) {
    Orientation ortho{wrap_pi(d.theta + 0.5 * kPi), 0, false};
    for (const auto& o : offsets)
      if (detail::line_distance(o, ortho.theta) <= opt.inlier_distance) ++ortho.inliers;
    add(ortho);
  }
  return out;
}

inline constexpr int kDefaultEdgeThreshold = 40;

// Binary Prewitt edges on BT.601 grey. Border pixels and pixels whose 3x3
// support touches the void mask are never edges.
inline BinaryImage prewitt_edges(const RgbImage& raster, const BinaryImage& mask,
                                 int threshold = kDefaultEdgeThreshold) {
  const int w = raster.width(), h = raster.height();
  if (!mask.empty() && !mask.same_size(raster)) throw Error("regularity", "prewitt_edges: mask size differs");
  const GrayImage gray = to_gray(raster);
  BinaryImage edges(w, h, 0);
  if (w < 3 || h < 3) return edges;

  // Column sums (for gx) and row sums (for gy) of the 3-tap box.
  Image<int, 1> vsum(w, h, 0), hsum(w, h, 0);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 0; x < w; ++x) vsum(x, y) = gray(x, y - 1) + gray(x, y) + gray(x, y + 1);
  for (int y = 0; y < h; ++y)
    for (int x = 1; x < w - 1; ++x) hsum(x, y) = gray(x - 1, y) + gray(x, y) + gray(x + 1, y);

  Image<std::uint8_t, 1> near_void(w, h, 0);
  if (!mask.empty())
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!mask(x, y)) continue;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            if (near_void.contains(x + dx, y + dy)) near_void(x + dx, y + dy) = 1;
      }

  const long t2 = static_cast<long>(threshold) * threshold;
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      if (near_void(x, y)) continue;
      const long gx = vsum(x + 1, y) - vsum(x - 1, y);
      const long gy = hsum(x, y + 1) - hsum(x, y - 1);
      if (gx * gx + gy * gy >= t2) edges(x, y) = 1;
    }
  return edges;
}

enum class RegularityStatus { kOk, kInsufficientEvidence, kNoConsensus };

inline const char* to_string(RegularityStatus s) {
  switch (s) {
    case RegularityStatus::kOk: return "ok";
    case RegularityStatus::kInsufficientEvidence: return "insufficient regularity evidence";
    case RegularityStatus::kNoConsensus: return "no line reached the inlier threshold";
  }
  return "?";
}

struct RegularityResult {
  RegularityStatus status = RegularityStatus::kInsufficientEvidence;
  std::size_t keypoints = 0;
  std::vector<FeatureMatch> matches;
  std::vector<OffsetVec> offsets;
  OrientationSet directions;
};

// Matches, offsets and directions in one call. Too little evidence yields an
// empty direction set rather than an error.
inline RegularityResult extract_regularities(const RgbImage& raster, const BinaryImage& mask,
                                             const FeatureBackend& backend, std::uint64_t seed,
                                             const RegularityOptions& opt = {}) {
  RegularityResult out;
  auto m = detect_and_match(raster, mask, backend, opt);
  out.keypoints = m.keypoints;
  out.matches = std::move(m.matches);
  out.offsets = match_offsets(out.matches, opt);
  if (!m.sufficient || out.offsets.size() < opt.min_matches) {
    out.status = RegularityStatus::kInsufficientEvidence;
    return out;
  }
  out.directions = ransac_directions(out.offsets, seed, opt);
  out.status = out.directions.empty() ? RegularityStatus::kNoConsensus : RegularityStatus::kOk;
  return out;
}

}  // namespace roadfill
