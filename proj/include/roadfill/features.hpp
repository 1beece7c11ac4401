#pragma once

// Keypoints and descriptors for self-matching. The default backend is a
// difference-of-Gaussians blob detector with 4x4x8 gradient-orientation
// histogram descriptors normalised to a dominant orientation.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "roadfill/image.hpp"

namespace roadfill {

using GrayImagef = Image<float, 1>;

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double scale = 0.0;   // Gaussian sigma in input pixels
  double angle = 0.0;   // dominant gradient orientation, radians
  double response = 0.0;
};

using Descriptor = std::array<float, 128>;

struct FeatureSet {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;
};

class FeatureBackend {
 public:
  virtual ~FeatureBackend() = default;
  // `exclude` marks pixels where keypoints must not be reported; may be empty.
  virtual FeatureSet detect(const GrayImagef& image, const BinaryImage& exclude) const = 0;
};

inline GrayImagef to_gray_unit(const RgbImage& rgb) {
  GrayImagef out(rgb.width(), rgb.height());
  for (int y = 0; y < rgb.height(); ++y)
    for (int x = 0; x < rgb.width(); ++x)
      out(x, y) = static_cast<float>((0.299 * rgb(x, y, 0) + 0.587 * rgb(x, y, 1) + 0.114 * rgb(x, y, 2)) / 255.0);
  return out;
}

namespace detail {

inline std::vector<float> gaussian_kernel(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

// Separable blur with clamp-to-edge borders.
inline GrayImagef gaussian_blur(const GrayImagef& in, double sigma) {
  if (sigma <= 0.0) return in;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = in.width(), h = in.height();
  GrayImagef tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int i = -r; i <= r; ++i) s += k[i + r] * in(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp(x, std::clamp(y + i, 0, h - 1));
      out(x, y) = s;
    }
  return out;
}

inline GrayImagef decimate(const GrayImagef& in) {
  GrayImagef out((in.width() + 1) / 2, (in.height() + 1) / 2);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out(x, y) = in(2 * x, 2 * y);
  return out;
}

}  // namespace detail

class DogFeatureBackend final : public FeatureBackend {
 public:
  struct Options {
    int scales_per_octave = 3;
    double base_sigma = 1.6;
    double contrast_threshold = 0.01;  // on [0,1] intensities
    double edge_ratio = 10.0;
    int min_octave_size = 16;
    std::size_t max_keypoints = 2000;
  };

  DogFeatureBackend() = default;
  explicit DogFeatureBackend(Options opt) : opt_(opt) {}

  FeatureSet detect(const GrayImagef& image, const BinaryImage& exclude) const override {
    struct Candidate {
      Keypoint kp;
      int octave;
      int level;
    };
    const int S = opt_.scales_per_octave;
    const double k = std::pow(2.0, 1.0 / S);
    std::vector<std::vector<GrayImagef>> gauss_pyr;
    std::vector<Candidate> cands;

    GrayImagef base = detail::gaussian_blur(image, std::sqrt(opt_.base_sigma * opt_.base_sigma - 0.25));
    for (int octave = 0; std::min(base.width(), base.height()) >= opt_.min_octave_size; ++octave) {
      std::vector<GrayImagef> g{base};
      for (int s = 1; s < S + 3; ++s) {
        const double prev = opt_.base_sigma * std::pow(k, s - 1);
        const double cur = opt_.base_sigma * std::pow(k, s);
        g.push_back(detail::gaussian_blur(g.back(), std::sqrt(cur * cur - prev * prev)));
      }
      std::vector<GrayImagef> dog;
      for (int s = 0; s + 1 < static_cast<int>(g.size()); ++s) {
        GrayImagef d(base.width(), base.height());
        for (std::size_t i = 0; i < d.data().size(); ++i) d.data()[i] = g[s + 1].data()[i] - g[s].data()[i];
        dog.push_back(std::move(d));
      }
      find_extrema(dog, octave, k, exclude, [&](const Keypoint& kp, int level) {
        cands.push_back({kp, octave, level});
      });
      gauss_pyr.push_back(g);
      base = detail::decimate(g[S]);
    }

    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.kp.response != b.kp.response) return a.kp.response > b.kp.response;
      if (a.kp.y != b.kp.y) return a.kp.y < b.kp.y;
      return a.kp.x < b.kp.x;
    });
    if (cands.size() > opt_.max_keypoints) cands.resize(opt_.max_keypoints);

    FeatureSet out;
    for (auto& c : cands) {
      const auto& img = gauss_pyr[c.octave][c.level];
      const double unit = std::ldexp(1.0, c.octave);
      const double ox = c.kp.x / unit, oy = c.kp.y / unit, osig = c.kp.scale / unit;
      c.kp.angle = dominant_orientation(img, ox, oy, osig);
      out.descriptors.push_back(describe(img, ox, oy, osig, c.kp.angle));
      out.keypoints.push_back(c.kp);
    }
    return out;
  }

 private:
  template <typename Emit>
  void find_extrema(const std::vector<GrayImagef>& dog, int octave, double k, const BinaryImage& exclude,
                    Emit&& emit) const {
    const int w = dog[0].width(), h = dog[0].height();
    const int border = 5;
    const double unit = std::ldexp(1.0, octave);
    for (int s = 1; s + 1 < static_cast<int>(dog.size()); ++s) {
      for (int y = border; y < h - border; ++y) {
        for (int x = border; x < w - border; ++x) {
          const float v = dog[s](x, y);
          if (std::abs(v) < opt_.contrast_threshold) continue;
          bool is_max = true, is_min = true;
          for (int ds = -1; ds <= 1 && (is_max || is_min); ++ds)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                if (ds == 0 && dx == 0 && dy == 0) continue;
                const float n = dog[s + ds](x + dx, y + dy);
                if (n >= v) is_max = false;
                if (n <= v) is_min = false;
              }
          if (!is_max && !is_min) continue;

          const auto& d = dog[s];
          const double dxx = d(x + 1, y) - 2.0 * v + d(x - 1, y);
          const double dyy = d(x, y + 1) - 2.0 * v + d(x, y - 1);
          const double dxy = 0.25 * (d(x + 1, y + 1) - d(x - 1, y + 1) - d(x + 1, y - 1) + d(x - 1, y - 1));
          const double tr = dxx + dyy, det = dxx * dyy - dxy * dxy;
          const double r = opt_.edge_ratio;
          if (det <= 0.0 || tr * tr * r >= (r + 1.0) * (r + 1.0) * det) continue;

          double sx = 0.0, sy = 0.0;
          if (std::abs(dxx) > 1e-12) sx = std::clamp(-0.5 * (d(x + 1, y) - d(x - 1, y)) / dxx, -0.5, 0.5);
          if (std::abs(dyy) > 1e-12) sy = std::clamp(-0.5 * (d(x, y + 1) - d(x, y - 1)) / dyy, -0.5, 0.5);

          Keypoint kp;
          kp.x = (x + sx) * unit;
          kp.y = (y + sy) * unit;
          kp.scale = opt_.base_sigma * std::pow(k, s) * unit;
          kp.response = std::abs(v);
          const int px = static_cast<int>(std::lround(kp.x)), py = static_cast<int>(std::lround(kp.y));
          if (!exclude.empty() && exclude.contains(px, py) && exclude(px, py)) continue;
          emit(kp, s);
        }
      }
    }
  }

  static double dominant_orientation(const GrayImagef& img, double x, double y, double sigma) {
    constexpr int kBins = 36;
    std::array<double, kBins> hist{};
    const double wsig = 1.5 * sigma;
    const int radius = static_cast<int>(std::lround(3.0 * wsig));
    const int cx = static_cast<int>(std::lround(x)), cy = static_cast<int>(std::lround(y));
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx) {
        const int px = cx + dx, py = cy + dy;
        if (px < 1 || py < 1 || px >= img.width() - 1 || py >= img.height() - 1) continue;
        const double gx = img(px + 1, py) - img(px - 1, py);
        const double gy = img(px, py + 1) - img(px, py - 1);
        const double wgt = std::exp(-(dx * dx + dy * dy) / (2.0 * wsig * wsig));
        double a = std::atan2(gy, gx);
        if (a < 0) a += 2.0 * kPi;
        const int bin = static_cast<int>(a / (2.0 * kPi) * kBins) % kBins;
        hist[bin] += wgt * std::hypot(gx, gy);
      }
    std::array<double, kBins> smooth{};
    for (int i = 0; i < kBins; ++i)
      smooth[i] = 0.25 * hist[(i + kBins - 1) % kBins] + 0.5 * hist[i] + 0.25 * hist[(i + 1) % kBins];
    const int peak = static_cast<int>(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
    const double l = smooth[(peak + kBins - 1) % kBins], c = smooth[peak], r = smooth[(peak + 1) % kBins];
    const double denom = l - 2.0 * c + r;
    const double off = std::abs(denom) > 1e-12 ? 0.5 * (l - r) / denom : 0.0;
    return (peak + 0.5 + off) * 2.0 * kPi / kBins;
  }

  static Descriptor describe(const GrayImagef& img, double x, double y, double sigma, double angle) {
    constexpr int kCells = 4, kOri = 8;
    std::array<double, kCells * kCells * kOri> hist{};
    const double cell = 3.0 * sigma;
    const int radius = static_cast<int>(std::lround(cell * (kCells + 1) * 0.5 * std::sqrt(2.0)));
    const double ca = std::cos(angle), sa = std::sin(angle);
    const int cx = static_cast<int>(std::lround(x)), cy = static_cast<int>(std::lround(y));
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx) {
        const int px = cx + dx, py = cy + dy;
        if (px < 1 || py < 1 || px >= img.width() - 1 || py >= img.height() - 1) continue;
        const double rx = (ca * dx + sa * dy) / cell;
        const double ry = (-sa * dx + ca * dy) / cell;
        const double bx = rx + kCells / 2.0 - 0.5, by = ry + kCells / 2.0 - 0.5;
        if (bx <= -1.0 || bx >= kCells || by <= -1.0 || by >= kCells) continue;
        const double gx = img(px + 1, py) - img(px - 1, py);
        const double gy = img(px, py + 1) - img(px, py - 1);
        double ori = std::atan2(gy, gx) - angle;
        while (ori < 0) ori += 2.0 * kPi;
        while (ori >= 2.0 * kPi) ori -= 2.0 * kPi;
        const double bo = ori / (2.0 * kPi) * kOri;
        const double wgt = std::exp(-(rx * rx + ry * ry) / (2.0 * (0.5 * kCells) * (0.5 * kCells))) *
                           std::hypot(gx, gy);
        const int x0 = static_cast<int>(std::floor(bx)), y0 = static_cast<int>(std::floor(by));
        const int o0 = static_cast<int>(std::floor(bo));
        const double fx = bx - x0, fy = by - y0, fo = bo - o0;
        for (int iy = 0; iy < 2; ++iy) {
          const int yy = y0 + iy;
          if (yy < 0 || yy >= kCells) continue;
          const double wy = iy ? fy : 1.0 - fy;
          for (int ix = 0; ix < 2; ++ix) {
            const int xx = x0 + ix;
            if (xx < 0 || xx >= kCells) continue;
            const double wx = ix ? fx : 1.0 - fx;
            for (int io = 0; io < 2; ++io) {
              const int oo = (o0 + io) % kOri;
              const double wo = io ? fo : 1.0 - fo;
              hist[(yy * kCells + xx) * kOri + oo] += wgt * wx * wy * wo;
            }
          }
        }
      }
    auto normalise = [&] {
      double n = 0.0;
      for (double v : hist) n += v * v;
      n = std::sqrt(n);
      if (n > 1e-12)
        for (double& v : hist) v /= n;
    };
    normalise();
    for (double& v : hist) v = std::min(v, 0.2);
    normalise();
    Descriptor d{};
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<float>(hist[i]);
    return d;
  }

  Options opt_{};
};

}  // namespace roadfill
