#pragma once

// PSNR and SSIM between a completed raster and a reference.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "roadfill/image.hpp"

namespace roadfill {

inline constexpr double kPsnrCap = 99.0;

struct QualityReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  bool mask_only = false;
};

namespace detail {

inline void check_eval_inputs(const RgbImage& a, const RgbImage& b, const BinaryImage* region) {
  if (!a.same_size(b)) throw Error("eval", "image dimensions differ");
  if (a.empty()) throw Error("eval", "empty image");
  if (region) {
    if (!region->same_size(a)) throw Error("eval", "region dimensions differ");
    if (count_set(*region) == 0) throw Error("eval", "empty evaluation region");
  }
}

inline std::vector<double> gray_unrounded(const RgbImage& img) {
  std::vector<double> g(img.pixel_count());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      g[static_cast<std::size_t>(y) * img.width() + x] =
          0.299 * img(x, y, 0) + 0.587 * img(x, y, 1) + 0.114 * img(x, y, 2);
  return g;
}

// Separable Gaussian mean with the window clipped at the borders and the
// weights renormalised over the clipped footprint.
inline std::vector<double> clipped_gaussian_mean(const std::vector<double>& in, int w, int h) {
  constexpr int r = 5;
  constexpr double sigma = 1.5;
  double k[2 * r + 1];
  for (int i = -r; i <= r; ++i) k[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  std::vector<double> tmp(in.size()), out(in.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0, ws = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx < 0 || xx >= w) continue;
        s += k[i + r] * in[static_cast<std::size_t>(y) * w + xx];
        ws += k[i + r];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = s / ws;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0, ws = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy < 0 || yy >= h) continue;
        s += k[i + r] * tmp[static_cast<std::size_t>(yy) * w + x];
        ws += k[i + r];
      }
      out[static_cast<std::size_t>(y) * w + x] = s / ws;
    }
  return out;
}

}  // namespace detail

inline double psnr(const RgbImage& a, const RgbImage& b, const BinaryImage* region = nullptr) {
  detail::check_eval_inputs(a, b, region);
  double sse = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (region && !(*region)(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = double(a(x, y, c)) - double(b(x, y, c));
        sse += d * d;
      }
      n += 3;
    }
  if (sse == 0.0) return kPsnrCap;
  const double mse = sse / static_cast<double>(n);
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

inline double ssim(const RgbImage& a, const RgbImage& b, const BinaryImage* region = nullptr) {
  detail::check_eval_inputs(a, b, region);
  const int w = a.width(), h = a.height();
  const auto ga = detail::gray_unrounded(a), gb = detail::gray_unrounded(b);
  std::vector<double> aa(ga.size()), bb(ga.size()), ab(ga.size());
  for (std::size_t i = 0; i < ga.size(); ++i) {
    aa[i] = ga[i] * ga[i];
    bb[i] = gb[i] * gb[i];
    ab[i] = ga[i] * gb[i];
  }
  const auto mu_a = detail::clipped_gaussian_mean(ga, w, h);
  const auto mu_b = detail::clipped_gaussian_mean(gb, w, h);
  const auto m_aa = detail::clipped_gaussian_mean(aa, w, h);
  const auto m_bb = detail::clipped_gaussian_mean(bb, w, h);
  const auto m_ab = detail::clipped_gaussian_mean(ab, w, h);
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0), c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (region && !(*region)(x, y)) continue;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double va = m_aa[i] - mu_a[i] * mu_a[i];
      const double vb = m_bb[i] - mu_b[i] * mu_b[i];
      const double cov = m_ab[i] - mu_a[i] * mu_b[i];
      sum += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
      ++n;
    }
  return sum / static_cast<double>(n);
}

inline QualityReport evaluate(const RgbImage& completed, const RgbImage& reference,
                              const BinaryImage* region = nullptr) {
  return {psnr(completed, reference, region), ssim(completed, reference, region), region != nullptr};
}

inline std::string csv_header() { return "dataset,method,psnr,ssim"; }

inline std::string csv_row(const std::string& dataset, const std::string& method, const QualityReport& q) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f,%.6f", q.psnr_db, q.ssim);
  return dataset + "," + method + "," + buf;
}

}  // namespace roadfill
