#include "hyperking/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "hyperking/parallel.hpp"

namespace hyperking::metrics {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void require_same_shape(const hsi::HyperCube& a, const hsi::HyperCube& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> w{};
  double total = 0.0;
  for (int k = 0; k < kWindow; ++k) {
    const double d = k - kWindow / 2;
    total += (w[k] = std::exp(-d * d / (2.0 * kSigma * kSigma)));
  }
  for (auto& v : w) v /= total;
  return w;
}

// Valid-region separable filtering of one plane.
std::vector<double> filter_valid(const double* plane, std::size_t h, std::size_t w,
                                 const std::array<double, kWindow>& g) {
  const std::size_t ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> rows(h * ow), out(oh * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * plane[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

double band_ssim(const double* a, const double* b, std::size_t h, std::size_t w) {
  static const auto g = gaussian_window();
  const std::size_t n = h * w;
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, h, w, g);
  const auto mu_b = filter_valid(b, h, w, g);
  const auto e_aa = filter_valid(aa.data(), h, w, g);
  const auto e_bb = filter_valid(bb.data(), h, w, g);
  const auto e_ab = filter_valid(ab.data(), h, w, g);
  double acc = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
    acc += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
  }
  return acc / static_cast<double>(mu_a.size());
}

}  // namespace

double psnr(const hsi::HyperCube& ref, const hsi::HyperCube& est) {
  require_same_shape(ref, est, "psnr");
  const std::size_t plane = ref.plane();
  std::vector<double> per_band(ref.bands());
  parallel_for(ref.bands(), [&](std::size_t b) {
    double sse = 0.0;
    for (std::size_t i = b * plane; i < (b + 1) * plane; ++i) {
      const double d = ref.values()[i] - est.values()[i];
      sse += d * d;
    }
    const double mse = sse / static_cast<double>(plane);
    per_band[b] = mse > 0.0 ? std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse)) : kPsnrCap;
  });
  double total = 0.0;
  for (double v : per_band) total += v;
  return total / static_cast<double>(ref.bands());
}

SamResult sam_detailed(const hsi::HyperCube& ref, const hsi::HyperCube& est) {
  require_same_shape(ref, est, "sam");
  const std::size_t plane = ref.plane();
  double total = 0.0;
  std::size_t used = 0;
  SamResult out;
  for (std::size_t p = 0; p < plane; ++p) {
    double na = 0.0, nb = 0.0;
    for (std::size_t b = 0; b < ref.bands(); ++b) {
      const double x = ref.values()[b * plane + p], y = est.values()[b * plane + p];
      na += x * x;
      nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) {
      ++out.skipped;
      continue;
    }
    // 2 atan2(|a^ - b^|, |a^ + b^|) stays accurate near 0 and pi, unlike acos
    const double ia = 1.0 / std::sqrt(na), ib = 1.0 / std::sqrt(nb);
    double diff = 0.0, sum = 0.0;
    for (std::size_t b = 0; b < ref.bands(); ++b) {
      const double x = ref.values()[b * plane + p] * ia, y = est.values()[b * plane + p] * ib;
      diff += (x - y) * (x - y);
      sum += (x + y) * (x + y);
    }
    total += 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
    ++used;
  }
  if (used == 0) throw Error("sam: every pixel has a zero-norm spectrum");
  out.degrees = total / static_cast<double>(used) * 180.0 / std::numbers::pi;
  return out;
}

double sam(const hsi::HyperCube& ref, const hsi::HyperCube& est) { return sam_detailed(ref, est).degrees; }

double rmse(const hsi::HyperCube& ref, const hsi::HyperCube& est) {
  require_same_shape(ref, est, "rmse");
  double sse = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = ref.values()[i] - est.values()[i];
    sse += d * d;
  }
  return std::sqrt(sse / static_cast<double>(ref.size()));
}

double ssim(const hsi::HyperCube& ref, const hsi::HyperCube& est) {
  require_same_shape(ref, est, "ssim");
  if (ref.height() < kWindow || ref.width() < kWindow) {
    throw Error("ssim: spatial extents must be at least 11x11, got " + std::to_string(ref.height()) + "x" +
                std::to_string(ref.width()));
  }
  std::vector<double> per_band(ref.bands());
  const std::size_t plane = ref.plane();
  parallel_for(ref.bands(), [&](std::size_t b) {
    per_band[b] = band_ssim(ref.values().data() + b * plane, est.values().data() + b * plane, ref.height(), ref.width());
  });
  double total = 0.0;
  for (double v : per_band) total += v;
  return total / static_cast<double>(ref.bands());
}

MetricReport evaluate(const hsi::HyperCube& ref, const hsi::HyperCube& est) {
  return {psnr(ref, est), sam(ref, est), rmse(ref, est), ssim(ref, est)};
}

}  // namespace hyperking::metrics
