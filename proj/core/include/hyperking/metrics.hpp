#pragma once

#include <cstddef>

#include "hyperking/hsi_data.hpp"

namespace hyperking::metrics {

struct MetricReport {
  double psnr = 0.0;  // dB
  double sam = 0.0;   // degrees
  double rmse = 0.0;
  double ssim = 0.0;
};

inline constexpr double kPsnrCap = 100.0;

/// Band-mean PSNR with peak 1; each band is capped at 100 dB.
double psnr(const hsi::HyperCube& ref, const hsi::HyperCube& est);

struct SamResult {
  double degrees = 0.0;
  std::size_t skipped = 0;  // pixels with a zero-norm spectrum in either cube
};

/// Throws if every pixel has a zero-norm spectrum.
SamResult sam_detailed(const hsi::HyperCube& ref, const hsi::HyperCube& est);
double sam(const hsi::HyperCube& ref, const hsi::HyperCube& est);

double rmse(const hsi::HyperCube& ref, const hsi::HyperCube& est);

/// Band-mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5,
/// K1 0.01, K2 0.03, dynamic range 1). Needs height and width >= 11.
double ssim(const hsi::HyperCube& ref, const hsi::HyperCube& est);

MetricReport evaluate(const hsi::HyperCube& ref, const hsi::HyperCube& est);

}  // namespace hyperking::metrics
