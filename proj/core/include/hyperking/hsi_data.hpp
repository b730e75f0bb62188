#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hyperking/tensor.hpp"

namespace hyperking::hsi {

/// bands x height x width reflectance volume with values in [0, 1], stored
/// band-major (band, row, column).
class HyperCube {
 public:
  HyperCube(std::size_t bands, std::size_t height, std::size_t width, double fill = 0.0);

  /// Rejects values outside [0, 1] (including NaN) and length mismatches.
  HyperCube(std::size_t bands, std::size_t height, std::size_t width, std::vector<double> values);

  /// Converts a bands x height x width tensor, clamping values into [0, 1].
  static HyperCube from_tensor(const Tensor& t);

  std::size_t bands() const noexcept { return bands_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t plane() const noexcept { return height_ * width_; }

  double at(std::size_t b, std::size_t y, std::size_t x) const { return values_[(b * height_ + y) * width_ + x]; }
  double& at(std::size_t b, std::size_t y, std::size_t x) { return values_[(b * height_ + y) * width_ + x]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  Shape shape() const { return {bands_, height_, width_}; }
  Tensor to_tensor() const { return Tensor(shape(), values_); }

  bool same_shape(const HyperCube& other) const {
    return bands_ == other.bands_ && height_ == other.height_ && width_ == other.width_;
  }

  bool operator==(const HyperCube& other) const = default;

 private:
  std::size_t bands_, height_, width_;
  std::vector<double> values_;
};

/// true marks a corrupted element. Test-only ground truth; never a model input.
using CorruptionMask = std::vector<std::uint8_t>;

std::size_t mask_count(const CorruptionMask& mask);

struct CorruptionResult {
  HyperCube cube;
  CorruptionMask mask;          // union of every marked element
  CorruptionMask stripe_mask;   // elements in dead rows
  CorruptionMask impulse_mask;  // salt-and-pepper elements
  std::size_t stripe_rows_per_band = 0;
  std::size_t impulse_count = 0;
};

/// Low-rank synthetic cube X = A S rescaled into [0, 1]: A holds smooth
/// nonnegative spectral signatures (bands x rank), S softmax-normalized
/// smooth abundance maps (rank x height*width).
HyperCube synth_cube(std::size_t bands, std::size_t height, std::size_t width, std::size_t rank,
                     std::uint64_t seed);

/// Rows zeroed per band for a stripe ratio (round to nearest).
std::size_t stripe_rows(double ratio, std::size_t height);

/// Zeroes round(ratio * height) distinct full-width rows in every band, with
/// row positions drawn independently per band.
CorruptionResult corrupt_stripes(const HyperCube& cube, double ratio, std::uint64_t seed);

struct MixedNoise {
  double sigma_ratio = 0.10;
  double impulse_ratio = 0.01;
  double stripe_ratio = 0.10;
};

/// Gaussian noise (sigma = sigma_ratio * max reflectance, clamped to [0, 1]),
/// then salt-and-pepper on round(impulse_ratio * N) distinct elements, then
/// dead stripes.
CorruptionResult corrupt_mixed(const HyperCube& cube, const MixedNoise& noise, std::uint64_t seed);

// Cube files --------------------------------------------------------------

class CubeFormatError : public Error {
 public:
  enum class Kind { Io, BadMagic, TruncatedHeader, BadHeader, TruncatedPayload, SizeMismatch, BadValue };

  CubeFormatError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// "HKC1", u32 LE header length, JSON header, then f32 LE values.
void write_cube(const HyperCube& cube, const std::filesystem::path& path);
HyperCube read_cube(const std::filesystem::path& path);

}  // namespace hyperking::hsi
