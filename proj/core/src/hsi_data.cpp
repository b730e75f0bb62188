#include "hyperking/hsi_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "container.hpp"
#include "hyperking/random.hpp"

namespace hyperking::hsi {
namespace {

void check_extents(std::size_t bands, std::size_t height, std::size_t width) {
  if (bands == 0 || height == 0 || width == 0) {
    throw ShapeError("cube extents must be positive, got " + std::to_string(bands) + "x" + std::to_string(height) +
                     "x" + std::to_string(width));
  }
}

void check_ratio(double ratio, const char* what) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw Error(std::string(what) + " must lie in [0, 1), got " + std::to_string(ratio));
}

// Separable Gaussian blur with mirrored borders.
std::vector<double> blur(const std::vector<double>& field, std::size_t h, std::size_t w, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
  const double total = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (auto& k : kernel) k /= total;

  auto mirror = [](long i, long n) {
    if (n == 1) return 0L;
    const long period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
  };

  std::vector<double> tmp(h * w, 0.0), out(h * w, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[k + radius] * field[y * w + mirror(static_cast<long>(x) + k, static_cast<long>(w))];
      tmp[y * w + x] = acc;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[k + radius] * tmp[mirror(static_cast<long>(y) + k, static_cast<long>(h)) * w + x];
      out[y * w + x] = acc;
    }
  return out;
}

CorruptionMask empty_mask(const HyperCube& cube) { return CorruptionMask(cube.size(), 0); }

void apply_stripes(CorruptionResult& result, double ratio, std::uint64_t seed) {
  HyperCube& cube = result.cube;
  const std::size_t rows = stripe_rows(ratio, cube.height());
  result.stripe_rows_per_band = rows;
  Rng rng(seed);
  std::vector<std::size_t> order(cube.height());
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < rows; ++i) std::swap(order[i], order[i + rng.below(order.size() - i)]);
    for (std::size_t i = 0; i < rows; ++i) {
      const std::size_t y = order[i];
      for (std::size_t x = 0; x < cube.width(); ++x) {
        const std::size_t idx = (b * cube.height() + y) * cube.width() + x;
        cube.values()[idx] = 0.0;
        result.stripe_mask[idx] = 1;
        result.mask[idx] = 1;
      }
    }
  }
}

}  // namespace

HyperCube::HyperCube(std::size_t bands, std::size_t height, std::size_t width, double fill)
    : bands_(bands), height_(height), width_(width) {
  check_extents(bands, height, width);
  if (!(fill >= 0.0 && fill <= 1.0)) throw Error("cube fill value must lie in [0, 1]");
  values_.assign(bands * height * width, fill);
}

HyperCube::HyperCube(std::size_t bands, std::size_t height, std::size_t width, std::vector<double> values)
    : bands_(bands), height_(height), width_(width), values_(std::move(values)) {
  check_extents(bands, height, width);
  if (values_.size() != bands * height * width) {
    throw ShapeError("cube expects " + std::to_string(bands * height * width) + " values, got " +
                     std::to_string(values_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0 && values_[i] <= 1.0)) {
      throw Error("cube value " + std::to_string(values_[i]) + " at index " + std::to_string(i) +
                  " lies outside [0, 1]");
    }
  }
}

HyperCube HyperCube::from_tensor(const Tensor& t) {
  if (t.rank() != 3) throw ShapeError("cube tensor must be bands x height x width, got " + shape_to_string(t.shape()));
  std::vector<double> v(t.data().begin(), t.data().end());
  for (auto& x : v) x = std::isnan(x) ? 0.0 : std::clamp(x, 0.0, 1.0);
  return HyperCube(t.extent(0), t.extent(1), t.extent(2), std::move(v));
}

std::size_t mask_count(const CorruptionMask& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

HyperCube synth_cube(std::size_t bands, std::size_t height, std::size_t width, std::size_t rank,
                     std::uint64_t seed) {
  check_extents(bands, height, width);
  const std::size_t n = height * width;
  if (rank == 0 || rank > bands || rank > n) {
    throw Error("rank must lie in [1, min(bands, height*width)], got " + std::to_string(rank));
  }

  // Spectral signatures: cumulative sums of nonnegative noise scaled to peak 1.
  std::vector<double> a(bands * rank);
  Rng spectral(derive_seed(seed, 0));
  for (std::size_t r = 0; r < rank; ++r) {
    double acc = 0.0;
    for (std::size_t b = 0; b < bands; ++b) {
      acc += spectral.uniform();
      a[b * rank + r] = acc;
    }
    for (std::size_t b = 0; b < bands; ++b) a[b * rank + r] /= acc;
  }

  // Abundances: blurred white noise, standardized, softmax across endmembers.
  const double sigma = std::max<double>(1.0, static_cast<double>(std::max(height, width)) / 8.0);
  const double temperature = 2.0;
  std::vector<double> s(rank * n);
  for (std::size_t r = 0; r < rank; ++r) {
    Rng field_rng(derive_seed(seed, 1 + r));
    std::vector<double> noise(n);
    for (auto& v : noise) v = field_rng.normal();
    std::vector<double> field = blur(noise, height, width, sigma);
    const double mean = std::accumulate(field.begin(), field.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : field) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) s[r * n + i] = sd > 0.0 ? temperature * (field[i] - mean) / sd : 0.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double peak = s[i];
    for (std::size_t r = 1; r < rank; ++r) peak = std::max(peak, s[r * n + i]);
    double total = 0.0;
    for (std::size_t r = 0; r < rank; ++r) total += (s[r * n + i] = std::exp(s[r * n + i] - peak));
    for (std::size_t r = 0; r < rank; ++r) s[r * n + i] /= total;
  }

  std::vector<double> x(bands * n, 0.0);
  for (std::size_t b = 0; b < bands; ++b)
    for (std::size_t r = 0; r < rank; ++r) {
      const double coef = a[b * rank + r];
      for (std::size_t i = 0; i < n; ++i) x[b * n + i] += coef * s[r * n + i];
    }
  const double top = *std::max_element(x.begin(), x.end());
  for (auto& v : x) v = std::min(1.0, v / top);
  return HyperCube(bands, height, width, std::move(x));
}

std::size_t stripe_rows(double ratio, std::size_t height) {
  check_ratio(ratio, "stripe ratio");
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(height)));
}

CorruptionResult corrupt_stripes(const HyperCube& cube, double ratio, std::uint64_t seed) {
  CorruptionResult result{cube, empty_mask(cube), empty_mask(cube), empty_mask(cube), 0, 0};
  apply_stripes(result, ratio, seed);
  return result;
}

CorruptionResult corrupt_mixed(const HyperCube& cube, const MixedNoise& noise, std::uint64_t seed) {
  check_ratio(noise.sigma_ratio, "gaussian sigma ratio");
  check_ratio(noise.impulse_ratio, "impulse ratio");
  check_ratio(noise.stripe_ratio, "stripe ratio");
  CorruptionResult result{cube, empty_mask(cube), empty_mask(cube), empty_mask(cube), 0, 0};
  auto values = result.cube.values();

  if (noise.sigma_ratio > 0.0) {
    const double sigma = noise.sigma_ratio * *std::max_element(cube.values().begin(), cube.values().end());
    Rng rng(derive_seed(seed, 0));
    for (auto& v : values) v = std::clamp(v + sigma * rng.normal(), 0.0, 1.0);
  }

  const std::size_t count = static_cast<std::size_t>(std::llround(noise.impulse_ratio * static_cast<double>(cube.size())));
  result.impulse_count = count;
  if (count > 0) {
    Rng rng(derive_seed(seed, 1));
    std::vector<std::size_t> order(cube.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(order[i], order[i + rng.below(order.size() - i)]);
      const std::size_t idx = order[i];
      values[idx] = rng.below(2) == 0 ? 0.0 : 1.0;
      result.impulse_mask[idx] = 1;
      result.mask[idx] = 1;
    }
  }

  apply_stripes(result, noise.stripe_ratio, derive_seed(seed, 2));
  return result;
}

// ---------------------------------------------------------------------------

namespace {

CubeFormatError translate(const detail::ContainerError& e) {
  using K = CubeFormatError::Kind;
  switch (e.fault) {
    case detail::ContainerFault::Io: return {K::Io, e.message};
    case detail::ContainerFault::BadMagic: return {K::BadMagic, e.message};
    case detail::ContainerFault::TruncatedHeader: return {K::TruncatedHeader, e.message};
    case detail::ContainerFault::BadHeader: return {K::BadHeader, e.message};
  }
  return {K::BadHeader, e.message};
}

}  // namespace

void write_cube(const HyperCube& cube, const std::filesystem::path& path) {
  nlohmann::json header{{"bands", cube.bands()},
                        {"height", cube.height()},
                        {"width", cube.width()},
                        {"dtype", "f32le"},
                        {"layout", "band-row-col"}};
  std::vector<unsigned char> payload;
  payload.reserve(cube.size() * 4);
  for (double v : cube.values()) detail::append_f32(payload, v);
  try {
    detail::write_container(path, "HKC1", header, payload);
  } catch (const detail::ContainerError& e) {
    throw translate(e);
  }
}

HyperCube read_cube(const std::filesystem::path& path) {
  using K = CubeFormatError::Kind;
  detail::Container c;
  try {
    c = detail::read_container(path, "HKC1");
  } catch (const detail::ContainerError& e) {
    throw translate(e);
  }
  std::size_t bands = 0, height = 0, width = 0;
  try {
    bands = c.header.at("bands").get<std::size_t>();
    height = c.header.at("height").get<std::size_t>();
    width = c.header.at("width").get<std::size_t>();
    if (c.header.at("dtype").get<std::string>() != "f32le") throw CubeFormatError(K::BadHeader, path.string() + ": unsupported dtype");
    if (c.header.at("layout").get<std::string>() != "band-row-col") {
      throw CubeFormatError(K::BadHeader, path.string() + ": unsupported layout");
    }
  } catch (const nlohmann::json::exception& e) {
    throw CubeFormatError(K::BadHeader, path.string() + ": malformed header: " + e.what());
  }
  if (bands == 0 || height == 0 || width == 0) throw CubeFormatError(K::BadHeader, path.string() + ": zero extent");
  if (c.payload.size() % 4 != 0) {
    throw CubeFormatError(K::TruncatedPayload, path.string() + ": truncated payload (" +
                                                   std::to_string(c.payload.size()) + " bytes)");
  }
  const std::size_t expected = bands * height * width;
  if (c.payload.size() / 4 != expected) {
    throw CubeFormatError(K::SizeMismatch, path.string() + ": header declares " + std::to_string(expected) +
                                               " values, payload holds " + std::to_string(c.payload.size() / 4));
  }
  std::vector<double> values(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    const float f = detail::load_f32(c.payload.data() + 4 * i);
    if (!(f >= 0.0F && f <= 1.0F)) {
      throw CubeFormatError(K::BadValue, path.string() + ": value outside [0, 1] at index " + std::to_string(i));
    }
    values[i] = f;
  }
  return HyperCube(bands, height, width, std::move(values));
}

}  // namespace hyperking::hsi
