#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hyperking/hsi_data.hpp"
#include "hyperking/nn.hpp"
#include "hyperking/quantum_layers.hpp"

namespace hyperking::model {

enum class Preset { Full, Mini };

std::string to_string(Preset preset);
Preset parse_preset(const std::string& text);

struct LayerSpec {
  enum class Kind {
    ConvBlock,   // conv + batch norm + LeakyReLU(0.2)
    TConvBlock,  // transposed conv + batch norm + LeakyReLU(0.2)
    Conv,        // bare convolution
    MaxPool,
    Upsample,
  };
  Kind kind;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t padding = 0;
  std::string name;  // parameter prefix
};

/// A named group of layers with one output size, e.g. "ConvModule 2".
struct Stage {
  std::string label;
  std::vector<LayerSpec> layers;
};

/// One row of a shape trace (per item, batch dimension dropped).
struct TraceRow {
  std::string label;
  Shape shape;
  bool operator==(const TraceRow&) const = default;
};

struct GeneratorConfig {
  Preset preset = Preset::Mini;
  std::size_t bands = 0;
  std::size_t spatial = 0;
  std::vector<Stage> compression;  // deep compression front end
  std::vector<Stage> expansion;    // inverse-QC back end
  Stage head;                      // 1x1 spectral head
  std::size_t interface_channels = 0;  // channels entering the quantum core (spatial 2x2)
  std::size_t registers = 0;           // per item
  std::vector<TraceRow> trace;         // from shape propagation
};

/// Validated layer lists for a preset. Full requires 172 bands at 128x128,
/// mini 8 bands at 32x32.
GeneratorConfig build_generator_config(Preset preset, std::size_t bands, std::size_t spatial);

/// Angle-embedded 4-qubit core: RZ, XX on (0,1),(2,3), RY, XX on (1,2),(0,3),
/// RZ, Toffoli entanglement, Z on wires 0 and 1. Parameters in execution
/// order: gamma[4], theta0, theta1, beta[4], theta2, theta3, alpha[4].
qlayers::Circuit generator_core_circuit(bool toffoli = true);

inline constexpr std::size_t kCoreAngles = 16;

nn::ParameterSet init_generator(const GeneratorConfig& config, std::uint64_t seed);

/// features [R, 4] -> Z expectations [R, 2].
Var quantum_core_forward(Var features, Var angles);

/// [C,H,W] or [B,C,H,W] -> same shape. When `trace` is given, the per-item
/// output size of every stage is appended to it.
Var generator_forward(const GeneratorConfig& config, nn::Context& ctx, Var input,
                      std::vector<TraceRow>* trace = nullptr);

/// Inference in eval mode, output clamped into [0, 1].
hsi::HyperCube restore_cube(const GeneratorConfig& config, nn::ParameterSet& params, const hsi::HyperCube& cube);

}  // namespace hyperking::model
