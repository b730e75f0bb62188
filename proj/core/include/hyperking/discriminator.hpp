#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hyperking/generator.hpp"
#include "hyperking/nn.hpp"
#include "hyperking/quantum_layers.hpp"

namespace hyperking::model {

struct DiscriminatorConfig {
  Preset preset = Preset::Mini;
  std::size_t bands = 0;
  std::size_t spatial = 0;
  int em_size = 4;  // qubits per register: 2, 4 or 8
  qlayers::Encoding encoding = qlayers::Encoding::Amplitude;
  std::size_t grid = 0;       // pooled grid is 2 x grid x grid
  std::size_t registers = 0;  // per item
  std::size_t head_hidden = 0;
  std::vector<TraceRow> trace;

  std::size_t pooled_size() const { return 2 * grid * grid; }
  std::size_t classifier_outputs() const { return registers * static_cast<std::size_t>(em_size); }
};

/// Full: 2x16x16 grid, head width 16. Mini: 2x8x8 grid, head width 8; the
/// 8-qubit amplitude variant uses a 2x16x16 grid at mini scale because 128
/// pooled values cannot fill a 256-amplitude register.
DiscriminatorConfig build_discriminator_config(Preset preset, std::size_t bands, std::size_t spatial,
                                               int em_size = 4,
                                               qlayers::Encoding encoding = qlayers::Encoding::Amplitude);

/// Embedding, RX and RZ layers, the EM modules with controllers n-1 .. 0
/// (each onto all other wires, descending), RX and RZ layers, Pauli-X on
/// every wire.
qlayers::Circuit he_classifier_circuit(int em_size, qlayers::Encoding encoding);

nn::ParameterSet init_discriminator(const DiscriminatorConfig& config, std::uint64_t seed);

/// [C,H,W] or [B,C,H,W] -> [2,g,g] or [B,2,g,g].
Var ds_forward(const DiscriminatorConfig& config, nn::Context& ctx, Var input);

/// Pooled [2,g,g] or [B,2,g,g] -> [R*n] or [B, R*n].
Var he_classifier_forward(const DiscriminatorConfig& config, nn::Context& ctx, Var pooled);

/// Probabilities: scalar shape {} for one item, [B] for a batch.
Var discriminator_forward(const DiscriminatorConfig& config, nn::Context& ctx, Var input,
                          std::vector<TraceRow>* trace = nullptr);

}  // namespace hyperking::model
