#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hyperking/autodiff.hpp"
#include "hyperking/qsim.hpp"
#include "hyperking/tensor.hpp"

/// Batched quantum layers with parameters shared across registers.
///
/// A layer acts identically on every register of a batch, the way a
/// convolution kernel acts on every pixel. The batch functions below are
/// plain forward transforms; differentiable use goes through `Circuit` and
/// `circuit_layer`.
namespace hyperking::qlayers {

using qsim::Complex;
using qsim::Pauli;

enum class Axis { X, Y, Z };
enum class IsingPairing { First, Second };
enum class Encoding { Angle, Amplitude };

/// Counts rows that could not be amplitude-embedded because their norm was 0.
struct EmbedDiagnostics {
  std::size_t zero_norm_rows = 0;
};

/// R independent registers of n qubits each, stored contiguously.
class RegisterBatch {
 public:
  /// R registers, each |0...0>.
  RegisterBatch(std::size_t registers, int n_qubits);

  std::size_t size() const noexcept { return registers_; }
  int n_qubits() const noexcept { return n_qubits_; }
  std::size_t dimension() const noexcept { return std::size_t{1} << n_qubits_; }

  std::span<Complex> amplitudes(std::size_t r) {
    return {storage_.data() + r * dimension(), dimension()};
  }
  std::span<const Complex> amplitudes(std::size_t r) const {
    return {storage_.data() + r * dimension(), dimension()};
  }

  qsim::StateRegister at(std::size_t r) const;

 private:
  std::size_t registers_;
  int n_qubits_;
  std::vector<Complex> storage_;
};

/// Each feature f of row r, column q becomes R_Y(f)|0> on qubit q.
RegisterBatch angle_embed(const Tensor& features);

/// Each row (length 2^n) is normalized into a register's amplitudes. Zero
/// rows become |0...0> and are counted in `diagnostics`.
RegisterBatch amplitude_embed(const Tensor& features, EmbedDiagnostics* diagnostics = nullptr);

/// Rotates qubit q of every register by angles[q].
RegisterBatch rotation_layer(RegisterBatch batch, Axis axis, std::span<const double> angles);

/// First pairing: XX(a0) on (0,1), XX(a1) on (2,3). Second pairing: XX(a0) on
/// (1,2), XX(a1) on (0,3). Requires 4-qubit registers.
RegisterBatch ising_layer(RegisterBatch batch, IsingPairing pairing, std::span<const double> angles);

/// CCNOT(0,1,2), CCNOT(1,2,3), CCNOT(2,3,0), CCNOT(3,0,1) on 4-qubit registers.
RegisterBatch toffoli_entangle(RegisterBatch batch);

/// CRX(angles[i]) from `controller` onto targets[i], in order.
RegisterBatch em_module(RegisterBatch batch, int controller, std::span<const int> targets,
                        std::span<const double> angles);

/// Expectation of `observable` on each listed wire: R x |wires|.
Tensor measure_layer(const RegisterBatch& batch, Pauli observable, std::span<const int> wires);

/// One gate position in a circuit. `param` indexes the circuit's parameter
/// vector for parameterized kinds and is -1 otherwise.
struct CircuitOp {
  qsim::GateKind kind;
  std::vector<int> wires;
  int param = -1;
};

/// An embedding, a gate sequence over shared parameters and a measurement.
class Circuit {
 public:
  Circuit(int n_qubits, Encoding encoding);

  int n_qubits() const noexcept { return n_qubits_; }
  Encoding encoding() const noexcept { return encoding_; }
  std::size_t parameter_count() const noexcept { return parameter_count_; }

  /// Features per register: n for angle encoding, 2^n for amplitude encoding.
  std::size_t feature_width() const noexcept;

  // Each builder returns the index of the first parameter it allocates.
  std::size_t add_rotation_layer(Axis axis);
  std::size_t add_ising_layer(IsingPairing pairing);
  void add_toffoli_entangle();
  std::size_t add_em_module(int controller, const std::vector<int>& targets);
  void add_fixed_gate(qsim::GateKind kind, std::vector<int> wires);

  void set_measurement(Pauli observable, std::vector<int> wires);

  const std::vector<CircuitOp>& ops() const noexcept { return ops_; }
  Pauli observable() const noexcept { return observable_; }
  const std::vector<int>& measured_wires() const noexcept { return measured_; }

 private:
  std::size_t add_parameterized(qsim::GateKind kind, std::vector<int> wires);

  int n_qubits_;
  Encoding encoding_;
  std::size_t parameter_count_ = 0;
  std::vector<CircuitOp> ops_;
  Pauli observable_ = Pauli::Z;
  std::vector<int> measured_;
};

/// Forward evaluation: features [R, feature_width] -> expectations
/// [R, |measured wires|].
Tensor run_circuit(const Circuit& circuit, const Tensor& features, std::span<const double> params,
                   EmbedDiagnostics* diagnostics = nullptr);

/// Records the circuit on a tape. The backward rule is reverse-mode over the
/// gate sequence (adjoint state propagation), giving gradients for the
/// parameters and the embedded features.
Var circuit_layer(const Circuit& circuit, Var features, Var params);

using Readout = std::function<double(const Tensor& expectations)>;

/// Parameter-shift derivative of readout(run_circuit(...)) with respect to
/// params[index]. RX, RY, RZ and XX use the two-term +-pi/2 rule; CRX,
/// whose generator has three eigenvalues, uses the four-term rule.
double param_shift_grad(const Circuit& circuit, const Tensor& features,
                        std::span<const double> params, std::size_t index, const Readout& readout);

}  // namespace hyperking::qlayers
