#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperking/tensor.hpp"

/// Exact statevector simulation of small qubit registers.
///
/// Basis ordering: qubit 0 is the most significant bit of an amplitude
/// index, so a k-qubit gate matrix acts on the sub-index formed by its wires
/// in the listed order (first wire most significant).
namespace hyperking::qsim {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

inline constexpr int kMaxQubits = 8;

enum class GateKind { RX, RY, RZ, XX, PauliX, PauliZ, Toffoli, CRX };

enum class Pauli { X, Z };

std::string to_string(GateKind kind);

/// Number of wires a gate acts on.
int gate_arity(GateKind kind);
bool is_parameterized(GateKind kind);

/// A gate kind with its angle (radians) and ordered wires.
///
/// Toffoli wires are (filled control, open control, target): the target
/// flips when the first control is |1> and the second is |0>. CRX wires are
/// (control, target).
struct GateSpec {
  GateKind kind;
  double angle = 0.0;
  std::vector<int> wires;

  static GateSpec rx(int wire, double angle) { return {GateKind::RX, angle, {wire}}; }
  static GateSpec ry(int wire, double angle) { return {GateKind::RY, angle, {wire}}; }
  static GateSpec rz(int wire, double angle) { return {GateKind::RZ, angle, {wire}}; }
  static GateSpec xx(int a, int b, double angle) { return {GateKind::XX, angle, {a, b}}; }
  static GateSpec x(int wire) { return {GateKind::PauliX, 0.0, {wire}}; }
  static GateSpec z(int wire) { return {GateKind::PauliZ, 0.0, {wire}}; }
  static GateSpec toffoli(int a, int b, int c) { return {GateKind::Toffoli, 0.0, {a, b, c}}; }
  static GateSpec crx(int control, int target, double angle) {
    return {GateKind::CRX, angle, {control, target}};
  }
};

/// Unitary of a gate on its own wires (dimension 2^arity).
Matrix gate_matrix(const GateSpec& spec);

/// d/d(angle) of gate_matrix for parameterized kinds.
Matrix gate_matrix_derivative(const GateSpec& spec);

/// Normalized amplitude vector over n qubits.
class StateRegister {
 public:
  /// |0...0> on n qubits.
  explicit StateRegister(int n_qubits);

  /// Computational basis state |index>.
  static StateRegister basis(int n_qubits, std::size_t index);

  /// Takes ownership of amplitudes; rejects lengths that are not 2^n and
  /// vectors whose norm deviates from 1 by more than 1e-10.
  static StateRegister from_amplitudes(std::vector<Complex> amplitudes);

  int n_qubits() const noexcept { return n_qubits_; }
  std::size_t dimension() const noexcept { return amplitudes_.size(); }

  std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
  std::span<Complex> amplitudes() noexcept { return amplitudes_; }
  Complex operator[](std::size_t i) const { return amplitudes_[i]; }

  double norm_squared() const;

 private:
  StateRegister() = default;

  int n_qubits_ = 0;
  std::vector<Complex> amplitudes_;
};

/// Applies `matrix` (2^k x 2^k) to the listed wires of an amplitude vector
/// over n qubits, in place. Wires must be distinct and in range.
void apply_matrix(std::span<Complex> amplitudes, int n_qubits, const Matrix& matrix,
                  std::span<const int> wires);

/// Validates the wires of a gate against a register size and the gate arity.
void check_wires(const GateSpec& spec, int n_qubits);

StateRegister apply_gate(StateRegister state, const GateSpec& spec);

/// <psi| P_wire |psi> for a single-wire Pauli observable.
double expectation(std::span<const Complex> amplitudes, int n_qubits, Pauli observable, int wire);
double expectation(const StateRegister& state, Pauli observable, int wire);

Matrix kron(const Matrix& a, const Matrix& b);

/// Haar-distributed unitary via QR of a complex Gaussian matrix with the
/// phase of R's diagonal removed. Only dimension 2 is supported.
Matrix haar_random_unitary(int dimension, std::uint64_t seed);

/// max |(U^dagger U - I)_ij|.
double unitarity_deviation(const Matrix& u);

/// Max-modulus deviation between two matrices after aligning their global
/// phase on the entry where `target` has the largest modulus.
double phase_aligned_deviation(const Matrix& candidate, const Matrix& target);

}  // namespace hyperking::qsim
