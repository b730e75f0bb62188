#pragma once

#include <array>

#include "hyperking/qsim.hpp"

/// Constructive realization of tensor-product unitaries on the generator's
/// 4-qubit Rz-XX-Ry-XX-Rz core.
///
/// The core computes U = A * I0(t2, t3) * B * I1(t0, t1) * C where
///   A = kron_k e^{i p_k} Rz(alpha_k),  B = kron_k Ry(beta_k),  C = kron_k Rz(gamma_k),
///   I1 = XX_01(t0) XX_23(t1),          I0 = XX_12(t2) XX_03(t3).
/// Executed as a circuit, C acts first, so the gate order is
/// Rz(gamma) -> I1 -> Ry(beta) -> I0 -> Rz(alpha).
namespace hyperking::fe {

/// V = e^{i p} Rz(alpha) Ry(beta) Rz(gamma).
struct ZYZParams {
  double p = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

struct CoreParams {
  std::array<double, 4> alpha{};
  std::array<double, 4> beta{};
  std::array<double, 4> gamma{};
  std::array<double, 4> theta{};
  /// Per-qubit phases; only their sum (a global phase) affects the operator.
  std::array<double, 4> p{};
};

/// Decomposes a 2x2 unitary. beta lies in [0, pi]. When the input is
/// diagonal gamma is set to 0; when it is anti-diagonal alpha is set to 0.
/// Throws hyperking::Error if the input deviates from unitarity by 1e-10 or more.
ZYZParams zyz_decompose(const qsim::Matrix& u);

/// e^{i p} Rz(alpha) Ry(beta) Rz(gamma).
qsim::Matrix zyz_compose(const ZYZParams& params);

/// 16x16 operator of the core, built from Kronecker products.
qsim::Matrix core_circuit_unitary(const CoreParams& params);

/// Parameters (with theta = 0) whose core operator equals
/// kron(u0, u1, u2, u3) up to global phase.
CoreParams realize_tensor_unitary(const qsim::Matrix& u0, const qsim::Matrix& u1,
                                  const qsim::Matrix& u2, const qsim::Matrix& u3);

/// Max-modulus deviation between the core operator and `target` after
/// aligning the global phase on target's dominant entry.
double verify_realization(const qsim::Matrix& target, const CoreParams& params);

/// Core parameters in circuit execution order:
/// gamma[4], theta0, theta1, beta[4], theta2, theta3, alpha[4].
std::array<double, 16> circuit_angles(const CoreParams& params);

}  // namespace hyperking::fe
