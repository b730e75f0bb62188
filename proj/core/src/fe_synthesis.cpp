#include "hyperking/fe_synthesis.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace hyperking::fe {
namespace {

using qsim::Complex;
using qsim::GateSpec;
using qsim::Matrix;

constexpr double kUnitarityTolerance = 1e-10;
// Below this magnitude an off-diagonal (or diagonal) pair is treated as zero.
constexpr double kDegenerate = 1e-12;

void require_unitary_2x2(const Matrix& u, const char* what) {
  if (u.rows() != 2 || u.cols() != 2) throw Error(std::string(what) + ": expected a 2x2 matrix");
  const double dev = qsim::unitarity_deviation(u);
  if (!(dev < kUnitarityTolerance)) {
    std::ostringstream msg;
    msg << what << ": matrix is not unitary (max |U^dagger U - I| = " << dev << ")";
    throw Error(msg.str());
  }
}

Matrix pauli_x_on(int wire) {
  Matrix x = Matrix::Zero(2, 2);
  x(0, 1) = 1.0;
  x(1, 0) = 1.0;
  Matrix out = Matrix::Identity(1, 1);
  for (int q = 0; q < 4; ++q) out = qsim::kron(out, q == wire ? x : Matrix::Identity(2, 2));
  return out;
}

// XX(t) on wires (m, n) of a 4-qubit register: cos(t/2) I - i sin(t/2) X_m X_n.
Matrix xx_on(int m, int n, double t) {
  return std::cos(t / 2.0) * Matrix::Identity(16, 16) -
         Complex(0.0, std::sin(t / 2.0)) * (pauli_x_on(m) * pauli_x_on(n));
}

Matrix layer(const std::array<Matrix, 4>& factors) {
  Matrix out = factors[0];
  for (int k = 1; k < 4; ++k) out = qsim::kron(out, factors[k]);
  return out;
}

}  // namespace

Matrix zyz_compose(const ZYZParams& v) {
  const Matrix m = qsim::gate_matrix(GateSpec::rz(0, v.alpha)) * qsim::gate_matrix(GateSpec::ry(0, v.beta)) *
                   qsim::gate_matrix(GateSpec::rz(0, v.gamma));
  return std::exp(Complex(0.0, v.p)) * m;
}

ZYZParams zyz_decompose(const Matrix& u) {
  require_unitary_2x2(u, "zyz_decompose");
  // u00 = e^{i(p-(a+g)/2)} c,  u01 = -e^{i(p-(a-g)/2)} s,
  // u10 = e^{i(p+(a-g)/2)} s,  u11 = e^{i(p+(a+g)/2)} c.
  const double c = std::abs(u(0, 0));
  const double s = std::abs(u(1, 0));
  ZYZParams out;
  out.beta = 2.0 * std::atan2(s, c);
  if (s < kDegenerate) {
    const double a00 = std::arg(u(0, 0)), a11 = std::arg(u(1, 1));
    out.beta = 0.0;
    out.alpha = a11 - a00;
    out.gamma = 0.0;
    out.p = 0.5 * (a00 + a11);
  } else if (c < kDegenerate) {
    const double a10 = std::arg(u(1, 0)), a01 = std::arg(-u(0, 1));
    out.beta = std::numbers::pi;
    out.alpha = 0.0;
    out.gamma = a01 - a10;
    out.p = 0.5 * (a10 + a01);
  } else {
    const double a00 = std::arg(u(0, 0)), a11 = std::arg(u(1, 1));
    const double a10 = std::arg(u(1, 0)), a01 = std::arg(-u(0, 1));
    const double sum = a11 - a00;   // alpha + gamma
    const double diff = a10 - a01;  // alpha - gamma
    out.alpha = 0.5 * (sum + diff);
    out.gamma = 0.5 * (sum - diff);
    out.p = 0.5 * (a00 + a11);
  }
  // Phase differences fix alpha - gamma and p only modulo pi; test the branches.
  ZYZParams best = out;
  double best_err = std::numeric_limits<double>::infinity();
  for (int flip = 0; flip < 2; ++flip)
    for (int sign = 0; sign < 2; ++sign) {
      ZYZParams c = out;
      c.alpha += flip * std::numbers::pi;
      c.gamma -= flip * std::numbers::pi;
      c.p += sign * std::numbers::pi;
      const double err = (zyz_compose(c) - u).cwiseAbs().maxCoeff();
      if (err < best_err - 1e-9) {
        best_err = err;
        best = c;
      }
    }
  // Rz(x + 2 pi) = -Rz(x): wrap into (-pi, pi] and carry the sign into p.
  auto wrap = [&](double& angle) {
    while (angle > std::numbers::pi + 1e-12) {
      angle -= 2.0 * std::numbers::pi;
      best.p += std::numbers::pi;
    }
    while (angle <= -std::numbers::pi + 1e-12) {
      angle += 2.0 * std::numbers::pi;
      best.p += std::numbers::pi;
    }
  };
  wrap(best.alpha);
  wrap(best.gamma);
  best.p = std::remainder(best.p, 2.0 * std::numbers::pi);
  return best;
}

Matrix core_circuit_unitary(const CoreParams& params) {
  std::array<Matrix, 4> a, b, c;
  for (int k = 0; k < 4; ++k) {
    a[k] = std::exp(Complex(0.0, params.p[k])) * qsim::gate_matrix(GateSpec::rz(0, params.alpha[k]));
    b[k] = qsim::gate_matrix(GateSpec::ry(0, params.beta[k]));
    c[k] = qsim::gate_matrix(GateSpec::rz(0, params.gamma[k]));
  }
  const Matrix i1 = xx_on(0, 1, params.theta[0]) * xx_on(2, 3, params.theta[1]);
  const Matrix i0 = xx_on(1, 2, params.theta[2]) * xx_on(0, 3, params.theta[3]);
  return layer(a) * i0 * layer(b) * i1 * layer(c);
}

CoreParams realize_tensor_unitary(const Matrix& u0, const Matrix& u1, const Matrix& u2, const Matrix& u3) {
  CoreParams out;
  const std::array<const Matrix*, 4> factors{&u0, &u1, &u2, &u3};
  for (int k = 0; k < 4; ++k) {
    const ZYZParams z = zyz_decompose(*factors[k]);
    out.p[k] = z.p;
    out.alpha[k] = z.alpha;
    out.beta[k] = z.beta;
    out.gamma[k] = z.gamma;
    out.theta[k] = 0.0;
  }
  return out;
}

double verify_realization(const Matrix& target, const CoreParams& params) {
  if (target.rows() != 16 || target.cols() != 16) throw Error("verify_realization: target must be 16x16");
  return qsim::phase_aligned_deviation(core_circuit_unitary(params), target);
}

std::array<double, 16> circuit_angles(const CoreParams& params) {
  std::array<double, 16> out{};
  for (int k = 0; k < 4; ++k) {
    out[k] = params.gamma[k];
    out[6 + k] = params.beta[k];
    out[12 + k] = params.alpha[k];
  }
  out[4] = params.theta[0];
  out[5] = params.theta[1];
  out[10] = params.theta[2];
  out[11] = params.theta[3];
  return out;
}

}  // namespace hyperking::fe
