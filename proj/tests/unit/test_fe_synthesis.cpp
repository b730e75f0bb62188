#include "check.hpp"

#include <cmath>
#include <numbers>

#include "hyperking/fe_synthesis.hpp"
#include "core_oracle.hpp"
#include "hyperking/random.hpp"

using namespace hyperking;
using namespace hyperking::fe;
using qsim::Complex;
using qsim::Matrix;

namespace {

constexpr double kPi = std::numbers::pi;

Matrix hadamard() {
  Matrix h(2, 2);
  h << 1, 1, 1, -1;
  return h / std::sqrt(2.0);
}

double deviation(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

Matrix simulate_columns(const CoreParams& p) { return oracle::core_unitary_by_gates(p); }

}  // namespace

TEST_CASE("Zyz.Examples") {
  const auto id = zyz_decompose(Matrix::Identity(2, 2));
  CHECK_NEAR(id.p, 0, 1e-15);
  CHECK_NEAR(id.alpha, 0, 1e-15);
  CHECK_NEAR(id.beta, 0, 1e-15);
  CHECK_NEAR(id.gamma, 0, 1e-15);

  const auto h = zyz_decompose(hadamard());
  CHECK_NEAR(h.p, kPi / 2, 1e-12);
  CHECK_NEAR(h.alpha, 0, 1e-12);
  CHECK_NEAR(h.beta, kPi / 2, 1e-12);
  CHECK_NEAR(h.gamma, kPi, 1e-12);
  // e^{i pi/2} Rz(0) Ry(pi/2) Rz(pi) = H by explicit multiplication
  CHECK_LT(deviation(zyz_compose({kPi / 2, 0, kPi / 2, kPi}), hadamard()), 1e-15);

  const auto ry = zyz_decompose(qsim::gate_matrix(qsim::GateSpec::ry(0, 0.7)));
  CHECK_NEAR(ry.p, 0, 1e-15);
  CHECK_NEAR(ry.alpha, 0, 1e-15);
  CHECK_NEAR(ry.beta, 0.7, 1e-15);
  CHECK_NEAR(ry.gamma, 0, 1e-15);
}

TEST_CASE("Zyz.DegenerateConventions") {
  Matrix diag = Matrix::Zero(2, 2);
  diag(0, 0) = std::exp(Complex(0, 0.4));
  diag(1, 1) = std::exp(Complex(0, -1.1));
  const auto d = zyz_decompose(diag);
  CHECK_EQ(d.gamma, 0.0);
  CHECK_EQ(d.beta, 0.0);
  CHECK_LT(deviation(zyz_compose(d), diag), 1e-14);

  Matrix anti = Matrix::Zero(2, 2);
  anti(0, 1) = std::exp(Complex(0, 2.0));
  anti(1, 0) = std::exp(Complex(0, 0.3));
  const auto a = zyz_decompose(anti);
  CHECK_EQ(a.alpha, 0.0);
  CHECK_NEAR(a.beta, kPi, 1e-15);
  CHECK_LT(deviation(zyz_compose(a), anti), 1e-14);
}

TEST_CASE("Zyz.HaarRoundTrip") {
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const Matrix u = qsim::haar_random_unitary(2, s);
    const auto z = zyz_decompose(u);
    CHECK_GE(z.beta, 0.0);
    CHECK_LE(z.beta, kPi);
    {
      INFO("seed " << s);
      CHECK_LT(deviation(zyz_compose(z), u), 1e-10);
    }
  }
}

TEST_CASE("Zyz.RejectsNonUnitary") {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 1) = 1e-6;
  try {
    zyz_decompose(m);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK_NE(std::string(e.what()).find("not unitary"), std::string::npos);
  }
}

TEST_CASE("Core.ZeroParamsIsIdentity") {
  CHECK_LT(deviation(core_circuit_unitary(CoreParams{}), Matrix::Identity(16, 16)), 1e-15);
}

TEST_CASE("Core.ZeroThetaIsKroneckerProduct") {
  Rng rng(1);
  CoreParams p;
  for (int k = 0; k < 4; ++k) {
    p.alpha[k] = rng.uniform(-3, 3);
    p.beta[k] = rng.uniform(0, 3);
    p.gamma[k] = rng.uniform(-3, 3);
    p.p[k] = rng.uniform(-3, 3);
  }
  Matrix expected = Matrix::Identity(1, 1);
  for (int k = 0; k < 4; ++k) expected = qsim::kron(expected, zyz_compose({p.p[k], p.alpha[k], p.beta[k], p.gamma[k]}));
  CHECK_LT(deviation(core_circuit_unitary(p), expected), 1e-12);
}

TEST_CASE("Core.MatchesGateSimulation") {
  Rng rng(2);
  CoreParams p;
  for (int k = 0; k < 4; ++k) {
    p.alpha[k] = rng.uniform(-3, 3);
    p.beta[k] = rng.uniform(-3, 3);
    p.gamma[k] = rng.uniform(-3, 3);
    p.theta[k] = rng.uniform(-3, 3);
    p.p[k] = rng.uniform(-3, 3);
  }
  CHECK_LT(deviation(core_circuit_unitary(p), simulate_columns(p)), 1e-12);
}

TEST_CASE("Realize.Examples") {
  const Matrix i2 = Matrix::Identity(2, 2);
  const auto z = realize_tensor_unitary(i2, i2, i2, i2);
  for (int k = 0; k < 4; ++k) {
    CHECK_EQ(z.alpha[k], 0.0);
    CHECK_EQ(z.beta[k], 0.0);
    CHECK_EQ(z.gamma[k], 0.0);
    CHECK_EQ(z.theta[k], 0.0);
  }
  const auto h = realize_tensor_unitary(hadamard(), hadamard(), hadamard(), hadamard());
  for (int k = 0; k < 4; ++k) {
    CHECK_NEAR(h.p[k], kPi / 2, 1e-12);
    CHECK_NEAR(h.beta[k], kPi / 2, 1e-12);
    CHECK_NEAR(h.gamma[k], kPi, 1e-12);
  }
  Matrix bad = Matrix::Identity(2, 2) * 1.1;
  CHECK_THROWS_AS(realize_tensor_unitary(i2, bad, i2, i2), Error);
}

TEST_CASE("Realize.RandomTensorProducts") {
  for (std::uint64_t t = 0; t < 200; ++t) {
    std::array<Matrix, 4> u;
    for (int k = 0; k < 4; ++k) u[k] = qsim::haar_random_unitary(2, derive_seed(t, k));
    const Matrix target = qsim::kron(qsim::kron(qsim::kron(u[0], u[1]), u[2]), u[3]);
    CHECK_LT(verify_realization(target, realize_tensor_unitary(u[0], u[1], u[2], u[3])), 1e-9);
  }
}

TEST_CASE("Verify.PhaseInvarianceAndSensitivity") {
  Rng rng(3);
  CoreParams p;
  for (int k = 0; k < 4; ++k) {
    p.alpha[k] = rng.uniform(-3, 3);
    p.beta[k] = rng.uniform(-3, 3);
    p.gamma[k] = rng.uniform(-3, 3);
    p.theta[k] = rng.uniform(-3, 3);
  }
  const Matrix u = core_circuit_unitary(p);
  CHECK_LT(verify_realization(u, p), 1e-13);
  CHECK_LT(verify_realization(std::exp(Complex(0, 1.3)) * u, p), 1e-13);
  CoreParams q = p;
  q.beta[2] += 1e-3;
  const double d = verify_realization(u, q);
  CHECK_GT(d, 1e-4);
  CHECK_LT(d, 1e-2);
}
