#include "hyperking/qsim.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <bit>
#include <cmath>

#include "hyperking/random.hpp"

namespace hyperking::qsim {
namespace {

constexpr Complex kI{0.0, 1.0};

void require_angle_kind(const GateSpec& spec) {
  if (!is_parameterized(spec.kind)) {
    throw Error("gate " + to_string(spec.kind) + " has no angle");
  }
}

}  // namespace

std::string to_string(GateKind kind) {
  switch (kind) {
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::XX: return "XX";
    case GateKind::PauliX: return "PauliX";
    case GateKind::PauliZ: return "PauliZ";
    case GateKind::Toffoli: return "Toffoli";
    case GateKind::CRX: return "CRX";
  }
  throw Error("unknown gate kind");
}

int gate_arity(GateKind kind) {
  switch (kind) {
    case GateKind::RX:
    case GateKind::RY:
    case GateKind::RZ:
    case GateKind::PauliX:
    case GateKind::PauliZ: return 1;
    case GateKind::XX:
    case GateKind::CRX: return 2;
    case GateKind::Toffoli: return 3;
  }
  throw Error("unknown gate kind");
}

bool is_parameterized(GateKind kind) {
  return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ ||
         kind == GateKind::XX || kind == GateKind::CRX;
}

Matrix gate_matrix(const GateSpec& spec) {
  const double c = std::cos(spec.angle / 2.0);
  const double s = std::sin(spec.angle / 2.0);
  switch (spec.kind) {
    case GateKind::RX: {
      Matrix m(2, 2);
      m << c, -kI * s, -kI * s, c;
      return m;
    }
    case GateKind::RY: {
      Matrix m(2, 2);
      m << c, -s, s, c;
      return m;
    }
    case GateKind::RZ: {
      Matrix m = Matrix::Zero(2, 2);
      m(0, 0) = std::exp(-kI * (spec.angle / 2.0));
      m(1, 1) = std::exp(kI * (spec.angle / 2.0));
      return m;
    }
    case GateKind::XX: {
      // Off-diagonal entries are s/i = -i s.
      Matrix m = Matrix::Zero(4, 4);
      for (int i = 0; i < 4; ++i) {
        m(i, i) = c;
        m(i, 3 - i) = -kI * s;
      }
      return m;
    }
    case GateKind::PauliX: {
      Matrix m = Matrix::Zero(2, 2);
      m(0, 1) = 1.0;
      m(1, 0) = 1.0;
      return m;
    }
    case GateKind::PauliZ: {
      Matrix m = Matrix::Zero(2, 2);
      m(0, 0) = 1.0;
      m(1, 1) = -1.0;
      return m;
    }
    case GateKind::Toffoli: {
      // DIAG(I_4, X, I_2): the target flips on control state |10>.
      Matrix m = Matrix::Identity(8, 8);
      m(4, 4) = 0.0;
      m(5, 5) = 0.0;
      m(4, 5) = 1.0;
      m(5, 4) = 1.0;
      return m;
    }
    case GateKind::CRX: {
      Matrix m = Matrix::Identity(4, 4);
      m(2, 2) = c;
      m(2, 3) = -kI * s;
      m(3, 2) = -kI * s;
      m(3, 3) = c;
      return m;
    }
  }
  throw Error("unknown gate kind");
}

Matrix gate_matrix_derivative(const GateSpec& spec) {
  require_angle_kind(spec);
  const double dc = -0.5 * std::sin(spec.angle / 2.0);
  const double ds = 0.5 * std::cos(spec.angle / 2.0);
  switch (spec.kind) {
    case GateKind::RX: {
      Matrix m(2, 2);
      m << dc, -kI * ds, -kI * ds, dc;
      return m;
    }
    case GateKind::RY: {
      Matrix m(2, 2);
      m << dc, -ds, ds, dc;
      return m;
    }
    case GateKind::RZ: {
      Matrix m = Matrix::Zero(2, 2);
      m(0, 0) = -0.5 * kI * std::exp(-kI * (spec.angle / 2.0));
      m(1, 1) = 0.5 * kI * std::exp(kI * (spec.angle / 2.0));
      return m;
    }
    case GateKind::XX: {
      Matrix m = Matrix::Zero(4, 4);
      for (int i = 0; i < 4; ++i) {
        m(i, i) = dc;
        m(i, 3 - i) = -kI * ds;
      }
      return m;
    }
    case GateKind::CRX: {
      Matrix m = Matrix::Zero(4, 4);
      m(2, 2) = dc;
      m(2, 3) = -kI * ds;
      m(3, 2) = -kI * ds;
      m(3, 3) = dc;
      return m;
    }
    default: break;
  }
  throw Error("gate " + to_string(spec.kind) + " has no angle");
}

// ---------------------------------------------------------------------------
// StateRegister

StateRegister::StateRegister(int n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw Error("register size must be in [1, " + std::to_string(kMaxQubits) + "], got " +
                std::to_string(n_qubits));
  }
  amplitudes_.assign(std::size_t{1} << n_qubits, Complex{0.0, 0.0});
  amplitudes_[0] = 1.0;
}

StateRegister StateRegister::basis(int n_qubits, std::size_t index) {
  StateRegister s(n_qubits);
  if (index >= s.dimension()) throw Error("basis index out of range");
  s.amplitudes_[0] = 0.0;
  s.amplitudes_[index] = 1.0;
  return s;
}

StateRegister StateRegister::from_amplitudes(std::vector<Complex> amplitudes) {
  const std::size_t dim = amplitudes.size();
  if (dim < 2 || (dim & (dim - 1)) != 0) {
    throw Error("amplitude count must be a power of two >= 2, got " + std::to_string(dim));
  }
  const int n = std::countr_zero(dim);
  if (n > kMaxQubits) throw Error("register exceeds " + std::to_string(kMaxQubits) + " qubits");
  StateRegister s;
  s.n_qubits_ = n;
  s.amplitudes_ = std::move(amplitudes);
  const double norm = s.norm_squared();
  if (std::abs(norm - 1.0) > 1e-10) {
    throw Error("amplitudes are not normalized (|psi|^2 = " + std::to_string(norm) + ")");
  }
  return s;
}

double StateRegister::norm_squared() const {
  double acc = 0.0;
  for (const auto& a : amplitudes_) acc += std::norm(a);
  return acc;
}

// ---------------------------------------------------------------------------
// Gate application

void apply_matrix(std::span<Complex> amplitudes, int n_qubits, const Matrix& matrix,
                  std::span<const int> wires) {
  const std::size_t k = wires.size();
  const std::size_t sub = std::size_t{1} << k;
  std::size_t mask = 0;
  std::size_t offsets[8];
  for (std::size_t m = 0; m < sub; ++m) {
    std::size_t off = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if ((m >> (k - 1 - j)) & 1U) off |= std::size_t{1} << (n_qubits - 1 - wires[j]);
    }
    offsets[m] = off;
  }
  for (std::size_t j = 0; j < k; ++j) mask |= std::size_t{1} << (n_qubits - 1 - wires[j]);

  Complex in[8];
  const std::size_t dim = amplitudes.size();
  for (std::size_t base = 0; base < dim; ++base) {
    if (base & mask) continue;
    for (std::size_t m = 0; m < sub; ++m) in[m] = amplitudes[base | offsets[m]];
    for (std::size_t r = 0; r < sub; ++r) {
      Complex acc{0.0, 0.0};
      for (std::size_t c = 0; c < sub; ++c) acc += matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * in[c];
      amplitudes[base | offsets[r]] = acc;
    }
  }
}

void check_wires(const GateSpec& spec, int n_qubits) {
  if (static_cast<int>(spec.wires.size()) != gate_arity(spec.kind)) {
    throw Error(to_string(spec.kind) + " expects " + std::to_string(gate_arity(spec.kind)) +
                " wires, got " + std::to_string(spec.wires.size()));
  }
  for (std::size_t i = 0; i < spec.wires.size(); ++i) {
    if (spec.wires[i] < 0 || spec.wires[i] >= n_qubits) {
      throw Error(to_string(spec.kind) + ": wire " + std::to_string(spec.wires[i]) +
                  " outside a " + std::to_string(n_qubits) + "-qubit register");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (spec.wires[i] == spec.wires[j]) {
        throw Error(to_string(spec.kind) + ": repeated wire " + std::to_string(spec.wires[i]));
      }
    }
  }
}

StateRegister apply_gate(StateRegister state, const GateSpec& spec) {
  check_wires(spec, state.n_qubits());
  apply_matrix(state.amplitudes(), state.n_qubits(), gate_matrix(spec), spec.wires);
  return state;
}

double expectation(std::span<const Complex> amplitudes, int n_qubits, Pauli observable, int wire) {
  if (wire < 0 || wire >= n_qubits) throw Error("measurement wire out of range");
  const std::size_t bit = std::size_t{1} << (n_qubits - 1 - wire);
  double acc = 0.0;
  if (observable == Pauli::Z) {
    for (std::size_t i = 0; i < amplitudes.size(); ++i) {
      acc += (i & bit) ? -std::norm(amplitudes[i]) : std::norm(amplitudes[i]);
    }
  } else {
    // <psi|X|psi> = 2 Re sum_{i: bit clear} conj(a_i) a_{i|bit}.
    for (std::size_t i = 0; i < amplitudes.size(); ++i) {
      if (i & bit) continue;
      acc += 2.0 * (std::conj(amplitudes[i]) * amplitudes[i | bit]).real();
    }
  }
  return acc;
}

double expectation(const StateRegister& state, Pauli observable, int wire) {
  return expectation(state.amplitudes(), state.n_qubits(), observable, wire);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix haar_random_unitary(int dimension, std::uint64_t seed) {
  if (dimension != 2) throw Error("haar_random_unitary supports dimension 2 only");
  Rng rng(seed);
  Matrix z(2, 2);
  const double scale = 1.0 / std::sqrt(2.0);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) z(i, j) = Complex(rng.normal(), rng.normal()) * scale;
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR();
  for (Eigen::Index j = 0; j < 2; ++j) {
    const Complex d = r(j, j);
    const double mag = std::abs(d);
    q.col(j) *= mag > 0.0 ? d / mag : Complex(1.0, 0.0);
  }
  return q;
}

double unitarity_deviation(const Matrix& u) {
  const Matrix d = u.adjoint() * u - Matrix::Identity(u.rows(), u.cols());
  return d.cwiseAbs().maxCoeff();
}

double phase_aligned_deviation(const Matrix& candidate, const Matrix& target) {
  if (candidate.rows() != target.rows() || candidate.cols() != target.cols()) {
    throw Error("phase_aligned_deviation: dimension mismatch");
  }
  Eigen::Index bi = 0, bj = 0;
  target.cwiseAbs().maxCoeff(&bi, &bj);
  const double phase = std::arg(target(bi, bj)) - std::arg(candidate(bi, bj));
  const Matrix aligned = std::exp(kI * phase) * candidate;
  return (aligned - target).cwiseAbs().maxCoeff();
}

}  // namespace hyperking::qsim
