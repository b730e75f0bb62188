#include "hyperking/quantum_layers.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <memory>
#include <numbers>

#include "hyperking/parallel.hpp"

namespace hyperking::qlayers {
namespace {

using qsim::GateKind;
using qsim::GateSpec;
using qsim::Matrix;

GateKind rotation_kind(Axis axis) {
  switch (axis) {
    case Axis::X: return GateKind::RX;
    case Axis::Y: return GateKind::RY;
    case Axis::Z: return GateKind::RZ;
  }
  throw Error("unknown rotation axis");
}

std::array<std::pair<int, int>, 2> ising_wires(IsingPairing pairing) {
  if (pairing == IsingPairing::First) return {{{0, 1}, {2, 3}}};
  return {{{1, 2}, {0, 3}}};
}

constexpr std::array<std::array<int, 3>, 4> kToffoliChain{{{0, 1, 2}, {1, 2, 3}, {2, 3, 0}, {3, 0, 1}}};

void require_angles(std::span<const double> angles, std::size_t expected, const char* layer) {
  if (angles.size() != expected) {
    throw Error(std::string(layer) + ": expected " + std::to_string(expected) + " angles, got " +
                std::to_string(angles.size()));
  }
}

void require_four_qubits(int n, const char* layer) {
  if (n != 4) throw Error(std::string(layer) + " requires 4-qubit registers, got " + std::to_string(n));
}

void apply_to_batch(RegisterBatch& batch, const Matrix& m, std::span<const int> wires) {
  for (std::size_t r = 0; r < batch.size(); ++r) {
    qsim::apply_matrix(batch.amplitudes(r), batch.n_qubits(), m, wires);
  }
}

void apply_gate_to_batch(RegisterBatch& batch, const GateSpec& spec) {
  qsim::check_wires(spec, batch.n_qubits());
  apply_to_batch(batch, qsim::gate_matrix(spec), spec.wires);
}

int log2_exact(std::size_t width) {
  if (width < 2 || (width & (width - 1)) != 0) {
    throw Error("amplitude embedding needs a power-of-two row width >= 2, got " + std::to_string(width));
  }
  return std::countr_zero(width);
}

void check_features(const Circuit& circuit, const Tensor& features) {
  if (features.rank() != 2 || features.extent(1) != circuit.feature_width()) {
    throw ShapeError("circuit expects features of shape R x " + std::to_string(circuit.feature_width()) +
                     ", got " + shape_to_string(features.shape()));
  }
}

// Writes the embedded state of one feature row into `psi`. Returns the row
// norm for amplitude encoding (0 for a zero row) and 1 for angle encoding.
double embed_row(const Circuit& circuit, std::span<const double> row, std::span<Complex> psi) {
  const int n = circuit.n_qubits();
  if (circuit.encoding() == Encoding::Amplitude) {
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    std::fill(psi.begin(), psi.end(), Complex{0.0, 0.0});
    if (norm == 0.0) {
      psi[0] = 1.0;
      return 0.0;
    }
    for (std::size_t i = 0; i < row.size(); ++i) psi[i] = row[i] / norm;
    return norm;
  }
  // Product state of R_Y(f_q)|0>.
  std::fill(psi.begin(), psi.end(), Complex{0.0, 0.0});
  psi[0] = 1.0;
  for (int q = 0; q < n; ++q) {
    qsim::apply_matrix(psi, n, qsim::gate_matrix(GateSpec::ry(q, row[static_cast<std::size_t>(q)])),
                       std::array<int, 1>{q});
  }
  return 1.0;
}

struct CompiledOp {
  GateSpec spec;
  Matrix matrix;
};

std::vector<CompiledOp> compile(const Circuit& circuit, std::span<const double> params, int shifted_op = -1,
                                double shift = 0.0) {
  if (params.size() != circuit.parameter_count()) {
    throw Error("circuit expects " + std::to_string(circuit.parameter_count()) + " parameters, got " +
                std::to_string(params.size()));
  }
  std::vector<CompiledOp> out;
  out.reserve(circuit.ops().size());
  for (std::size_t k = 0; k < circuit.ops().size(); ++k) {
    const CircuitOp& op = circuit.ops()[k];
    GateSpec spec{op.kind, 0.0, op.wires};
    if (op.param >= 0) spec.angle = params[static_cast<std::size_t>(op.param)];
    if (static_cast<int>(k) == shifted_op) spec.angle += shift;
    out.push_back({spec, qsim::gate_matrix(spec)});
  }
  return out;
}

Tensor run_compiled(const Circuit& circuit, const std::vector<CompiledOp>& ops, const Tensor& features,
                    EmbedDiagnostics* diagnostics) {
  check_features(circuit, features);
  const std::size_t registers = features.extent(0);
  const std::size_t width = circuit.feature_width();
  const auto& wires = circuit.measured_wires();
  Tensor out({registers, wires.size()});
  RegisterBatch batch(registers, circuit.n_qubits());
  std::size_t zero_rows = 0;
  for (std::size_t r = 0; r < registers; ++r) {
    const double norm = embed_row(circuit, features.data().subspan(r * width, width), batch.amplitudes(r));
    if (norm == 0.0) ++zero_rows;
    for (const auto& op : ops) qsim::apply_matrix(batch.amplitudes(r), circuit.n_qubits(), op.matrix, op.spec.wires);
    for (std::size_t w = 0; w < wires.size(); ++w) {
      out[r * wires.size() + w] = qsim::expectation(batch.amplitudes(r), circuit.n_qubits(), circuit.observable(), wires[w]);
    }
  }
  if (diagnostics) diagnostics->zero_norm_rows += zero_rows;
  return out;
}

// Applies a single-wire Pauli to a copy of psi.
void apply_pauli(std::span<Complex> psi, int n, Pauli p, int wire) {
  const std::size_t bit = std::size_t{1} << (n - 1 - wire);
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (p == Pauli::Z) {
      if (i & bit) psi[i] = -psi[i];
    } else if (!(i & bit)) {
      std::swap(psi[i], psi[i | bit]);
    }
  }
}

// 2 Re <phi| M |psi> where M acts on `wires`.
double overlap_real(std::span<const Complex> phi, std::span<const Complex> psi, int n, const Matrix& m,
                    std::span<const int> wires) {
  std::vector<Complex> tmp(psi.begin(), psi.end());
  qsim::apply_matrix(tmp, n, m, wires);
  Complex acc{0.0, 0.0};
  for (std::size_t i = 0; i < tmp.size(); ++i) acc += std::conj(phi[i]) * tmp[i];
  return 2.0 * acc.real();
}

}  // namespace

// ---------------------------------------------------------------------------
// RegisterBatch and batch layers

RegisterBatch::RegisterBatch(std::size_t registers, int n_qubits) : registers_(registers), n_qubits_(n_qubits) {
  if (n_qubits < 1 || n_qubits > qsim::kMaxQubits) throw Error("unsupported register size");
  storage_.assign(registers * dimension(), Complex{0.0, 0.0});
  for (std::size_t r = 0; r < registers; ++r) storage_[r * dimension()] = 1.0;
}

qsim::StateRegister RegisterBatch::at(std::size_t r) const {
  auto amps = amplitudes(r);
  return qsim::StateRegister::from_amplitudes(std::vector<Complex>(amps.begin(), amps.end()));
}

RegisterBatch angle_embed(const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("angle_embed expects R x n features");
  Circuit c(static_cast<int>(features.extent(1)), Encoding::Angle);
  RegisterBatch batch(features.extent(0), c.n_qubits());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    embed_row(c, features.data().subspan(r * c.feature_width(), c.feature_width()), batch.amplitudes(r));
  }
  return batch;
}

RegisterBatch amplitude_embed(const Tensor& features, EmbedDiagnostics* diagnostics) {
  if (features.rank() != 2) throw ShapeError("amplitude_embed expects R x 2^n features");
  Circuit c(log2_exact(features.extent(1)), Encoding::Amplitude);
  RegisterBatch batch(features.extent(0), c.n_qubits());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const double norm =
        embed_row(c, features.data().subspan(r * c.feature_width(), c.feature_width()), batch.amplitudes(r));
    if (norm == 0.0 && diagnostics) ++diagnostics->zero_norm_rows;
  }
  return batch;
}

RegisterBatch rotation_layer(RegisterBatch batch, Axis axis, std::span<const double> angles) {
  require_angles(angles, static_cast<std::size_t>(batch.n_qubits()), "rotation_layer");
  for (int q = 0; q < batch.n_qubits(); ++q) {
    apply_gate_to_batch(batch, GateSpec{rotation_kind(axis), angles[static_cast<std::size_t>(q)], {q}});
  }
  return batch;
}

RegisterBatch ising_layer(RegisterBatch batch, IsingPairing pairing, std::span<const double> angles) {
  require_four_qubits(batch.n_qubits(), "ising_layer");
  require_angles(angles, 2, "ising_layer");
  const auto pairs = ising_wires(pairing);
  for (std::size_t i = 0; i < 2; ++i) {
    apply_gate_to_batch(batch, GateSpec::xx(pairs[i].first, pairs[i].second, angles[i]));
  }
  return batch;
}

RegisterBatch toffoli_entangle(RegisterBatch batch) {
  require_four_qubits(batch.n_qubits(), "toffoli_entangle");
  for (const auto& w : kToffoliChain) apply_gate_to_batch(batch, GateSpec::toffoli(w[0], w[1], w[2]));
  return batch;
}

RegisterBatch em_module(RegisterBatch batch, int controller, std::span<const int> targets,
                        std::span<const double> angles) {
  require_angles(angles, targets.size(), "em_module");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    apply_gate_to_batch(batch, GateSpec::crx(controller, targets[i], angles[i]));
  }
  return batch;
}

Tensor measure_layer(const RegisterBatch& batch, Pauli observable, std::span<const int> wires) {
  Tensor out({batch.size(), wires.size()});
  for (std::size_t r = 0; r < batch.size(); ++r) {
    for (std::size_t w = 0; w < wires.size(); ++w) {
      out[r * wires.size() + w] = qsim::expectation(batch.amplitudes(r), batch.n_qubits(), observable, wires[w]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Circuit

Circuit::Circuit(int n_qubits, Encoding encoding) : n_qubits_(n_qubits), encoding_(encoding) {
  if (n_qubits < 1 || n_qubits > qsim::kMaxQubits) {
    throw Error("circuit register size must be in [1, 8], got " + std::to_string(n_qubits));
  }
}

std::size_t Circuit::feature_width() const noexcept {
  return encoding_ == Encoding::Angle ? static_cast<std::size_t>(n_qubits_) : (std::size_t{1} << n_qubits_);
}

std::size_t Circuit::add_parameterized(GateKind kind, std::vector<int> wires) {
  GateSpec probe{kind, 0.0, wires};
  qsim::check_wires(probe, n_qubits_);
  ops_.push_back({kind, std::move(wires), static_cast<int>(parameter_count_)});
  return parameter_count_++;
}

std::size_t Circuit::add_rotation_layer(Axis axis) {
  const std::size_t first = parameter_count_;
  for (int q = 0; q < n_qubits_; ++q) add_parameterized(rotation_kind(axis), {q});
  return first;
}

std::size_t Circuit::add_ising_layer(IsingPairing pairing) {
  require_four_qubits(n_qubits_, "ising_layer");
  const std::size_t first = parameter_count_;
  for (const auto& [a, b] : ising_wires(pairing)) add_parameterized(GateKind::XX, {a, b});
  return first;
}

void Circuit::add_toffoli_entangle() {
  require_four_qubits(n_qubits_, "toffoli_entangle");
  for (const auto& w : kToffoliChain) add_fixed_gate(GateKind::Toffoli, {w[0], w[1], w[2]});
}

std::size_t Circuit::add_em_module(int controller, const std::vector<int>& targets) {
  for (int t : targets) {
    if (t == controller) throw Error("em_module: controller " + std::to_string(controller) + " is also a target");
  }
  const std::size_t first = parameter_count_;
  for (int t : targets) add_parameterized(GateKind::CRX, {controller, t});
  return first;
}

void Circuit::add_fixed_gate(GateKind kind, std::vector<int> wires) {
  if (qsim::is_parameterized(kind)) throw Error("add_fixed_gate: " + qsim::to_string(kind) + " needs a parameter");
  qsim::check_wires(GateSpec{kind, 0.0, wires}, n_qubits_);
  ops_.push_back({kind, std::move(wires), -1});
}

void Circuit::set_measurement(Pauli observable, std::vector<int> wires) {
  for (int w : wires) {
    if (w < 0 || w >= n_qubits_) throw Error("measurement wire " + std::to_string(w) + " out of range");
  }
  observable_ = observable;
  measured_ = std::move(wires);
}

// ---------------------------------------------------------------------------
// Evaluation and differentiation

Tensor run_circuit(const Circuit& circuit, const Tensor& features, std::span<const double> params,
                   EmbedDiagnostics* diagnostics) {
  return run_compiled(circuit, compile(circuit, params), features, diagnostics);
}

Var circuit_layer(const Circuit& circuit, Var features, Var params) {
  const Tensor& f = features.value();
  check_features(circuit, f);
  if (params.shape() != Shape{circuit.parameter_count()}) {
    throw ShapeError("circuit_layer: expected " + std::to_string(circuit.parameter_count()) +
                     " parameters, got shape " + shape_to_string(params.shape()));
  }
  auto ops = std::make_shared<const std::vector<CompiledOp>>(compile(circuit, params.value().data()));
  Tensor out = run_compiled(circuit, *ops, f, nullptr);

  return features.tape()->record(
      std::move(out), {features, params},
      [circuit, ops, features](const Tensor& dy, std::span<Tensor* const> grads) {
        const Tensor& f = features.value();
        const int n = circuit.n_qubits();
        const std::size_t dim = std::size_t{1} << n;
        const std::size_t registers = f.extent(0);
        const std::size_t width = circuit.feature_width();
        const auto& wires = circuit.measured_wires();
        const std::size_t n_params = circuit.parameter_count();
        // Per-register parameter gradients, reduced in register order below.
        std::vector<double> partial(grads[1] ? registers * n_params : 0, 0.0);

        parallel_for(registers, [&](std::size_t r) {
          std::vector<Complex> psi(dim), phi(dim, Complex{0.0, 0.0}), tmp(dim);
          const auto row = f.data().subspan(r * width, width);
          const double norm = embed_row(circuit, row, psi);
          for (const auto& op : *ops) qsim::apply_matrix(psi, n, op.matrix, op.spec.wires);

          // phi = sum_w dy[r,w] P_w psi
          for (std::size_t w = 0; w < wires.size(); ++w) {
            const double g = dy[r * wires.size() + w];
            if (g == 0.0) continue;
            tmp = psi;
            apply_pauli(tmp, n, circuit.observable(), wires[w]);
            for (std::size_t i = 0; i < dim; ++i) phi[i] += g * tmp[i];
          }

          for (std::size_t k = ops->size(); k-- > 0;) {
            const CompiledOp& op = (*ops)[k];
            const Matrix adj = op.matrix.adjoint();
            qsim::apply_matrix(psi, n, adj, op.spec.wires);
            const int p = circuit.ops()[k].param;
            if (p >= 0 && grads[1]) {
              partial[r * n_params + static_cast<std::size_t>(p)] +=
                  overlap_real(phi, psi, n, qsim::gate_matrix_derivative(op.spec), op.spec.wires);
            }
            qsim::apply_matrix(phi, n, adj, op.spec.wires);
          }

          if (!grads[0]) return;
          double* df = grads[0]->data().data() + r * width;
          if (circuit.encoding() == Encoding::Angle) {
            for (int q = n; q-- > 0;) {
              const GateSpec ry = GateSpec::ry(q, row[static_cast<std::size_t>(q)]);
              const std::array<int, 1> wire{q};
              const Matrix adj = qsim::gate_matrix(ry).adjoint();
              qsim::apply_matrix(psi, n, adj, wire);
              df[q] += overlap_real(phi, psi, n, qsim::gate_matrix_derivative(ry), wire);
              qsim::apply_matrix(phi, n, adj, wire);
            }
          } else if (norm > 0.0) {
            // psi0 = x / |x|: project out the radial direction.
            double radial = 0.0;
            for (std::size_t i = 0; i < dim; ++i) radial += psi[i].real() * 2.0 * phi[i].real();
            for (std::size_t i = 0; i < dim; ++i) {
              df[i] += (2.0 * phi[i].real() - psi[i].real() * radial) / norm;
            }
          }
        });

        if (grads[1]) {
          Tensor& dp = *grads[1];
          for (std::size_t r = 0; r < registers; ++r)
            for (std::size_t p = 0; p < n_params; ++p) dp[p] += partial[r * n_params + p];
        }
      });
}

double param_shift_grad(const Circuit& circuit, const Tensor& features, std::span<const double> params,
                        std::size_t index, const Readout& readout) {
  if (index >= circuit.parameter_count()) {
    throw Error("param_shift_grad: parameter index " + std::to_string(index) + " out of range (" +
                std::to_string(circuit.parameter_count()) + " parameters)");
  }
  const auto eval = [&](int op, double shift) {
    return readout(run_compiled(circuit, compile(circuit, params, op, shift), features, nullptr));
  };
  constexpr double half_pi = std::numbers::pi / 2.0;
  double total = 0.0;
  for (std::size_t k = 0; k < circuit.ops().size(); ++k) {
    const CircuitOp& op = circuit.ops()[k];
    if (op.param != static_cast<int>(index)) continue;
    const int ki = static_cast<int>(k);
    if (op.kind == GateKind::CRX) {
      const double c1 = (std::numbers::sqrt2 + 1.0) / (4.0 * std::numbers::sqrt2);
      const double c2 = (std::numbers::sqrt2 - 1.0) / (4.0 * std::numbers::sqrt2);
      total += c1 * (eval(ki, half_pi) - eval(ki, -half_pi)) - c2 * (eval(ki, 3.0 * half_pi) - eval(ki, -3.0 * half_pi));
    } else {
      total += 0.5 * (eval(ki, half_pi) - eval(ki, -half_pi));
    }
  }
  return total;
}

}  // namespace hyperking::qlayers
