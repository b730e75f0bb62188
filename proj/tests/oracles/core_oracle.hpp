#pragma once

// The generator core operator assembled column by column from individual
// gate applications, independent of the Kronecker-product construction.

#include <complex>
#include <vector>

#include "hyperking/fe_synthesis.hpp"
#include "hyperking/qsim.hpp"

namespace oracle {

inline hyperking::qsim::Matrix core_unitary_by_gates(const hyperking::fe::CoreParams& p) {
  using namespace hyperking;
  const auto a = fe::circuit_angles(p);
  std::vector<qsim::GateSpec> gates;
  for (int k = 0; k < 4; ++k) gates.push_back(qsim::GateSpec::rz(k, a[k]));
  gates.push_back(qsim::GateSpec::xx(0, 1, a[4]));
  gates.push_back(qsim::GateSpec::xx(2, 3, a[5]));
  for (int k = 0; k < 4; ++k) gates.push_back(qsim::GateSpec::ry(k, a[6 + k]));
  gates.push_back(qsim::GateSpec::xx(1, 2, a[10]));
  gates.push_back(qsim::GateSpec::xx(0, 3, a[11]));
  for (int k = 0; k < 4; ++k) gates.push_back(qsim::GateSpec::rz(k, a[12 + k]));
  const qsim::Complex phase = std::exp(qsim::Complex(0.0, p.p[0] + p.p[1] + p.p[2] + p.p[3]));
  qsim::Matrix out(16, 16);
  for (Eigen::Index col = 0; col < 16; ++col) {
    auto s = qsim::StateRegister::basis(4, static_cast<std::size_t>(col));
    for (const auto& g : gates) s = qsim::apply_gate(s, g);
    for (Eigen::Index row = 0; row < 16; ++row) out(row, col) = phase * s.amplitudes()[static_cast<std::size_t>(row)];
  }
  return out;
}

}  // namespace oracle
