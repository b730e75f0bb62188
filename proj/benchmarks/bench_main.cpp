#include <benchmark/benchmark.h>

#include "hyperking/autodiff.hpp"
#include "hyperking/discriminator.hpp"
#include "hyperking/generator.hpp"
#include "hyperking/ops.hpp"
#include "hyperking/quantum_layers.hpp"
#include "hyperking/random.hpp"

using namespace hyperking;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape), 0.0);
  for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// args: channels, spatial extent, kernel size
void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto s = static_cast<std::size_t>(state.range(2));
  Rng rng(1);
  const auto x = random_tensor({c, n, n}, rng);
  const auto k = random_tensor({2 * c, c, s, s}, rng);
  const auto b = random_tensor({2 * c}, rng);
  for (auto _ : state) {
    Tape tape;
    Var kv = tape.leaf(k, true);
    Var out = ops::conv2d(tape.constant(x), kv, tape.leaf(b, true), 0);
    tape.backward(ops::sum(out));
    benchmark::DoNotOptimize(tape.grad(kv).data().data());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({8, 32, 5})->Args({16, 64, 5})->Args({32, 56, 17})->Unit(benchmark::kMillisecond);

void run_circuit_layer(benchmark::State& state, const qlayers::Circuit& circuit, std::size_t angles) {
  const auto registers = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const auto f = random_tensor({registers, circuit.feature_width()}, rng);
  const auto a = random_tensor({angles}, rng);
  for (auto _ : state) {
    Tape tape;
    Var av = tape.leaf(a, true);
    tape.backward(ops::sum(qlayers::circuit_layer(circuit, tape.leaf(f, true), av)));
    benchmark::DoNotOptimize(tape.grad(av).data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(registers));
}

void BM_GeneratorCore(benchmark::State& state) {
  run_circuit_layer(state, model::generator_core_circuit(), model::kCoreAngles);
}
BENCHMARK(BM_GeneratorCore)->Arg(32)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_ClassifierCircuit(benchmark::State& state) {
  const auto circuit = model::he_classifier_circuit(4, qlayers::Encoding::Angle);
  run_circuit_layer(state, circuit, circuit.parameter_count());
}
BENCHMARK(BM_ClassifierCircuit)->Arg(32)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
