#include <benchmark/benchmark.h>

#include "bsr/ops.hpp"
#include "bsr/rng.hpp"
#include "bsr/tensor.hpp"

namespace {

bsr::Tensor random_tensor(bsr::Shape shape, std::uint64_t seed) {
    bsr::Tensor t = bsr::Tensor::zeros(std::move(shape));
    bsr::Rng rng(seed);
    for (float& v : t.data()) v = rng.uniform_float(-1.0f, 1.0f);
    return t;
}

void BM_conv2d_forward(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    bsr::Tensor x = random_tensor({3, 32, 32}, 1);
    bsr::Tensor w = random_tensor({c, 3, 3, 3}, 2);
    bsr::Tensor b = random_tensor({c}, 3);
    for (auto _ : state) {
        bsr::Tensor y = bsr::conv2d(x, w, b, 1, 1);
        benchmark::DoNotOptimize(y.data().data());
    }
}
BENCHMARK(BM_conv2d_forward)->Arg(8)->Arg(16)->Arg(32);

void BM_conv2d_backward(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    bsr::Tensor w = random_tensor({c, 3, 3, 3}, 2);
    bsr::Tensor b = random_tensor({c}, 3);
    w.set_requires_grad(true);
    b.set_requires_grad(true);
    for (auto _ : state) {
        bsr::Tensor x = random_tensor({3, 32, 32}, 1);
        x.set_requires_grad(true);
        bsr::Tape tape;
        bsr::Tensor y = bsr::sum(bsr::conv2d(x, w, b, 1, 1));
        tape.backward(y);
        benchmark::DoNotOptimize(x.grad().data().data());
        w.zero_grad();
        b.zero_grad();
    }
}
BENCHMARK(BM_conv2d_backward)->Arg(8)->Arg(16);

void BM_matmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    bsr::Tensor a = random_tensor({n, n}, 4);
    bsr::Tensor b = random_tensor({n, n}, 5);
    for (auto _ : state) {
        bsr::Tensor y = bsr::matmul(a, b);
        benchmark::DoNotOptimize(y.data().data());
    }
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(128);

} // namespace
