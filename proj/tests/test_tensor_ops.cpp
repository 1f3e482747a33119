#include <cmath>
#include <vector>

#include "doctest.h"

#include "bsr/ops.hpp"
#include "bsr/rng.hpp"
#include "bsr/tensor.hpp"

using namespace bsr;

TEST_CASE("scalar graph matches hand gradient") {
    // f(a) = sum(relu(a) * 3), a = [1, -2, 0.5] -> f = 4.5, df/da = [3, 0, 3]
    Tensor a = Tensor::from_data({3}, {1.0f, -2.0f, 0.5f});
    a.set_requires_grad(true);
    Tape tape;
    Tensor f = sum(mul_scalar(relu(a), 3.0f));
    CHECK(f.item() == doctest::Approx(4.5f));
    tape.backward(f);
    auto g = a.grad().data();
    CHECK(g[0] == doctest::Approx(3.0f));
    CHECK(g[1] == doctest::Approx(0.0f));
    CHECK(g[2] == doctest::Approx(3.0f));
}

TEST_CASE("nll of uniform two-class prediction is ln 2") {
    Tensor logits = Tensor::from_data({2}, {0.25f, 0.25f});
    Tape tape;
    Tensor loss = nll_loss(log_softmax(logits), 1);
    CHECK(loss.item() == doctest::Approx(0.6931472f).epsilon(1e-5));
}
