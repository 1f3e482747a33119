#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"

#include "bsr/attack.hpp"
#include "bsr/dataset.hpp"
#include "bsr/model.hpp"
#include "bsr/ops.hpp"
#include "bsr/rng.hpp"
#include "bsr/tensor.hpp"

using namespace bsr;

namespace {

struct AttackFixture {
    LabeledDataset data;
    Classifier model;

    AttackFixture() {
        SyntheticConfig dc;
        dc.count = 12;
        dc.seed = 19;
        data = synthesize_shapes(dc);
        model = Classifier::build("conv3", {3, dc.image_size, dc.image_size}, dc.num_classes, 55);
        model.train(data, 2, 0.01f, 4, 4);
    }
};

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i) {
        if (ad[i] != bd[i]) return false;
    }
    return true;
}

float linf(const Tensor& a, const Tensor& b) {
    auto ad = a.data();
    auto bd = b.data();
    float m = 0.0f;
    for (std::size_t i = 0; i < ad.size(); ++i) m = std::max(m, std::fabs(ad[i] - bd[i]));
    return m;
}

AttackConfig bsr_attack(int n, float tau, int copies) {
    AttackConfig c;
    BsrConfig bc;
    bc.n = n;
    bc.tau = tau;
    bc.copies = copies;
    c.transform.nodes.push_back(bc);
    return c;
}

}  // namespace

TEST_CASE("attack config validation") {
    AttackConfig c;
    c.epsilon = -0.1f;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = AttackConfig{};
    c.num_iters = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = AttackConfig{};
    c.decay = -1.0f;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = AttackConfig{};
    CHECK(c.effective_step() == doctest::Approx(c.epsilon / c.num_iters));
    c.step_size = 0.01f;
    CHECK(c.effective_step() == doctest::Approx(0.01f));
}

TEST_CASE("degenerate block transform reduces to the plain momentum attack") {
    AttackFixture fx;
    AttackConfig plain;
    plain.seed = 77;

    AttackConfig degenerate = bsr_attack(1, 0.0f, 1);
    degenerate.seed = 77;

    for (int i = 0; i < 4; ++i) {
        AttackResult a = run_attack(fx.model, fx.data.images[i], fx.data.labels[i], plain);
        AttackResult b = run_attack(fx.model, fx.data.images[i], fx.data.labels[i], degenerate);
        CHECK(bitwise_equal(a.adversarial, b.adversarial));
    }
}

TEST_CASE("zero decay reproduces an independently coded iterative attack") {
    AttackFixture fx;
    AttackConfig cfg;
    cfg.decay = 0.0f;
    cfg.seed = 5;

    const Tensor& x0 = fx.data.images[0];
    const int label = fx.data.labels[0];
    AttackResult got = run_attack(fx.model, x0, label, cfg);

    // Plain iterative sign attack written directly against the ops layer.
    const float eps = cfg.epsilon;
    const float alpha = cfg.effective_step();
    Tensor x = x0.clone();
    for (int t = 0; t < cfg.num_iters; ++t) {
        Tensor probe = x.clone();
        probe.set_requires_grad(true);
        {
            Tape tape;
            Tensor loss = nll_loss(log_softmax(fx.model.forward(probe)), label);
            tape.backward(loss);
        }
        auto g = probe.grad().data();
        auto xd = x.data();
        auto od = x0.data();
        for (std::size_t i = 0; i < xd.size(); ++i) {
            float step = g[i] > 0.0f ? alpha : (g[i] < 0.0f ? -alpha : 0.0f);
            float v = xd[i] + step;
            v = std::min(std::max(v, od[i] - eps), od[i] + eps);
            v = std::min(std::max(v, 0.0f), 1.0f);
            xd[i] = v;
        }
    }
    CHECK(linf(got.adversarial, x) == 0.0f);
}

TEST_CASE("single-step full-budget attack equals the one-shot attack") {
    AttackFixture fx;
    AttackConfig cfg;
    cfg.num_iters = 1;
    cfg.step_size = cfg.epsilon;
    cfg.decay = 0.0f;

    for (int i = 0; i < 4; ++i) {
        AttackResult a = run_attack(fx.model, fx.data.images[i], fx.data.labels[i], cfg);
        Tensor b = fgsm(fx.model, fx.data.images[i], fx.data.labels[i], cfg.epsilon);
        CHECK(bitwise_equal(a.adversarial, b));
    }
}

TEST_CASE("momentum update matches the formula on a crafted gradient") {
    AttackConfig cfg;
    cfg.epsilon = 8.0f / 255.0f;
    cfg.num_iters = 4;
    cfg.decay = 1.0f;

    Tensor x0 = Tensor::from_data({1, 2, 2}, {0.5f, 0.5f, 0.5f, 0.5f});
    AttackState st;
    st.momentum = Tensor::zeros({1, 2, 2});
    st.x_adv = x0.clone();

    Tensor g1 = Tensor::from_data({1, 2, 2}, {2.0f, -1.0f, 0.5f, 0.5f});  // L1 = 4
    float l1 = momentum_step(st, g1, cfg, x0);
    CHECK(l1 == doctest::Approx(4.0f));
    auto m = st.momentum.data();
    CHECK(m[0] == doctest::Approx(0.5f));
    CHECK(m[1] == doctest::Approx(-0.25f));
    CHECK(m[2] == doctest::Approx(0.125f));
    CHECK(m[3] == doctest::Approx(0.125f));
    const float alpha = cfg.effective_step();
    auto xd = st.x_adv.data();
    CHECK(xd[0] == doctest::Approx(0.5f + alpha));
    CHECK(xd[1] == doctest::Approx(0.5f - alpha));

    // Second step accumulates: momentum = old + g/L1 with decay 1.
    Tensor g2 = Tensor::from_data({1, 2, 2}, {-1.0f, 0.0f, 0.0f, 1.0f});  // L1 = 2
    momentum_step(st, g2, cfg, x0);
    m = st.momentum.data();
    CHECK(m[0] == 0.0f);  // 0.5 + (-1)/2, exactly
    CHECK(m[3] == doctest::Approx(0.125f + 0.5f));
    xd = st.x_adv.data();
    // Sign of exactly zero momentum contributes no step on coordinate 0.
    CHECK(xd[0] == doctest::Approx(0.5f + alpha));
    CHECK(xd[1] == doctest::Approx(0.5f - 2 * alpha));

    // Zero gradient: momentum decays, no normalization blowup.
    Tensor g3 = Tensor::zeros({1, 2, 2});
    float l1z = momentum_step(st, g3, cfg, x0);
    CHECK(l1z == 0.0f);
}

TEST_CASE("two-copy ensemble of the same model attacks like the model") {
    AttackFixture fx;
    AttackConfig cfg;
    cfg.seed = 11;
    for (int i = 0; i < 3; ++i) {
        AttackResult single = run_attack(fx.model, fx.data.images[i], fx.data.labels[i], cfg);
        AttackResult doubled = run_attack({&fx.model, &fx.model}, fx.data.images[i],
                                          fx.data.labels[i], cfg);
        CHECK(bitwise_equal(single.adversarial, doubled.adversarial));
    }
}

TEST_CASE("perturbations respect the budget and pixel range at every step") {
    AttackFixture fx;
    std::vector<AttackConfig> configs;
    configs.push_back(AttackConfig{});
    configs.push_back(bsr_attack(2, 24.0f, 4));
    {
        AttackConfig c;
        c.transform.nodes.push_back(DimConfig{});
        c.transform.nodes.push_back(TimConfig{});
        configs.push_back(c);
    }
    {
        AttackConfig c;
        c.transform.nodes.push_back(SimConfig{});
        c.decay = 0.0f;
        configs.push_back(c);
    }

    const float bound = 16.0f / 255.0f + std::ldexp(1.0f, -20);
    for (std::size_t k = 0; k < configs.size(); ++k) {
        AttackConfig cfg = configs[k];
        cfg.seed = 1000 + k;
        for (int i = 0; i < 3; ++i) {
            const Tensor& x0 = fx.data.images[i];
            int violations = 0;
            auto watch = [&](int, const Tensor& x_adv) {
                if (linf(x_adv, x0) > bound) ++violations;
                for (float v : x_adv.data()) {
                    if (v < 0.0f || v > 1.0f) ++violations;
                }
            };
            AttackResult r = run_attack(fx.model, x0, fx.data.labels[i], cfg, nullptr, watch);
            watch(cfg.num_iters, r.adversarial);
            CHECK(violations == 0);
        }
    }
}

TEST_CASE("attack trace records per-iteration loss and gradient norms") {
    AttackFixture fx;
    AttackConfig cfg;
    cfg.record_trace = true;
    cfg.num_iters = 5;
    AttackResult r = run_attack(fx.model, fx.data.images[0], fx.data.labels[0], cfg);
    CHECK(r.trace.loss.size() == 5);
    CHECK(r.trace.grad_l1.size() == 5);
}

TEST_CASE("attack rejects malformed inputs") {
    AttackFixture fx;
    AttackConfig cfg;
    CHECK_THROWS_AS(run_attack(std::vector<const Classifier*>{}, fx.data.images[0], 0, cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_attack(fx.model, fx.data.images[0], -1, cfg), std::invalid_argument);
    CHECK_THROWS_AS(run_attack(fx.model, fx.data.images[0], 99, cfg), std::invalid_argument);
    Tensor bad = Tensor::full({3, 32, 32}, 1.5f);
    CHECK_THROWS_AS(run_attack(fx.model, bad, 0, cfg), std::invalid_argument);
}

TEST_CASE("averaged gradient shrinks no budget and uses the requested copies") {
    AttackFixture fx;
    Rng rng(2);
    TransformKind kind;
    BsrConfig bc;
    bc.copies = 6;
    kind.nodes.push_back(bc);
    GradientEstimate est = average_gradient({&fx.model}, fx.data.images[0], fx.data.labels[0],
                                            kind, 6, rng);
    CHECK(est.copies_used == 6);
    CHECK(est.g.shape() == fx.data.images[0].shape());

    TransformKind none;
    GradientEstimate plain = average_gradient({&fx.model}, fx.data.images[0], fx.data.labels[0],
                                              none, 6, rng);
    CHECK(plain.copies_used == 1);
}
