#include "bsr/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bsr/ops.hpp"

namespace bsr {

namespace {

float sign_of(float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); }

void check_models(const std::vector<const Classifier*>& models, int label) {
    if (models.empty()) throw std::invalid_argument("attack: no models supplied");
    for (const Classifier* m : models) {
        if (m == nullptr || !m->defined()) throw std::invalid_argument("attack: undefined model");
        if (m->input_shape() != models[0]->input_shape() ||
            m->num_classes() != models[0]->num_classes()) {
            throw std::invalid_argument("attack: ensemble models disagree on input shape or classes");
        }
    }
    if (label < 0 || label >= models[0]->num_classes()) {
        throw std::invalid_argument("attack: label " + std::to_string(label) + " out of range");
    }
}

Tensor ensemble_logits(const std::vector<const Classifier*>& models, const Tensor& image) {
    Tensor logits = models[0]->forward(image);
    if (models.size() == 1) return logits;
    for (std::size_t i = 1; i < models.size(); ++i) {
        logits = add(logits, models[i]->forward(image));
    }
    return mul_scalar(logits, 1.0f / static_cast<float>(models.size()));
}

Tensor ensemble_nll(const std::vector<const Classifier*>& models, const Tensor& image, int label) {
    return nll_loss(log_softmax(ensemble_logits(models, image)), label);
}

}  // namespace

void AttackConfig::validate() const {
    if (epsilon < 0.0f) throw std::invalid_argument("attack: epsilon must be >= 0");
    if (num_iters < 1) throw std::invalid_argument("attack: num_iters must be >= 1");
    if (decay < 0.0f) throw std::invalid_argument("attack: decay must be >= 0");
    transform.validate();
}

float AttackConfig::effective_step() const {
    return step_size > 0.0f ? step_size : epsilon / static_cast<float>(num_iters);
}

GradientEstimate average_gradient(const std::vector<const Classifier*>& models, const Tensor& x,
                                  int label, const TransformKind& transform, int copies, Rng& rng,
                                  const std::vector<Tensor>* admix_pool) {
    check_models(models, label);
    if (copies < 1) throw std::invalid_argument("average_gradient: copies must be >= 1");

    if (transform.none()) {
        Tape tape;
        Tensor xin = x.clone();
        xin.set_requires_grad(true);
        Tensor loss = ensemble_nll(models, xin, label);
        tape.backward(loss);
        return {xin.grad().clone(), 1, loss.item()};
    }

    Tensor accum = Tensor::zeros(x.shape());
    auto acc = accum.data();
    double loss_sum = 0.0;
    for (int copy = 0; copy < copies; ++copy) {
        Tape tape;
        Tensor xin = x.clone();
        xin.set_requires_grad(true);
        std::vector<Tensor> bundle = transform_bundle(xin, transform, rng, admix_pool);
        Tensor loss = ensemble_nll(models, bundle[0], label);
        for (std::size_t i = 1; i < bundle.size(); ++i) {
            loss = add(loss, ensemble_nll(models, bundle[i], label));
        }
        if (bundle.size() > 1) {
            loss = mul_scalar(loss, 1.0f / static_cast<float>(bundle.size()));
        }
        tape.backward(loss);
        loss_sum += loss.item();
        auto g = xin.grad().data();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
    }
    for (float& v : acc) v /= static_cast<float>(copies);
    return {accum, copies, static_cast<float>(loss_sum / copies)};
}

float momentum_step(AttackState& state, const Tensor& g_bar, const AttackConfig& cfg,
                    const Tensor& x_orig) {
    if (g_bar.shape() != state.x_adv.shape() || x_orig.shape() != state.x_adv.shape()) {
        throw std::invalid_argument("momentum_step: shape mismatch");
    }
    auto g = g_bar.data();
    double l1d = 0.0;
    for (float v : g) l1d += std::fabs(v);
    const float l1 = static_cast<float>(l1d);

    auto mom = state.momentum.data();
    if (l1 == 0.0f) {
        for (std::size_t i = 0; i < mom.size(); ++i) mom[i] *= cfg.decay;
    } else {
        for (std::size_t i = 0; i < mom.size(); ++i) mom[i] = cfg.decay * mom[i] + g[i] / l1;
    }

    const float alpha = cfg.effective_step();
    auto x = state.x_adv.data();
    auto x0 = x_orig.data();
    const float budget = cfg.epsilon + 0x1.0p-20f;
    for (std::size_t i = 0; i < x.size(); ++i) {
        float v = x[i] + alpha * sign_of(mom[i]);
        const float lo = x0[i] - cfg.epsilon;
        const float hi = x0[i] + cfg.epsilon;
        v = std::min(std::max(v, lo), hi);
        if (cfg.clip_to_valid_range) v = std::min(std::max(v, 0.0f), 1.0f);
        if (std::fabs(v - x0[i]) > budget) {
            throw std::logic_error("momentum_step: perturbation budget violated after clipping");
        }
        x[i] = v;
    }
    ++state.t;
    return l1;
}

Tensor fgsm(const Classifier& model, const Tensor& x, int label, float epsilon) {
    if (epsilon < 0.0f) throw std::invalid_argument("fgsm: epsilon must be >= 0");
    const std::vector<const Classifier*> models{&model};
    check_models(models, label);

    Tape tape;
    Tensor xin = x.clone();
    xin.set_requires_grad(true);
    Tensor loss = ensemble_nll(models, xin, label);
    tape.backward(loss);

    Tensor out = x.clone();
    auto o = out.data();
    auto g = xin.grad().data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = std::min(std::max(o[i] + epsilon * sign_of(g[i]), 0.0f), 1.0f);
    }
    return out;
}

AttackResult run_attack(const std::vector<const Classifier*>& models, const Tensor& x, int label,
                        const AttackConfig& cfg, const std::vector<Tensor>* admix_pool,
                        const std::function<void(int, const Tensor&)>& on_iteration) {
    cfg.validate();
    check_models(models, label);
    if (x.shape() != models[0]->input_shape()) {
        throw std::invalid_argument("run_attack: image shape " + shape_str(x.shape()) +
                                    " does not match model input " +
                                    shape_str(models[0]->input_shape()));
    }
    for (float v : x.data()) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw std::invalid_argument("run_attack: input pixels must lie in [0,1]");
        }
    }

    const Tensor x0 = x.clone();
    AttackState state{0, Tensor::zeros(x.shape()), x.clone()};
    Rng rng(cfg.seed);
    const Tensor kernel = tim_kernel_of(cfg.transform);
    const int copies = copies_of(cfg.transform);

    AttackResult res;
    for (int t = 0; t < cfg.num_iters; ++t) {
        GradientEstimate ge =
            average_gradient(models, state.x_adv, label, cfg.transform, copies, rng, admix_pool);
        const Tensor g = kernel.defined() ? convolve_same(ge.g, kernel) : ge.g;
        const float l1 = momentum_step(state, g, cfg, x0);
        if (cfg.record_trace) {
            res.trace.loss.push_back(ge.mean_loss);
            res.trace.grad_l1.push_back(l1);
        }
        if (on_iteration) on_iteration(t, state.x_adv);
    }
    res.adversarial = state.x_adv;
    return res;
}

AttackResult run_attack(const Classifier& model, const Tensor& x, int label,
                        const AttackConfig& cfg, const std::vector<Tensor>* admix_pool,
                        const std::function<void(int, const Tensor&)>& on_iteration) {
    return run_attack(std::vector<const Classifier*>{&model}, x, label, cfg, admix_pool,
                      on_iteration);
}

}  // namespace bsr
