#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bsr/model.hpp"
#include "bsr/transform.hpp"

namespace bsr {

// Iterated sign-gradient attack settings. epsilon and step_size live on the
// [0,1] pixel scale; step_size <= 0 selects epsilon/num_iters. transform
// empty runs the plain momentum attack (decay 0 gives the non-momentum
// iterative attack, num_iters 1 with step epsilon the one-shot attack).
struct AttackConfig {
    float epsilon = 16.0f / 255.0f;
    int num_iters = 10;
    float step_size = 0.0f;
    float decay = 1.0f;
    TransformKind transform;
    bool clip_to_valid_range = true;
    std::uint64_t seed = 0;
    bool record_trace = false;

    void validate() const;
    float effective_step() const;
};

struct AttackState {
    int t = 0;
    Tensor momentum;
    Tensor x_adv;
};

struct GradientEstimate {
    Tensor g;
    int copies_used = 0;
    float mean_loss = 0.0f;
};

struct AttackTrace {
    std::vector<float> loss;     // mean loss across copies, per iteration
    std::vector<float> grad_l1;  // L1 norm fed into the momentum update
};

struct AttackResult {
    Tensor adversarial;
    AttackTrace trace;
};

// Mean over `copies` transform draws of d(loss)/d(x), where loss is the
// cross-entropy of the (logit-averaged) model ensemble on the transformed
// image bundle. An empty transform takes one plain gradient regardless of
// `copies`.
GradientEstimate average_gradient(const std::vector<const Classifier*>& models, const Tensor& x,
                                  int label, const TransformKind& transform, int copies, Rng& rng,
                                  const std::vector<Tensor>* admix_pool = nullptr);

// g <- decay*g + g_bar/|g_bar|_1 (zero when the norm is zero), then one
// sign step projected onto the epsilon box around x_orig (and [0,1] when
// clipping is enabled). Returns |g_bar|_1. Throws if the budget invariant
// fails after the step; that is an internal error, never a silent state.
float momentum_step(AttackState& state, const Tensor& g_bar, const AttackConfig& cfg,
                    const Tensor& x_orig);

// One-shot sign attack: clip(x + epsilon*sign(d(loss)/dx)).
Tensor fgsm(const Classifier& model, const Tensor& x, int label, float epsilon);

// Full iterated attack; `on_iteration` (when set) observes x_adv after every
// step. Ensembles fuse at the logits with equal weights.
AttackResult run_attack(const std::vector<const Classifier*>& models, const Tensor& x, int label,
                        const AttackConfig& cfg, const std::vector<Tensor>* admix_pool = nullptr,
                        const std::function<void(int, const Tensor&)>& on_iteration = {});
AttackResult run_attack(const Classifier& model, const Tensor& x, int label,
                        const AttackConfig& cfg, const std::vector<Tensor>* admix_pool = nullptr,
                        const std::function<void(int, const Tensor&)>& on_iteration = {});

}  // namespace bsr
