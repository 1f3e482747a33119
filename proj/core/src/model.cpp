#include "bsr/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bsr/ops.hpp"
#include "bsr/rng.hpp"

namespace bsr {

namespace {

// Kaiming-style uniform fan-in scaling, gain sqrt(2) for the relu blocks.
Tensor init_uniform(const Shape& shape, int fan_in, Rng& rng) {
    Tensor t = Tensor::zeros(shape);
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    for (float& v : t.data()) v = rng.uniform_float(-bound, bound);
    return t;
}

}  // namespace

void Classifier::configure(const std::string& architecture_id, const Shape& input_shape,
                           int num_classes) {
    if (input_shape.size() != 3) {
        throw std::invalid_argument("classifier input shape must be [C,H,W], got " +
                                    shape_str(input_shape));
    }
    if (num_classes < 2) throw std::invalid_argument("classifier needs at least 2 classes");
    if (architecture_id == "conv3") {
        blocks_ = {{8, true}, {16, true}, {32, false}};
    } else if (architecture_id == "conv4") {
        blocks_ = {{12, true}, {24, true}, {32, false}, {40, false}};
    } else {
        throw std::invalid_argument("unknown architecture_id: " + architecture_id);
    }
    arch_ = architecture_id;
    input_shape_ = input_shape;
    num_classes_ = num_classes;
}

Classifier Classifier::build(const std::string& architecture_id, const Shape& input_shape,
                             int num_classes, std::uint64_t seed) {
    Classifier m;
    m.configure(architecture_id, input_shape, num_classes);
    Rng rng(seed);
    int in_ch = input_shape[0];
    for (std::size_t b = 0; b < m.blocks_.size(); ++b) {
        const int out_ch = m.blocks_[b].out_channels;
        const std::string base = "conv" + std::to_string(b + 1);
        m.params_.emplace_back(base + ".w",
                               init_uniform({out_ch, in_ch, 3, 3}, in_ch * 9, rng));
        m.params_.emplace_back(base + ".b", Tensor::zeros({out_ch}));
        in_ch = out_ch;
    }
    m.params_.emplace_back("fc.w", init_uniform({num_classes, in_ch}, in_ch, rng));
    m.params_.emplace_back("fc.b", Tensor::zeros({num_classes}));
    for (auto& [name, t] : m.params_) t.set_requires_grad(true);
    return m;
}

Classifier Classifier::from_parameters(const std::string& architecture_id, const Shape& input_shape,
                                       int num_classes,
                                       std::vector<std::pair<std::string, Tensor>> params) {
    Classifier ref = build(architecture_id, input_shape, num_classes, 0);
    if (params.size() != ref.params_.size()) {
        throw std::invalid_argument("parameter count mismatch for " + architecture_id + ": got " +
                                    std::to_string(params.size()) + ", expected " +
                                    std::to_string(ref.params_.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].first != ref.params_[i].first) {
            throw std::invalid_argument("parameter name mismatch: got '" + params[i].first +
                                        "', expected '" + ref.params_[i].first + "'");
        }
        if (params[i].second.shape() != ref.params_[i].second.shape()) {
            throw std::invalid_argument("parameter shape mismatch for " + params[i].first + ": " +
                                        shape_str(params[i].second.shape()) + " vs " +
                                        shape_str(ref.params_[i].second.shape()));
        }
        params[i].second.set_requires_grad(true);
    }
    ref.params_ = std::move(params);
    return ref;
}

Tensor& Classifier::param(const std::string& name) {
    for (auto& [n, t] : params_) {
        if (n == name) return t;
    }
    throw std::invalid_argument("no parameter named '" + name + "'");
}

const Tensor& Classifier::param(const std::string& name) const {
    return const_cast<Classifier*>(this)->param(name);
}

std::vector<std::string> Classifier::activation_layers() const {
    std::vector<std::string> names;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        names.push_back("conv" + std::to_string(b + 1) + ".relu");
    }
    return names;
}

Classifier::Trace Classifier::run(const Tensor& x, int trace_block) const {
    if (x.shape() != input_shape_) {
        throw std::invalid_argument("classifier input shape " + shape_str(x.shape()) +
                                    " does not match expected " + shape_str(input_shape_));
    }
    Trace trace;
    // Fixed input centering, the usual normalize-before-backbone step.
    Tensor h = sub(x, Tensor::full(x.shape(), 0.5f));
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const std::string base = "conv" + std::to_string(b + 1);
        h = relu(conv2d(h, param(base + ".w"), param(base + ".b"), 1, 1));
        if (static_cast<int>(b) == trace_block) {
            trace.activation = h;
            trace.layer = base + ".relu";
        }
        if (blocks_[b].pool) h = max_pool2d(h, 2, 2);
    }
    trace.logits = dense(global_avg_pool2d(h), param("fc.w"), param("fc.b"));
    return trace;
}

Tensor Classifier::forward(const Tensor& x) const { return run(x, -1).logits; }

Classifier::Trace Classifier::forward_trace(const Tensor& x, const std::string& layer) const {
    int block = static_cast<int>(blocks_.size()) - 1;
    if (!layer.empty()) {
        block = -1;
        const auto names = activation_layers();
        for (std::size_t b = 0; b < names.size(); ++b) {
            if (names[b] == layer) block = static_cast<int>(b);
        }
        if (block < 0) {
            std::string known;
            for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
            throw std::invalid_argument("unknown layer '" + layer + "' (known: " + known + ")");
        }
    }
    return run(x, block);
}

Classifier::Prediction Classifier::predict(const Tensor& image) const {
    Tensor logits = forward(image);
    Prediction p;
    auto span = logits.data();
    p.logits.assign(span.begin(), span.end());
    p.class_index = static_cast<int>(
        std::max_element(p.logits.begin(), p.logits.end()) - p.logits.begin());
    return p;
}

TrainStats Classifier::train(const LabeledDataset& data, int epochs, float lr, int batch_size,
                             std::uint64_t seed) {
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    data.validate();
    if (data.num_classes > num_classes_) {
        throw std::invalid_argument("train: dataset has more classes than the model");
    }

    Rng rng(seed);
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    // Classical momentum; plain SGD stalls on the early plateau where the
    // conv features are still uninformative.
    const float mu = 0.9f;
    std::vector<Tensor> velocity;
    velocity.reserve(params_.size());
    for (auto& [name, p] : params_) velocity.push_back(Tensor::zeros(p.shape()));

    TrainStats stats;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int correct = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t stop = std::min(order.size(), start + batch_size);
            for (std::size_t i = start; i < stop; ++i) {
                const int idx = order[i];
                Tape tape;
                Tensor logits = forward(data.images[idx]);
                // Label smoothing keeps the softmax off its saturated corner;
                // fully confident models have float-zero input gradients,
                // which starves every gradient-based consumer downstream.
                const float smooth = 0.1f;
                Tensor logp = log_softmax(logits);
                Tensor loss = add(mul_scalar(nll_loss(logp, data.labels[idx]), 1.0f - smooth),
                                  mul_scalar(mul_scalar(sum(logp), -1.0f / num_classes_), smooth));
                epoch_loss += loss.item();
                auto lspan = logits.data();
                const int pred = static_cast<int>(
                    std::max_element(lspan.begin(), lspan.end()) - lspan.begin());
                if (pred == data.labels[idx]) ++correct;
                tape.backward(loss);
            }
            const float scale = lr / static_cast<float>(stop - start);
            for (std::size_t j = 0; j < params_.size(); ++j) {
                Tensor& p = params_[j].second;
                if (!p.has_grad()) continue;
                auto vals = p.data();
                auto grads = p.grad().data();
                auto vel = velocity[j].data();
                for (std::size_t k = 0; k < vals.size(); ++k) {
                    vel[k] = mu * vel[k] + scale * grads[k];
                    vals[k] -= vel[k];
                }
                p.zero_grad();
            }
        }
        stats.loss.push_back(static_cast<float>(epoch_loss / static_cast<double>(data.size())));
        stats.accuracy.push_back(static_cast<float>(correct) / static_cast<float>(data.size()));
    }
    return stats;
}

float accuracy(const Classifier& model, const LabeledDataset& data) {
    if (data.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
    int correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (model.predict(data.images[i]).class_index == data.labels[i]) ++correct;
    }
    return static_cast<float>(correct) / static_cast<float>(data.size());
}

}  // namespace bsr
