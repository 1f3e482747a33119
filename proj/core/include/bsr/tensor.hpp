#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bsr {

// Extents of a dense row-major tensor.
using Shape = std::vector<int>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense float32 tensor. Copies of a Tensor are handles to shared storage;
// data is treated as immutable once written, except for gradient
// accumulation driven by Tape::backward.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value);
    static Tensor scalar(float value);
    static Tensor from_data(Shape shape, std::vector<float> values,
                            bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int rank() const;
    std::int64_t size() const;
    std::span<float> data();
    std::span<const float> data() const;
    float item() const;  // scalar tensors only

    bool requires_grad() const;
    Tensor& set_requires_grad(bool value);

    bool has_grad() const;
    Tensor grad() const;   // shares storage with this tensor's gradient
    void zero_grad();

    Tensor clone() const;  // deep copy of the data, detached from any tape

    const void* id() const;

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;

    explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
    friend class Tape;
};

// Reverse-mode differentiation tape. Operations executed while a Tape is
// alive on the current thread are recorded in execution order (which is a
// topological order of the data flow); backward replays them once, in
// reverse. A tape and the tensors recorded on it belong to one thread.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every tensor
    // reachable from `loss` that requires_grad or was produced on this tape.
    // `loss` must be a scalar recorded on this tape.
    void backward(const Tensor& loss);

    std::size_t size() const { return ops_.size(); }

    // --- used by operation implementations ---

    // True when gradients must flow through `t`: it is a differentiable leaf
    // or an intermediate produced on the active tape.
    static bool tracked(const Tensor& t);

    void record(const Tensor& output, std::function<void()> backward_rule);

    // Gradient view of `t`; allocates a zero gradient on first use.
    static std::span<float> grad_span(const Tensor& t);

private:
    std::uint64_t id_;
    std::vector<std::function<void()>> ops_;
};

}  // namespace bsr
