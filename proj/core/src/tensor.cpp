#include "bsr/tensor.hpp"

#include <atomic>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace bsr {

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    s += "]";
    return s;
}

struct Tensor::Impl {
    Shape shape;
    std::vector<float> values;
    bool requires_grad = false;
    std::shared_ptr<Impl> grad;
    std::uint64_t tape_mark = 0;  // id of the tape that produced this tensor
};

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    for (int e : shape) {
        if (e <= 0) throw std::invalid_argument("tensor extent must be positive, got shape " + shape_str(shape));
    }
    auto impl = std::make_shared<Impl>();
    impl->values.assign(static_cast<std::size_t>(numel(shape)), 0.0f);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, float value) {
    Tensor t = zeros(std::move(shape));
    for (auto& v : t.impl_->values) v = value;
    return t;
}

Tensor Tensor::scalar(float value) { return full({1}, value); }

Tensor Tensor::from_data(Shape shape, std::vector<float> values, bool requires_grad) {
    if (static_cast<std::int64_t>(values.size()) != numel(shape)) {
        throw std::invalid_argument("data length " + std::to_string(values.size()) +
                                    " does not match shape " + shape_str(shape));
    }
    Tensor t = zeros(std::move(shape), requires_grad);
    t.impl_->values = std::move(values);
    return t;
}

static void require_defined(const Tensor& t) {
    if (!t.defined()) throw std::invalid_argument("operation on undefined tensor");
}

const Shape& Tensor::shape() const {
    require_defined(*this);
    return impl_->shape;
}

int Tensor::rank() const { return static_cast<int>(shape().size()); }

std::int64_t Tensor::size() const {
    require_defined(*this);
    return static_cast<std::int64_t>(impl_->values.size());
}

std::span<float> Tensor::data() {
    require_defined(*this);
    return impl_->values;
}

std::span<const float> Tensor::data() const {
    require_defined(*this);
    return impl_->values;
}

float Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("item() requires a scalar tensor, got shape " + shape_str(shape()));
    return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
    require_defined(*this);
    impl_->requires_grad = value;
    return *this;
}

bool Tensor::has_grad() const { return impl_ && impl_->grad != nullptr; }

Tensor Tensor::grad() const {
    require_defined(*this);
    if (!impl_->grad) return Tensor();
    return Tensor(impl_->grad);
}

void Tensor::zero_grad() {
    require_defined(*this);
    if (impl_->grad) std::fill(impl_->grad->values.begin(), impl_->grad->values.end(), 0.0f);
}

Tensor Tensor::clone() const {
    require_defined(*this);
    return from_data(impl_->shape, impl_->values);
}

const void* Tensor::id() const { return impl_.get(); }

// ---------------------------------------------------------------------------

namespace {
thread_local Tape* t_active_tape = nullptr;
std::atomic<std::uint64_t> g_tape_counter{0};
}  // namespace

Tape::Tape() : id_(++g_tape_counter) {
    if (t_active_tape != nullptr) {
        throw std::logic_error("a tape is already active on this thread");
    }
    t_active_tape = this;
}

Tape::~Tape() {
    if (t_active_tape == this) t_active_tape = nullptr;
}

Tape* Tape::active() { return t_active_tape; }

bool Tape::tracked(const Tensor& t) {
    if (!t.defined()) return false;
    if (t.impl_->requires_grad) return true;
    Tape* tape = active();
    return tape != nullptr && t.impl_->tape_mark == tape->id_;
}

void Tape::record(const Tensor& output, std::function<void()> backward_rule) {
    output.impl_->tape_mark = id_;
    ops_.push_back(std::move(backward_rule));
}

std::span<float> Tape::grad_span(const Tensor& t) {
    auto& impl = *t.impl_;
    if (!impl.grad) {
        auto g = std::make_shared<Tensor::Impl>();
        g->shape = impl.shape;
        g->values.assign(impl.values.size(), 0.0f);
        impl.grad = std::move(g);
    }
    return impl.grad->values;
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                    (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    }
    if (loss.impl_->tape_mark != id_) {
        throw std::invalid_argument("backward: loss was not produced under this tape");
    }
    grad_span(loss)[0] += 1.0f;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

}  // namespace bsr
