#pragma once

#include <functional>

#include "bsr/tensor.hpp"

namespace bsr {

// Elementwise and linear-algebra operations. Each registers a backward rule
// on the active tape when gradients must flow through any operand. Shapes
// must match exactly; the only broadcast supported is a scalar (size-1)
// operand for add/sub.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& a, float s);
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]

// 2-D convolution over a [C,H,W] image with a [Cout,Cin,kh,kw] kernel and
// optional [Cout] bias (pass an undefined Tensor for no bias). Zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride, int padding);

Tensor relu(const Tensor& x);

// Max pooling over [C,H,W]; ties broken by the first index in row-major scan.
Tensor max_pool2d(const Tensor& x, int kernel, int stride);

// Global average pooling: [C,H,W] -> [C].
Tensor global_avg_pool2d(const Tensor& x);

Tensor flatten(const Tensor& x);

// y = W x + b with x [in], W [out,in], b [out].
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor log_softmax(const Tensor& x);          // 1-D
Tensor nll_loss(const Tensor& logp, int target);  // -> scalar
Tensor sum(const Tensor& x);                  // -> scalar
Tensor select(const Tensor& x, int index);    // 1-D -> scalar

// Central-difference gradient estimate (f(x+h e_i) - f(x-h e_i)) / (2h),
// used as the independent oracle for the tape.
Tensor finite_diff_grad(const std::function<float(const Tensor&)>& f,
                        const Tensor& x, float h);

}  // namespace bsr
