#include "bsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bsr {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

void check_rank(const char* op, const Tensor& t, int rank) {
    if (t.rank() != rank) {
        throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                    ", got shape " + shape_str(t.shape()));
    }
}

bool output_grad(const Tensor& out, std::span<const float>& g) {
    if (!out.has_grad()) return false;  // not on the path to the loss
    g = out.grad().data();
    return true;
}

// add/sub with an optional scalar operand on either side
enum class Ew { Add, Sub };

Tensor elementwise(Ew op, const Tensor& a, const Tensor& b) {
    const char* name = op == Ew::Add ? "add" : "sub";
    const bool a_scalar = a.size() == 1 && b.size() != 1;
    const bool b_scalar = b.size() == 1 && a.size() != 1;
    if (!a_scalar && !b_scalar) check_same_shape(name, a, b);

    const Tensor& big = a_scalar ? b : a;
    Tensor out = Tensor::zeros(big.shape());
    auto ad = a.data();
    auto bd = b.data();
    auto od = out.data();
    const float sgn = op == Ew::Sub ? -1.0f : 1.0f;
    for (std::size_t i = 0; i < od.size(); ++i) {
        const float av = a_scalar ? ad[0] : ad[i];
        const float bv = b_scalar ? bd[0] : bd[i];
        od[i] = op == Ew::Add ? av + bv : av - bv;
    }

    Tape* tape = Tape::active();
    const bool na = tape && Tape::tracked(a);
    const bool nb = tape && Tape::tracked(b);
    if (na || nb) {
        tape->record(out, [a, b, out, na, nb, a_scalar, b_scalar, sgn]() {
            std::span<const float> g;
            if (!output_grad(out, g)) return;
            if (na) {
                auto ga = Tape::grad_span(a);
                if (a_scalar) {
                    for (float gv : g) ga[0] += gv;
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                }
            }
            if (nb) {
                auto gb = Tape::grad_span(b);
                if (b_scalar) {
                    for (float gv : g) gb[0] += sgn * gv;
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sgn * g[i];
                }
            }
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Ew::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Ew::Sub, a, b); }

Tensor mul_scalar(const Tensor& a, float s) {
    Tensor out = Tensor::zeros(a.shape());
    auto ad = a.data();
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * s;

    Tape* tape = Tape::active();
    if (tape && Tape::tracked(a)) {
        tape->record(out, [a, out, s]() {
            std::span<const float> g;
            if (!output_grad(out, g)) return;
            auto ga = Tape::grad_span(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
        });
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank("matmul", a, 2);
    check_rank("matmul", b, 2);
    const int m = a.shape()[0], k = a.shape()[1];
    const int k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) {
        throw std::invalid_argument("matmul: inner extents differ, " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
    Tensor out = Tensor::zeros({m, n});
    auto ad = a.data();
    auto bd = b.data();
    auto od = out.data();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const float av = ad[static_cast<std::size_t>(i) * k + p];
            for (int j = 0; j < n; ++j) {
                od[static_cast<std::size_t>(i) * n + j] += av * bd[static_cast<std::size_t>(p) * n + j];
            }
        }
    }

    Tape* tape = Tape::active();
    const bool na = tape && Tape::tracked(a);
    const bool nb = tape && Tape::tracked(b);
    if (na || nb) {
        tape->record(out, [a, b, out, na, nb, m, k, n]() {
            std::span<const float> g;
            if (!output_grad(out, g)) return;
            auto ad2 = a.data();
            auto bd2 = b.data();
            if (na) {
                auto ga = Tape::grad_span(a);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        const float gv = g[static_cast<std::size_t>(i) * n + j];
                        for (int p = 0; p < k; ++p)
                            ga[static_cast<std::size_t>(i) * k + p] += gv * bd2[static_cast<std::size_t>(p) * n + j];
                    }
            }
            if (nb) {
                auto gb = Tape::grad_span(b);
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        const float av = ad2[static_cast<std::size_t>(i) * k + p];
                        for (int j = 0; j < n; ++j)
                            gb[static_cast<std::size_t>(p) * n + j] += av * g[static_cast<std::size_t>(i) * n + j];
                    }
            }
        });
    }
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
    check_rank("conv2d", x, 3);
    check_rank("conv2d", w, 4);
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
    const int ci = x.shape()[0], h = x.shape()[1], wd = x.shape()[2];
    const int co = w.shape()[0], wci = w.shape()[1], kh = w.shape()[2], kw = w.shape()[3];
    if (wci != ci) {
        throw std::invalid_argument("conv2d: input channels mismatch, image " + shape_str(x.shape()) +
                                    " vs kernel " + shape_str(w.shape()));
    }
    if (kh > h + 2 * padding || kw > wd + 2 * padding) {
        throw std::invalid_argument("conv2d: kernel " + shape_str(w.shape()) +
                                    " exceeds padded input " + shape_str(x.shape()));
    }
    if (bias.defined() && (bias.rank() != 1 || bias.shape()[0] != co)) {
        throw std::invalid_argument("conv2d: bias shape " + shape_str(bias.shape()) +
                                    " does not match kernel " + shape_str(w.shape()));
    }
    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (wd + 2 * padding - kw) / stride + 1;

    Tensor out = Tensor::zeros({co, oh, ow});
    auto xd = x.data();
    auto wdv = w.data();
    auto od = out.data();
    if (bias.defined()) {
        auto bd = bias.data();
        for (int oc = 0; oc < co; ++oc)
            std::fill_n(od.begin() + static_cast<std::size_t>(oc) * oh * ow, oh * ow, bd[oc]);
    }
    for (int oc = 0; oc < co; ++oc) {
        for (int ic = 0; ic < ci; ++ic) {
            const float* xin = xd.data() + static_cast<std::size_t>(ic) * h * wd;
            const float* ker = wdv.data() + ((static_cast<std::size_t>(oc) * ci + ic) * kh) * kw;
            float* o = od.data() + static_cast<std::size_t>(oc) * oh * ow;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride + ky - padding;
                    if (iy < 0 || iy >= h) continue;
                    const float* xrow = xin + static_cast<std::size_t>(iy) * wd;
                    const float* krow = ker + static_cast<std::size_t>(ky) * kw;
                    float* orow = o + static_cast<std::size_t>(oy) * ow;
                    for (int kx = 0; kx < kw; ++kx) {
                        const float kv = krow[kx];
                        const int x0 = kx - padding;
                        // valid ox range so that ix = ox*stride + x0 lies in [0, wd)
                        int lo = 0;
                        if (x0 < 0) lo = (-x0 + stride - 1) / stride;
                        int hi = ow;
                        if (x0 + (ow - 1) * stride >= wd) hi = (wd - x0 + stride - 1) / stride;
                        if (stride == 1) {
                            const float* xr = xrow + x0 + lo;
                            for (int ox = lo; ox < hi; ++ox) orow[ox] += kv * *xr++;
                        } else {
                            for (int ox = lo; ox < hi; ++ox) orow[ox] += kv * xrow[ox * stride + x0];
                        }
                    }
                }
            }
        }
    }

    Tape* tape = Tape::active();
    const bool nx = tape && Tape::tracked(x);
    const bool nw = tape && Tape::tracked(w);
    const bool nb = tape && bias.defined() && Tape::tracked(bias);
    if (nx || nw || nb) {
        tape->record(out, [x, w, bias, out, nx, nw, nb, stride, padding, ci, h, wd, co, kh, kw, oh, ow]() {
            std::span<const float> g;
            if (!output_grad(out, g)) return;
            auto xd2 = x.data();
            auto wd2 = w.data();
            if (nb) {
                auto gb = Tape::grad_span(bias);
                for (int oc = 0; oc < co; ++oc) {
                    float s = 0.0f;
                    const float* gout = g.data() + static_cast<std::size_t>(oc) * oh * ow;
                    for (int i = 0; i < oh * ow; ++i) s += gout[i];
                    gb[oc] += s;
                }
            }
            if (nx) {
                auto gx = Tape::grad_span(x);
                for (int oc = 0; oc < co; ++oc) {
                    const float* gout = g.data() + static_cast<std::size_t>(oc) * oh * ow;
                    for (int ic = 0; ic < ci; ++ic) {
                        float* gin = gx.data() + static_cast<std::size_t>(ic) * h * wd;
                        const float* ker = wd2.data() + ((static_cast<std::size_t>(oc) * ci + ic) * kh) * kw;
                        for (int oy = 0; oy < oh; ++oy) {
                            for (int ky = 0; ky < kh; ++ky) {
                                const int iy = oy * stride + ky - padding;
                                if (iy < 0 || iy >= h) continue;
                                float* grow = gin + static_cast<std::size_t>(iy) * wd;
                                const float* krow = ker + static_cast<std::size_t>(ky) * kw;
                                const float* gorow = gout + static_cast<std::size_t>(oy) * ow;
                                for (int kx = 0; kx < kw; ++kx) {
                                    const float kv = krow[kx];
                                    const int x0 = kx - padding;
                                    int lo = 0;
                                    if (x0 < 0) lo = (-x0 + stride - 1) / stride;
                                    int hi = ow;
                                    if (x0 + (ow - 1) * stride >= wd) hi = (wd - x0 + stride - 1) / stride;
                                    if (stride == 1) {
                                        float* gr = grow + x0 + lo;
                                        for (int ox = lo; ox < hi; ++ox) *gr++ += kv * gorow[ox];
                                    } else {
                                        for (int ox = lo; ox < hi; ++ox) grow[ox * stride + x0] += kv * gorow[ox];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if (nw) {
                auto gw = Tape::grad_span(w);
                for (int oc = 0; oc < co; ++oc) {
                    const float* gout = g.data() + static_cast<std::size_t>(oc) * oh * ow;
                    for (int ic = 0; ic < ci; ++ic) {
                        const float* xin = xd2.data() + static_cast<std::size_t>(ic) * h * wd;
                        float* gker = gw.data() + ((static_cast<std::size_t>(oc) * ci + ic) * kh) * kw;
                        for (int ky = 0; ky < kh; ++ky) {
                            for (int kx = 0; kx < kw; ++kx) {
                                float s = 0.0f;
                                for (int oy = 0; oy < oh; ++oy) {
                                    const int iy = oy * stride + ky - padding;
                                    if (iy < 0 || iy >= h) continue;
                                    const float* xrow = xin + static_cast<std::size_t>(iy) * wd;
                                    const float* gorow = gout + static_cast<std::size_t>(oy) * ow;
                                    const int x0 = kx - padding;
                                    int lo = 0;
                                    if (x0 < 0) lo = (-x0 + stride - 1) / stride;
                                    int hi = ow;
                                    if (x0 + (ow - 1) * stride >= wd) hi = (wd - x0 + stride - 1) / stride;
                                    for (int ox = lo; ox < hi; ++ox) s += gorow[ox] * xrow[ox * stride + x0];
                                }
                                gker[static_cast<std::size_t>(ky) * kw + kx] += s;
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = xd[i] > 0.0f ? xd[i] : 0.0f;

    Tape* tape = Tape::active();
    if (tape && Tape::tracked(x)) {
        // subgradient 0 at the kink
        tape->record(out, [x, out]() {
            std::span<const float> g;
            if (!output_grad(out, g)) return;
            auto xd2 = x.data();
            auto gx = Tape::grad_span(x);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (xd2[i] > 0.0f) gx[i] += g[i];
        });
    }
    return out;
}

Tensor max_pool2d(const Tensor& x, int kernel, int stride) {
    check_rank("max_pool2d", x, 3);
    if (kernel < 1 || stride < 1) throw std::invalid_argument("max_pool2d: kernel and stride must be >= 1");
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    if (kernel > h || kernel > w) {
        throw std::invalid_argument("max_pool2d: kernel " + std::to_string(kernel) +
                                    " exceeds input " + shape_str(x.shape()));
    }
    const int oh = (h - kernel) / stride + 1;
    const int ow = (w - kernel) / stride + 1;
    Tensor out = Tensor::zeros({c, oh, ow});
    auto xd = x.data();
    auto od = out.data();
    auto argmax = std::make_shared<std::vector<std::int32_t>>(static_cast<std::size_t>(c) * oh * ow);
    for (int ch = 0; ch < c; ++ch) {
        const float* xin = xd.data() + static_cast<std::size_t>(ch) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                float best = -std::numeric_limits<float>::infinity();
                int best_idx = 0;
                for (int ky = 0; ky < kernel; ++ky) {
                    const int iy = oy * stride + ky;
                    for (int kx = 0; kx < kernel; ++kx) {
                        const int ix = ox * stride + kx;
                        const int idx = iy * w + ix;
                        if (xin[idx] > best) {  // strict: first index wins ties
                            best = xin[idx];
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t o = (static_cast<std::size_t>(ch) * oh + oy) * ow + ox;
                od[o] = best;
                (*argmax)[o] = best_idx + ch * h * w;
            }
        }
    }

    Tape* tape = Tape::active();
    if (tape && Tape::tracked(x)) {
        tape->record(out, [x, out, argmax]() {
            std::span<const float> g;
            if (!output_grad(out, g)) return;
            auto gx = Tape::grad_span(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
        });
    }
    return out;
}

Tensor global_avg_pool2d(const Tensor& x) {
    check_rank("global_avg_pool2d", x, 3);
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    const float inv = 1.0f / static_cast<float>(h * w);
    Tensor out = Tensor::zeros({c});
    auto xd = x.data();
    auto od = out.data();
    for (int ch = 0; ch < c; ++ch) {
        float s = 0.0f;
        const float* xin = xd.data() + static_cast<std::size_t>(ch) * h * w;
        for (int i = 0; i < h * w; ++i) s += xin[i];
        od[ch] = s * inv;
    }

    Tape* tape = Tape::active();
    if (tape && Tape::tracked(x)) {
        tape->record(out, [x, out, c, h, w, inv]() {
            std::span<const float> g;
            if (!output_grad(out, g)) return;
            auto gx = Tape::grad_span(x);
            for (int ch = 0; ch < c; ++ch) {
                const float gv = g[ch] * inv;
                float* gin = gx.data() + static_cast<std::size_t>(ch) * h * w;
                for (int i = 0; i < h * w; ++i) gin[i] += gv;
            }
        });
    }
    return out;
}

Tensor flatten(const Tensor& x) {
    Tensor out = Tensor::from_data({static_cast<int>(x.size())},
                                   std::vector<float>(x.data().begin(), x.data().end()));
    Tape* tape = Tape::active();
    if (tape && Tape::tracked(x)) {
        tape->record(out, [x, out]() {
            std::span<const float> g;
            if (!output_grad(out, g)) return;
            auto gx = Tape::grad_span(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        });
    }
    return out;
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    check_rank("dense", x, 1);
    check_rank("dense", w, 2);
    check_rank("dense", b, 1);
    const int in = x.shape()[0], outn = w.shape()[0];
    if (w.shape()[1] != in || b.shape()[0] != outn) {
        throw std::invalid_argument("dense: shape mismatch x " + shape_str(x.shape()) + ", W " +
                                    shape_str(w.shape()) + ", b " + shape_str(b.shape()));
    }
    Tensor out = Tensor::zeros({outn});
    auto xd = x.data();
    auto wd = w.data();
    auto bd = b.data();
    auto od = out.data();
    for (int o = 0; o < outn; ++o) {
        float s = bd[o];
        const float* wrow = wd.data() + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) s += wrow[i] * xd[i];
        od[o] = s;
    }

    Tape* tape = Tape::active();
    const bool nx = tape && Tape::tracked(x);
    const bool nw = tape && Tape::tracked(w);
    const bool nb = tape && Tape::tracked(b);
    if (nx || nw || nb) {
        tape->record(out, [x, w, b, out, nx, nw, nb, in, outn]() {
            std::span<const float> g;
            if (!output_grad(out, g)) return;
            auto xd2 = x.data();
            auto wd2 = w.data();
            if (nx) {
                auto gx = Tape::grad_span(x);
                for (int o = 0; o < outn; ++o) {
                    const float gv = g[o];
                    const float* wrow = wd2.data() + static_cast<std::size_t>(o) * in;
                    for (int i = 0; i < in; ++i) gx[i] += gv * wrow[i];
                }
            }
            if (nw) {
                auto gw = Tape::grad_span(w);
                for (int o = 0; o < outn; ++o) {
                    const float gv = g[o];
                    float* grow = gw.data() + static_cast<std::size_t>(o) * in;
                    for (int i = 0; i < in; ++i) grow[i] += gv * xd2[i];
                }
            }
            if (nb) {
                auto gb = Tape::grad_span(b);
                for (int o = 0; o < outn; ++o) gb[o] += g[o];
            }
        });
    }
    return out;
}

Tensor log_softmax(const Tensor& x) {
    check_rank("log_softmax", x, 1);
    const int n = x.shape()[0];
    Tensor out = Tensor::zeros({n});
    auto xd = x.data();
    auto od = out.data();
    float m = xd[0];
    for (int i = 1; i < n; ++i) m = std::max(m, xd[i]);
    float lse = 0.0f;
    for (int i = 0; i < n; ++i) lse += std::exp(xd[i] - m);
    lse = std::log(lse);
    for (int i = 0; i < n; ++i) od[i] = xd[i] - m - lse;

    Tape* tape = Tape::active();
    if (tape && Tape::tracked(x)) {
        tape->record(out, [x, out, n]() {
            std::span<const float> g;
            if (!output_grad(out, g)) return;
            auto od2 = out.data();
            auto gx = Tape::grad_span(x);
            float gsum = 0.0f;
            for (int i = 0; i < n; ++i) gsum += g[i];
            for (int i = 0; i < n; ++i) gx[i] += g[i] - std::exp(od2[i]) * gsum;
        });
    }
    return out;
}

Tensor nll_loss(const Tensor& logp, int target) {
    check_rank("nll_loss", logp, 1);
    const int n = logp.shape()[0];
    if (target < 0 || target >= n) {
        throw std::invalid_argument("nll_loss: target " + std::to_string(target) +
                                    " out of range for " + shape_str(logp.shape()));
    }
    Tensor out = Tensor::scalar(-logp.data()[target]);

    Tape* tape = Tape::active();
    if (tape && Tape::tracked(logp)) {
        tape->record(out, [logp, out, target]() {
            std::span<const float> g;
            if (!output_grad(out, g)) return;
            Tape::grad_span(logp)[target] -= g[0];
        });
    }
    return out;
}

Tensor sum(const Tensor& x) {
    float s = 0.0f;
    for (float v : x.data()) s += v;
    Tensor out = Tensor::scalar(s);

    Tape* tape = Tape::active();
    if (tape && Tape::tracked(x)) {
        tape->record(out, [x, out]() {
            std::span<const float> g;
            if (!output_grad(out, g)) return;
            auto gx = Tape::grad_span(x);
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
        });
    }
    return out;
}

Tensor select(const Tensor& x, int index) {
    check_rank("select", x, 1);
    if (index < 0 || index >= x.shape()[0]) {
        throw std::invalid_argument("select: index " + std::to_string(index) +
                                    " out of range for " + shape_str(x.shape()));
    }
    Tensor out = Tensor::scalar(x.data()[index]);

    Tape* tape = Tape::active();
    if (tape && Tape::tracked(x)) {
        tape->record(out, [x, out, index]() {
            std::span<const float> g;
            if (!output_grad(out, g)) return;
            Tape::grad_span(x)[index] += g[0];
        });
    }
    return out;
}

Tensor finite_diff_grad(const std::function<float(const Tensor&)>& f, const Tensor& x, float h) {
    if (!(h > 0.0f)) throw std::invalid_argument("finite_diff_grad: step must be positive");
    Tensor grad = Tensor::zeros(x.shape());
    Tensor probe = x.clone();
    auto pd = probe.data();
    auto gd = grad.data();
    for (std::size_t i = 0; i < pd.size(); ++i) {
        const float orig = pd[i];
        pd[i] = orig + h;
        const double fp = f(probe);
        pd[i] = orig - h;
        const double fm = f(probe);
        pd[i] = orig;
        gd[i] = static_cast<float>((fp - fm) / (2.0 * static_cast<double>(h)));
    }
    return grad;
}

}  // namespace bsr
