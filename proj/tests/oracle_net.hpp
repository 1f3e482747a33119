#pragma once

// Double-precision reference forward pass for the small classifiers, written
// as plain nested loops with no tape. Gradient tests difference this instead
// of the single-precision forward so that a step of h=1e-3 is not swamped by
// float rounding in the function values.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "bsr/model.hpp"
#include "bsr/tensor.hpp"

namespace oracle {

inline std::vector<double> widen(const bsr::Tensor& t) {
    std::vector<double> out(t.size());
    auto d = t.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(d[i]);
    return out;
}

// Logits of the classifier on one CHW image, computed entirely in double.
// Mirrors Classifier::run: center by 0.5, then per block conv3x3(pad 1) +
// relu + optional 2x2/2 max pool, then global average pool and a dense head.
inline std::vector<double> logits(const bsr::Classifier& m, const std::vector<double>& x) {
    const bsr::Shape& in = m.input_shape();
    int C = in[0], H = in[1], W = in[2];
    if (x.size() != static_cast<std::size_t>(C * H * W)) {
        throw std::invalid_argument("oracle input size mismatch");
    }
    std::vector<double> h(x);
    for (double& v : h) v -= 0.5;

    int block = 1;
    while (true) {
        std::string wname = "conv" + std::to_string(block) + ".w";
        const auto& params = m.parameters();
        bool found = false;
        for (const auto& [name, t] : params) {
            if (name == wname) { found = true; break; }
        }
        if (!found) break;

        const bsr::Tensor& wt = m.param(wname);
        const bsr::Tensor& bt = m.param("conv" + std::to_string(block) + ".b");
        const int OC = wt.shape()[0];
        std::vector<double> w = widen(wt);
        std::vector<double> b = widen(bt);

        std::vector<double> out(static_cast<std::size_t>(OC) * H * W, 0.0);
        for (int oc = 0; oc < OC; ++oc) {
            for (int y = 0; y < H; ++y) {
                for (int xx = 0; xx < W; ++xx) {
                    double acc = b[oc];
                    for (int ic = 0; ic < C; ++ic) {
                        for (int ky = -1; ky <= 1; ++ky) {
                            for (int kx = -1; kx <= 1; ++kx) {
                                const int sy = y + ky, sx = xx + kx;
                                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                                acc += w[((oc * C + ic) * 3 + (ky + 1)) * 3 + (kx + 1)] *
                                       h[(ic * H + sy) * W + sx];
                            }
                        }
                    }
                    out[(oc * H + y) * W + xx] = acc > 0.0 ? acc : 0.0;
                }
            }
        }
        h = std::move(out);
        C = OC;

        // Pooling follows the first two blocks in both layouts.
        if (block <= 2) {
            const int PH = H / 2, PW = W / 2;
            std::vector<double> pooled(static_cast<std::size_t>(C) * PH * PW);
            for (int c = 0; c < C; ++c) {
                for (int y = 0; y < PH; ++y) {
                    for (int xx = 0; xx < PW; ++xx) {
                        double best = h[(c * H + 2 * y) * W + 2 * xx];
                        for (int dy = 0; dy < 2; ++dy) {
                            for (int dx = 0; dx < 2; ++dx) {
                                const double v = h[(c * H + 2 * y + dy) * W + 2 * xx + dx];
                                if (v > best) best = v;
                            }
                        }
                        pooled[(c * PH + y) * PW + xx] = best;
                    }
                }
            }
            h = std::move(pooled);
            H = PH;
            W = PW;
        }
        ++block;
    }

    std::vector<double> gap(C, 0.0);
    for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int i = 0; i < H * W; ++i) s += h[c * H * W + i];
        gap[c] = s / (H * W);
    }

    const bsr::Tensor& fw = m.param("fc.w");
    const bsr::Tensor& fb = m.param("fc.b");
    const int K = fw.shape()[0];
    std::vector<double> wv = widen(fw), bv = widen(fb);
    std::vector<double> out(K, 0.0);
    for (int k = 0; k < K; ++k) {
        double acc = bv[k];
        for (int c = 0; c < C; ++c) acc += wv[k * C + c] * gap[c];
        out[k] = acc;
    }
    return out;
}

// Cross-entropy of the double logits against one label.
inline double loss(const bsr::Classifier& m, const std::vector<double>& x, int label) {
    std::vector<double> lg = logits(m, x);
    double mx = lg[0];
    for (double v : lg) mx = v > mx ? v : mx;
    double s = 0.0;
    for (double v : lg) s += std::exp(v - mx);
    return -(lg[label] - mx - std::log(s));
}

// Central difference of f(m, x) w.r.t. one input coordinate. Probe values are
// rounded through float first so the divisor matches the perturbation a
// single-precision consumer would actually see.
template <typename F>
double fd_input(const bsr::Classifier& m, std::vector<double> x, int coord, double h, F&& f) {
    const double orig = x[coord];
    const double hi = static_cast<double>(static_cast<float>(orig + h));
    const double lo = static_cast<double>(static_cast<float>(orig - h));
    x[coord] = hi;
    const double fp = f(m, x);
    x[coord] = lo;
    const double fm = f(m, x);
    x[coord] = orig;
    return (fp - fm) / (hi - lo);
}

// Central difference of f(m, x) w.r.t. one parameter coordinate, with the
// same float-exact divisor. The parameter is restored before returning.
template <typename F>
double fd_param(bsr::Classifier& m, const std::string& pname, int coord,
                const std::vector<double>& x, double h, F&& f) {
    bsr::Tensor& p = m.param(pname);
    auto d = p.data();
    const float orig = d[coord];
    const float hi = static_cast<float>(orig + h);
    const float lo = static_cast<float>(orig - h);
    d[coord] = hi;
    const double fp = f(m, x);
    d[coord] = lo;
    const double fm = f(m, x);
    d[coord] = orig;
    return (fp - fm) / (static_cast<double>(hi) - static_cast<double>(lo));
}

}  // namespace oracle
