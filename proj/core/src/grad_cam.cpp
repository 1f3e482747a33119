#include "bsr/grad_cam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bsr/ops.hpp"

namespace bsr {

Heatmap grad_cam(const Classifier& model, const Tensor& image, int class_index,
                 const std::string& layer) {
    if (!model.defined()) throw std::invalid_argument("grad_cam: undefined model");
    if (class_index < 0 || class_index >= model.num_classes()) {
        throw std::invalid_argument("grad_cam: class index " + std::to_string(class_index) +
                                    " out of range");
    }

    Tape tape;
    Classifier::Trace tr = model.forward_trace(image, layer);
    Tensor score = select(tr.logits, class_index);
    tape.backward(score);

    const Shape& as = tr.activation.shape();
    const int C = as[0];
    const int H = as[1];
    const int W = as[2];
    const int hw = H * W;
    auto act = tr.activation.data();
    auto grad = tr.activation.grad().data();

    Heatmap hm;
    hm.height = H;
    hm.width = W;
    hm.layer = tr.layer;
    hm.class_index = class_index;
    hm.values.assign(static_cast<std::size_t>(hw), 0.0f);

    for (int ch = 0; ch < C; ++ch) {
        const std::size_t base = static_cast<std::size_t>(ch) * hw;
        double wsum = 0.0;
        for (int p = 0; p < hw; ++p) wsum += grad[base + p];
        const float weight = static_cast<float>(wsum / hw);
        for (int p = 0; p < hw; ++p) hm.values[p] += weight * act[base + p];
    }
    float peak = 0.0f;
    for (float& v : hm.values) {
        v = std::max(v, 0.0f);
        peak = std::max(peak, v);
    }
    if (peak > 0.0f) {
        for (float& v : hm.values) v /= peak;
    }
    return hm;
}

namespace {

std::vector<float> resample_nearest(const std::vector<float>& src, int sh, int sw, int dh, int dw) {
    std::vector<float> dst(static_cast<std::size_t>(dh) * dw);
    for (int r = 0; r < dh; ++r) {
        const int sr = std::min(sh - 1, (r * sh) / dh);
        for (int c = 0; c < dw; ++c) {
            const int sc = std::min(sw - 1, (c * sw) / dw);
            dst[static_cast<std::size_t>(r) * dw + c] = src[static_cast<std::size_t>(sr) * sw + sc];
        }
    }
    return dst;
}

}  // namespace

float heatmap_consistency(const Heatmap& a, const Heatmap& b) {
    if (a.values.empty() || b.values.empty()) {
        throw std::invalid_argument("heatmap_consistency: empty heatmap");
    }
    std::vector<float> va = a.values;
    std::vector<float> vb = b.values;
    const int h = std::max(a.height, b.height);
    const int w = std::max(a.width, b.width);
    if (a.height != h || a.width != w) va = resample_nearest(va, a.height, a.width, h, w);
    if (b.height != h || b.width != w) vb = resample_nearest(vb, b.height, b.width, h, w);

    const std::size_t n = va.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += va[i];
        mb += vb[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = va[i] - ma;
        const double db = vb[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0f;
    const double r = sab / std::sqrt(saa * sbb);
    return static_cast<float>(std::clamp(r, -1.0, 1.0));
}

}  // namespace bsr
