#include "bsr/transform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "bsr/ops.hpp"

namespace bsr {

namespace {

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[256];
    va_list args;
    va_start(args, f);
    vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

bool is_permutation_of_iota(const std::vector<int>& p) {
    std::vector<char> seen(p.size(), 0);
    for (int v : p) {
        if (v < 0 || v >= static_cast<int>(p.size()) || seen[v]) return false;
        seen[v] = 1;
    }
    return true;
}

std::vector<int> inverse_permutation(const std::vector<int>& p) {
    std::vector<int> inv(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = static_cast<int>(i);
    return inv;
}

// Boundaries 0, splits..., extent -> extents per segment.
std::vector<int> segment_extents(const std::vector<int>& splits, int extent) {
    std::vector<int> ext;
    int prev = 0;
    for (int s : splits) {
        ext.push_back(s - prev);
        prev = s;
    }
    ext.push_back(extent - prev);
    return ext;
}

// n-1 interior split points with every segment >= ceil(frac*extent).
std::vector<int> draw_splits(int extent, int n, float frac, Rng& rng) {
    if (n == 1) return {};
    const int m = static_cast<int>(std::ceil(static_cast<double>(frac) * extent));
    if (n * m > extent) {
        throw std::invalid_argument(fmt(
            "image extent %d too small for %d blocks of minimum fraction %g", extent, n, frac));
    }
    const int slack = extent - n * m;
    std::vector<int> offsets(n - 1);
    for (int& o : offsets) o = rng.uniform_int_incl(0, slack);
    std::sort(offsets.begin(), offsets.end());
    std::vector<int> splits(n - 1);
    for (int k = 1; k < n; ++k) splits[k - 1] = k * m + offsets[k - 1];
    return splits;
}

void gather(const PixelPlan& plan, std::span<const float> in, std::span<float> out, int channels) {
    const int hw = plan.height * plan.width;
    for (int ch = 0; ch < channels; ++ch) {
        const float* src = in.data() + static_cast<std::size_t>(ch) * hw;
        float* dst = out.data() + static_cast<std::size_t>(ch) * hw;
        for (int p = 0; p < hw; ++p) {
            const PixelPlan::Cell& cell = plan.cells[p];
            if (cell.count == 1) {
                dst[p] = cell.w[0] * src[cell.src[0]];
                continue;
            }
            float acc = 0.0f;
            for (int k = 0; k < cell.count; ++k) acc += cell.w[k] * src[cell.src[k]];
            dst[p] = acc;
        }
    }
}

void scatter(const PixelPlan& plan, std::span<const float> grad_out, std::span<float> grad_in,
             int channels) {
    const int hw = plan.height * plan.width;
    for (int ch = 0; ch < channels; ++ch) {
        const float* g = grad_out.data() + static_cast<std::size_t>(ch) * hw;
        float* gx = grad_in.data() + static_cast<std::size_t>(ch) * hw;
        for (int p = 0; p < hw; ++p) {
            const PixelPlan::Cell& cell = plan.cells[p];
            for (int k = 0; k < cell.count; ++k) gx[cell.src[k]] += cell.w[k] * g[p];
        }
    }
}

void check_image(const Tensor& image, const PixelPlan& plan, const char* who) {
    if (image.rank() != 3) {
        throw std::invalid_argument(std::string(who) + ": expected [C,H,W], got " +
                                    shape_str(image.shape()));
    }
    if (image.shape()[1] != plan.height || image.shape()[2] != plan.width) {
        throw std::invalid_argument(fmt("%s: image %dx%d does not match plan %dx%d", who,
                                        image.shape()[1], image.shape()[2], plan.height,
                                        plan.width));
    }
}

// Writes the plan cells of one h x w block rotated by angle_deg about its
// center. Source reads use the inverse rotation; targets falling outside the
// block stay zero-filled.
void fill_block(PixelPlan& plan, int img_w, int out_r0, int out_c0, int src_r0, int src_c0, int h,
                int w, float angle_deg, Interp interp) {
    auto cell_at = [&](int lr, int lc) -> PixelPlan::Cell& {
        return plan.cells[static_cast<std::size_t>(out_r0 + lr) * img_w + (out_c0 + lc)];
    };
    if (angle_deg == 0.0f) {
        for (int lr = 0; lr < h; ++lr) {
            for (int lc = 0; lc < w; ++lc) {
                PixelPlan::Cell& cell = cell_at(lr, lc);
                cell.count = 1;
                cell.src[0] = (src_r0 + lr) * img_w + (src_c0 + lc);
                cell.w[0] = 1.0f;
            }
        }
        return;
    }
    const double rad = static_cast<double>(angle_deg) * std::numbers::pi / 180.0;
    const double cs = std::cos(rad);
    const double sn = std::sin(rad);
    const double cy = (h - 1) / 2.0;
    const double cx = (w - 1) / 2.0;
    for (int lr = 0; lr < h; ++lr) {
        for (int lc = 0; lc < w; ++lc) {
            PixelPlan::Cell& cell = cell_at(lr, lc);
            const double dy = lr - cy;
            const double dx = lc - cx;
            const double sx = cs * dx + sn * dy + cx;
            const double sy = -sn * dx + cs * dy + cy;
            if (interp == Interp::Nearest) {
                const long sr = std::lround(sy);
                const long sc = std::lround(sx);
                if (sr < 0 || sr >= h || sc < 0 || sc >= w) continue;
                cell.count = 1;
                cell.src[0] = (src_r0 + static_cast<int>(sr)) * img_w +
                              (src_c0 + static_cast<int>(sc));
                cell.w[0] = 1.0f;
            } else {
                if (sy < 0.0 || sy > h - 1 || sx < 0.0 || sx > w - 1) continue;
                const int r0 = static_cast<int>(std::floor(sy));
                const int c0 = static_cast<int>(std::floor(sx));
                const int r1 = std::min(r0 + 1, h - 1);
                const int c1 = std::min(c0 + 1, w - 1);
                const float fr = static_cast<float>(sy - r0);
                const float fc = static_cast<float>(sx - c0);
                const float ws[4] = {(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc};
                const int rs[4] = {r0, r0, r1, r1};
                const int cs_[4] = {c0, c1, c0, c1};
                for (int k = 0; k < 4; ++k) {
                    if (ws[k] == 0.0f) continue;
                    cell.src[cell.count] = (src_r0 + rs[k]) * img_w + (src_c0 + cs_[k]);
                    cell.w[cell.count] = ws[k];
                    ++cell.count;
                }
            }
        }
    }
}

}  // namespace

void BsrConfig::validate() const {
    if (n < 1) throw std::invalid_argument("bsr: n must be >= 1");
    if (tau < 0.0f || tau > 180.0f) throw std::invalid_argument("bsr: tau must be in [0, 180]");
    if (copies < 1) throw std::invalid_argument("bsr: copies must be >= 1");
    if (!(min_block_fraction > 0.0f) || min_block_fraction > 1.0f / static_cast<float>(n)) {
        throw std::invalid_argument(fmt("bsr: min_block_fraction must be in (0, 1/%d]", n));
    }
}

void DimConfig::validate() const {
    if (probability < 0.0f || probability > 1.0f) {
        throw std::invalid_argument("dim: probability must be in [0, 1]");
    }
    if (!(resize_low_fraction > 0.0f) || resize_low_fraction > 1.0f) {
        throw std::invalid_argument("dim: resize_low_fraction must be in (0, 1]");
    }
}

void TimConfig::validate() const {
    if (size < 1 || size % 2 == 0) throw std::invalid_argument("tim: size must be odd and >= 1");
}

float TimConfig::effective_sigma() const {
    return sigma > 0.0f ? sigma : static_cast<float>(size) / 3.0f;
}

void SimConfig::validate() const {
    if (num_scales < 1) throw std::invalid_argument("sim: num_scales must be >= 1");
}

void AdmixConfig::validate() const {
    if (num_mix < 1) throw std::invalid_argument("admix: num_mix must be >= 1");
    if (strength < 0.0f) throw std::invalid_argument("admix: strength must be >= 0");
    if (num_scales < 1) throw std::invalid_argument("admix: num_scales must be >= 1");
}

void TransformKind::validate() const {
    for (const auto& node : nodes) {
        std::visit([](const auto& cfg) { cfg.validate(); }, node);
    }
}

std::string TransformKind::describe() const {
    if (nodes.empty()) return "none";
    std::string out;
    for (const auto& node : nodes) {
        if (!out.empty()) out += "+";
        if (const auto* b = std::get_if<BsrConfig>(&node)) {
            out += fmt("bsr(n=%d,tau=%g,copies=%d,frac=%g,%s%s%s)", b->n,
                       static_cast<double>(b->tau), b->copies,
                       static_cast<double>(b->min_block_fraction),
                       b->interpolation == Interp::Nearest ? "nearest" : "bilinear",
                       b->shuffle ? "" : ",noshuffle", b->rotate ? "" : ",norotate");
        } else if (const auto* d = std::get_if<DimConfig>(&node)) {
            out += fmt("dim(p=%g,low=%g)", static_cast<double>(d->probability),
                       static_cast<double>(d->resize_low_fraction));
        } else if (const auto* t = std::get_if<TimConfig>(&node)) {
            out += fmt("tim(size=%d,sigma=%g)", t->size,
                       static_cast<double>(t->effective_sigma()));
        } else if (const auto* s = std::get_if<SimConfig>(&node)) {
            out += fmt("sim(scales=%d)", s->num_scales);
        } else if (const auto* a = std::get_if<AdmixConfig>(&node)) {
            out += fmt("admix(mix=%d,strength=%g,scales=%d)", a->num_mix,
                       static_cast<double>(a->strength), a->num_scales);
        }
    }
    return out;
}

int copies_of(const TransformKind& kind) {
    for (const auto& node : kind.nodes) {
        if (const auto* b = std::get_if<BsrConfig>(&node)) return b->copies;
    }
    return 1;
}

Tensor tim_kernel_of(const TransformKind& kind) {
    for (const auto& node : kind.nodes) {
        if (const auto* t = std::get_if<TimConfig>(&node)) {
            return make_tim_kernel(t->size, t->effective_sigma());
        }
    }
    return Tensor();
}

Tensor apply_plan(const Tensor& image, const PixelPlan& plan) {
    check_image(image, plan, "apply_plan");
    const int channels = image.shape()[0];
    Tensor out = Tensor::zeros(image.shape());
    gather(plan, image.data(), out.data(), channels);
    Tape* tape = Tape::active();
    if (tape && Tape::tracked(image)) {
        tape->record(out, [image, out, plan, channels]() {
            if (!out.has_grad()) return;
            scatter(plan, out.grad().data(), Tape::grad_span(image), channels);
        });
    }
    return out;
}

Tensor backprop_plan(const Tensor& grad_out, const PixelPlan& plan) {
    check_image(grad_out, plan, "backprop_plan");
    Tensor grad_in = Tensor::zeros(grad_out.shape());
    scatter(plan, grad_out.data(), grad_in.data(), grad_out.shape()[0]);
    return grad_in;
}

void TransformRecord::validate_shape(const Shape& s) const {
    if (s.size() != 3 || s[1] != height || s[2] != width) {
        throw std::invalid_argument(fmt("transform record for %dx%d used with image %s", height,
                                        width, shape_str(s).c_str()));
    }
}

TransformRecord materialize_bsr(int n, const Shape& image_shape, Interp interpolation,
                                std::vector<int> row_splits, std::vector<int> row_perm,
                                std::vector<std::vector<int>> col_splits,
                                std::vector<std::vector<int>> col_perms,
                                std::vector<float> angles_deg) {
    if (image_shape.size() != 3) {
        throw std::invalid_argument("materialize_bsr: image shape must be [C,H,W]");
    }
    const int H = image_shape[1];
    const int W = image_shape[2];
    const auto sz = static_cast<std::size_t>(n);
    if (n < 1 || row_splits.size() != sz - 1 || row_perm.size() != sz ||
        col_splits.size() != sz || col_perms.size() != sz || angles_deg.size() != sz * sz) {
        throw std::invalid_argument("materialize_bsr: layout arrays do not agree with n");
    }
    auto check_splits = [](const std::vector<int>& splits, int extent) {
        int prev = 0;
        for (int s : splits) {
            if (s <= prev || s >= extent) {
                throw std::invalid_argument(
                    fmt("materialize_bsr: split %d invalid for extent %d", s, extent));
            }
            prev = s;
        }
    };
    check_splits(row_splits, H);
    if (!is_permutation_of_iota(row_perm)) {
        throw std::invalid_argument("materialize_bsr: row_perm is not a permutation");
    }
    for (int i = 0; i < n; ++i) {
        check_splits(col_splits[i], W);
        if (col_splits[i].size() != sz - 1 || !is_permutation_of_iota(col_perms[i])) {
            throw std::invalid_argument("materialize_bsr: bad column layout for strip " +
                                        std::to_string(i));
        }
    }

    TransformRecord rec;
    rec.n = n;
    rec.height = H;
    rec.width = W;
    rec.interpolation = interpolation;
    rec.row_splits = std::move(row_splits);
    rec.row_perm = std::move(row_perm);
    rec.col_splits = std::move(col_splits);
    rec.col_perms = std::move(col_perms);
    rec.angles_deg = std::move(angles_deg);
    rec.plan.height = H;
    rec.plan.width = W;
    rec.plan.cells.assign(static_cast<std::size_t>(H) * W, PixelPlan::Cell{});

    const std::vector<int> heights = segment_extents(rec.row_splits, H);
    std::vector<int> src_r0(n, 0);
    for (int i = 1; i < n; ++i) src_r0[i] = src_r0[i - 1] + heights[i - 1];
    std::vector<std::vector<int>> widths(n), src_c0(n);
    for (int i = 0; i < n; ++i) {
        widths[i] = segment_extents(rec.col_splits[i], W);
        src_c0[i].assign(n, 0);
        for (int c = 1; c < n; ++c) src_c0[i][c] = src_c0[i][c - 1] + widths[i][c - 1];
    }

    int out_r = 0;
    for (int j = 0; j < n; ++j) {
        const int i = rec.row_perm[j];
        const int h = heights[i];
        int out_c = 0;
        for (int k = 0; k < n; ++k) {
            const int c = rec.col_perms[i][k];
            const int w = widths[i][c];
            fill_block(rec.plan, W, out_r, out_c, src_r0[i], src_c0[i][c], h, w,
                       rec.angles_deg[static_cast<std::size_t>(i) * n + c], interpolation);
            out_c += w;
        }
        out_r += h;
    }

    rec.zero_fill.resize(rec.plan.cells.size());
    for (std::size_t p = 0; p < rec.plan.cells.size(); ++p) {
        rec.zero_fill[p] = rec.plan.cells[p].count == 0 ? 1 : 0;
    }
    return rec;
}

TransformRecord sample_bsr(const BsrConfig& cfg, const Shape& image_shape, Rng& rng) {
    cfg.validate();
    if (image_shape.size() != 3) {
        throw std::invalid_argument("sample_bsr: image shape must be [C,H,W]");
    }
    const int H = image_shape[1];
    const int W = image_shape[2];
    const int n = cfg.n;
    const bool draw_angles = cfg.rotate && cfg.tau > 0.0f;

    std::vector<int> row_splits = draw_splits(H, n, cfg.min_block_fraction, rng);
    std::vector<int> row_perm(n);
    std::iota(row_perm.begin(), row_perm.end(), 0);
    if (cfg.shuffle) rng.shuffle(row_perm);

    std::vector<std::vector<int>> col_splits(n), col_perms(n);
    std::vector<float> angles(static_cast<std::size_t>(n) * n, 0.0f);
    for (int i = 0; i < n; ++i) {
        col_splits[i] = draw_splits(W, n, cfg.min_block_fraction, rng);
        col_perms[i].resize(n);
        std::iota(col_perms[i].begin(), col_perms[i].end(), 0);
        if (cfg.shuffle) rng.shuffle(col_perms[i]);
        if (draw_angles) {
            for (int c = 0; c < n; ++c) {
                angles[static_cast<std::size_t>(i) * n + c] = rng.uniform_float(-cfg.tau, cfg.tau);
            }
        }
    }
    return materialize_bsr(n, image_shape, cfg.interpolation, std::move(row_splits),
                           std::move(row_perm), std::move(col_splits), std::move(col_perms),
                           std::move(angles));
}

TransformRecord invert_bsr_layout(const TransformRecord& rec) {
    const int n = rec.n;
    const std::vector<int> heights = segment_extents(rec.row_splits, rec.height);
    std::vector<std::vector<int>> widths(n);
    for (int i = 0; i < n; ++i) widths[i] = segment_extents(rec.col_splits[i], rec.width);

    // Split the transformed image along the permuted tiling.
    std::vector<int> inv_row_splits;
    int acc = 0;
    for (int j = 0; j < n - 1; ++j) {
        acc += heights[rec.row_perm[j]];
        inv_row_splits.push_back(acc);
    }
    std::vector<int> inv_row_perm = inverse_permutation(rec.row_perm);

    std::vector<std::vector<int>> inv_col_splits(n), inv_col_perms(n);
    std::vector<float> inv_angles(static_cast<std::size_t>(n) * n, 0.0f);
    for (int j = 0; j < n; ++j) {
        const int i = rec.row_perm[j];
        acc = 0;
        for (int k = 0; k < n - 1; ++k) {
            acc += widths[i][rec.col_perms[i][k]];
            inv_col_splits[j].push_back(acc);
        }
        inv_col_perms[j] = inverse_permutation(rec.col_perms[i]);
        for (int k = 0; k < n; ++k) {
            inv_angles[static_cast<std::size_t>(j) * n + k] =
                -rec.angles_deg[static_cast<std::size_t>(i) * n + rec.col_perms[i][k]];
        }
    }
    return materialize_bsr(n, {1, rec.height, rec.width}, rec.interpolation,
                           std::move(inv_row_splits), std::move(inv_row_perm),
                           std::move(inv_col_splits), std::move(inv_col_perms),
                           std::move(inv_angles));
}

Tensor apply_bsr(const Tensor& image, const TransformRecord& rec) {
    rec.validate_shape(image.shape());
    return apply_plan(image, rec.plan);
}

Tensor backprop_bsr(const Tensor& grad_out, const TransformRecord& rec) {
    rec.validate_shape(grad_out.shape());
    return backprop_plan(grad_out, rec.plan);
}

Tensor apply_dim(const Tensor& image, float probability, float resize_low_fraction, Rng& rng) {
    DimConfig{probability, resize_low_fraction}.validate();
    if (image.rank() != 3) {
        throw std::invalid_argument("apply_dim: expected [C,H,W], got " + shape_str(image.shape()));
    }
    const int H = image.shape()[1];
    const int W = image.shape()[2];
    if (rng.next_double() >= probability) return image;

    const int lo_w = std::max(1, static_cast<int>(std::floor(resize_low_fraction * W)));
    const int sw = rng.uniform_int_incl(lo_w, W);
    const int sh = std::max(1, (H * sw) / W);
    const int off_r = rng.uniform_int_incl(0, H - sh);
    const int off_c = rng.uniform_int_incl(0, W - sw);

    PixelPlan plan;
    plan.height = H;
    plan.width = W;
    plan.cells.assign(static_cast<std::size_t>(H) * W, PixelPlan::Cell{});
    for (int lr = 0; lr < sh; ++lr) {
        const int src_r = std::clamp(static_cast<int>((lr + 0.5) * H / sh), 0, H - 1);
        for (int lc = 0; lc < sw; ++lc) {
            const int src_c = std::clamp(static_cast<int>((lc + 0.5) * W / sw), 0, W - 1);
            PixelPlan::Cell& cell =
                plan.cells[static_cast<std::size_t>(off_r + lr) * W + (off_c + lc)];
            cell.count = 1;
            cell.src[0] = src_r * W + src_c;
            cell.w[0] = 1.0f;
        }
    }
    return apply_plan(image, plan);
}

Tensor make_tim_kernel(int size, float sigma) {
    if (size < 1 || size % 2 == 0) {
        throw std::invalid_argument("make_tim_kernel: size must be odd and >= 1, got " +
                                    std::to_string(size));
    }
    if (!(sigma > 0.0f)) throw std::invalid_argument("make_tim_kernel: sigma must be > 0");
    const int half = size / 2;
    std::vector<double> raw(static_cast<std::size_t>(size) * size);
    double total = 0.0;
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            const double dr = r - half;
            const double dc = c - half;
            const double v = std::exp(-(dr * dr + dc * dc) /
                                      (2.0 * static_cast<double>(sigma) * sigma));
            raw[static_cast<std::size_t>(r) * size + c] = v;
            total += v;
        }
    }
    Tensor kernel = Tensor::zeros({size, size});
    auto out = kernel.data();
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = static_cast<float>(raw[i] / total);
    }
    return kernel;
}

Tensor convolve_same(const Tensor& image, const Tensor& kernel) {
    if (image.rank() != 3 || kernel.rank() != 2 || kernel.shape()[0] != kernel.shape()[1]) {
        throw std::invalid_argument("convolve_same: need [C,H,W] image and square [K,K] kernel");
    }
    const int C = image.shape()[0];
    const int H = image.shape()[1];
    const int W = image.shape()[2];
    const int K = kernel.shape()[0];
    const int half = K / 2;
    Tensor out = Tensor::zeros(image.shape());
    auto src = image.data();
    auto k = kernel.data();
    auto dst = out.data();
    for (int ch = 0; ch < C; ++ch) {
        const std::size_t base = static_cast<std::size_t>(ch) * H * W;
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) {
                double acc = 0.0;
                for (int kr = 0; kr < K; ++kr) {
                    const int sr = r + kr - half;
                    if (sr < 0 || sr >= H) continue;
                    for (int kc = 0; kc < K; ++kc) {
                        const int sc = c + kc - half;
                        if (sc < 0 || sc >= W) continue;
                        acc += static_cast<double>(k[static_cast<std::size_t>(kr) * K + kc]) *
                               src[base + static_cast<std::size_t>(sr) * W + sc];
                    }
                }
                dst[base + static_cast<std::size_t>(r) * W + c] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

std::vector<Tensor> sim_scales(const Tensor& image, int num_scales) {
    SimConfig{num_scales}.validate();
    std::vector<Tensor> out;
    out.reserve(num_scales);
    out.push_back(image);
    float scale = 1.0f;
    for (int i = 1; i < num_scales; ++i) {
        scale *= 0.5f;
        out.push_back(mul_scalar(image, scale));
    }
    return out;
}

std::vector<Tensor> admix_images(const Tensor& image, const std::vector<Tensor>& pool, int num_mix,
                                 float strength, int num_scales, Rng& rng) {
    AdmixConfig{num_mix, strength, num_scales}.validate();
    if (pool.empty()) throw std::invalid_argument("admix_images: empty pool");
    std::vector<Tensor> out;
    out.reserve(static_cast<std::size_t>(num_mix) * num_scales);
    for (int j = 0; j < num_mix; ++j) {
        const Tensor& other = pool[rng.uniform_int(static_cast<int>(pool.size()))];
        if (other.shape() != image.shape()) {
            throw std::invalid_argument("admix_images: pool image shape " +
                                        shape_str(other.shape()) + " does not match " +
                                        shape_str(image.shape()));
        }
        Tensor mixed = add(image, mul_scalar(other, strength));
        for (Tensor& t : sim_scales(mixed, num_scales)) out.push_back(std::move(t));
    }
    return out;
}

std::vector<Tensor> transform_bundle(const Tensor& image, const TransformKind& kind, Rng& rng,
                                     const std::vector<Tensor>* admix_pool) {
    std::vector<Tensor> bundle{image};
    for (const auto& node : kind.nodes) {
        if (const auto* d = std::get_if<DimConfig>(&node)) {
            for (Tensor& t : bundle) {
                t = apply_dim(t, d->probability, d->resize_low_fraction, rng);
            }
        } else if (const auto* s = std::get_if<SimConfig>(&node)) {
            std::vector<Tensor> next;
            next.reserve(bundle.size() * s->num_scales);
            for (const Tensor& t : bundle) {
                for (Tensor& u : sim_scales(t, s->num_scales)) next.push_back(std::move(u));
            }
            bundle = std::move(next);
        } else if (const auto* a = std::get_if<AdmixConfig>(&node)) {
            if (admix_pool == nullptr || admix_pool->empty()) {
                throw std::invalid_argument("transform_bundle: admix requires a non-empty pool");
            }
            std::vector<Tensor> next;
            next.reserve(bundle.size() * a->num_mix * a->num_scales);
            for (const Tensor& t : bundle) {
                for (Tensor& u :
                     admix_images(t, *admix_pool, a->num_mix, a->strength, a->num_scales, rng)) {
                    next.push_back(std::move(u));
                }
            }
            bundle = std::move(next);
        }
    }
    for (const auto& node : kind.nodes) {
        if (const auto* b = std::get_if<BsrConfig>(&node)) {
            for (Tensor& t : bundle) {
                t = apply_bsr(t, sample_bsr(*b, t.shape(), rng));
            }
        }
    }
    return bundle;
}

}  // namespace bsr
