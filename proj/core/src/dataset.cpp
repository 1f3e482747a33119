#include "bsr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "bsr/image_io.hpp"
#include "bsr/rng.hpp"

namespace bsr {

void LabeledDataset::validate() const {
    if (images.size() != labels.size()) {
        throw std::invalid_argument("dataset: " + std::to_string(images.size()) + " images vs " +
                                    std::to_string(labels.size()) + " labels");
    }
    if (!boxes.empty() && boxes.size() != images.size()) {
        throw std::invalid_argument("dataset: box count does not match image count");
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) {
            throw std::invalid_argument("dataset: label " + std::to_string(labels[i]) +
                                        " out of range at index " + std::to_string(i));
        }
        if (images[i].shape() != images[0].shape()) {
            throw std::invalid_argument("dataset: image shapes differ at index " + std::to_string(i));
        }
    }
}

namespace {

float gaussian(Rng& rng, float sigma) {
    // Box-Muller; 1-u keeps the log argument strictly positive.
    double u = 1.0 - rng.next_double();
    double v = rng.next_double();
    return sigma * static_cast<float>(std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586 * v));
}

struct Palette {
    float bg[3];
    float fa[3];  // primary fill
    float fb[3];  // secondary fill (texture contrast)
};

float l1_dist(const float* a, const float* b) {
    return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
}

// Figure colors stand well clear of the background, but the two fill colors
// stay moderately close to each other: the texture cue has to be attackable
// within a 16/255 pixel budget or every attack saturates at zero.
Palette pick_palette(Rng& rng) {
    Palette p;
    for (int attempt = 0; attempt < 128; ++attempt) {
        for (int ch = 0; ch < 3; ++ch) {
            p.bg[ch] = rng.uniform_float(0.05f, 0.95f);
            p.fa[ch] = rng.uniform_float(0.10f, 0.90f);
        }
        const float mix = rng.uniform_float(0.20f, 0.32f);
        for (int ch = 0; ch < 3; ++ch) {
            p.fb[ch] = p.fa[ch] + (p.fa[ch] > 0.5f ? -mix : mix);
        }
        if (l1_dist(p.fa, p.bg) >= 0.9f && l1_dist(p.fb, p.bg) >= 0.7f) return p;
    }
    // Force contrast if rejection keeps failing.
    for (int ch = 0; ch < 3; ++ch) {
        p.fa[ch] = p.bg[ch] > 0.5f ? 0.15f : 0.85f;
        p.fb[ch] = p.fa[ch] + (p.fa[ch] > 0.5f ? -0.17f : 0.17f);
    }
    return p;
}

enum class ShapeKind { Disc, Square, Triangle, Cross, Ring, Checker };

// Class-specific fill pattern inside the shape. Keyed to image coordinates
// so the phase moves with the figure; the pattern scale (~3 px) is small
// enough that block-level shuffling and moderate rotation keep it readable,
// which gives the classifiers a local cue in addition to the global outline.
bool texture_secondary(int label, int r, int c, int cy, int cx) {
    const int dr = r - cy;
    const int dc = c - cx;
    switch (label) {
        case 0: return false;                          // solid
        case 1: return ((r + c) / 3) % 2 == 0;         // diagonal stripes
        case 2: return ((r - c + 96) / 3) % 2 == 0;    // anti-diagonal stripes
        case 3: return (((r / 3) % 2) ^ ((c / 3) % 2)) != 0;  // fine checker
        case 4: {                                      // concentric bands
            const int d2 = dr * dr + dc * dc;
            return (static_cast<int>(std::sqrt(static_cast<double>(d2))) / 2) % 2 == 0;
        }
        case 5: return (r % 4) < 2 && (c % 4) < 2;     // dot grid
    }
    return false;
}

bool inside_shape(ShapeKind kind, int r, int c, int cy, int cx, int half) {
    const int dr = r - cy;
    const int dc = c - cx;
    switch (kind) {
        case ShapeKind::Disc:
            return dr * dr + dc * dc <= half * half;
        case ShapeKind::Square:
            return std::abs(dr) <= half && std::abs(dc) <= half;
        case ShapeKind::Triangle: {
            // Apex up: row cy-half is the tip, row cy+half the full-width base.
            if (dr < -half || dr > half) return false;
            const int w = (dr + half) / 2;
            return std::abs(dc) <= w;
        }
        case ShapeKind::Cross: {
            const int thick = std::max(1, half / 3);
            return (std::abs(dr) <= thick && std::abs(dc) <= half) ||
                   (std::abs(dc) <= thick && std::abs(dr) <= half);
        }
        case ShapeKind::Ring: {
            const int d2 = dr * dr + dc * dc;
            const int inner = std::max(1, (half * 11) / 20);
            return d2 <= half * half && d2 >= inner * inner;
        }
        case ShapeKind::Checker: {
            if (std::abs(dr) > half || std::abs(dc) > half) return false;
            const int cell = std::max(2, half / 2);
            return (((dr + half) / cell) + ((dc + half) / cell)) % 2 == 0;
        }
    }
    return false;
}

}  // namespace

LabeledDataset synthesize_shapes(const SyntheticConfig& cfg) {
    if (cfg.num_classes < 2 || cfg.num_classes > 6) {
        throw std::invalid_argument("synthesize_shapes: num_classes must be in [2,6], got " +
                                    std::to_string(cfg.num_classes));
    }
    if (cfg.image_size < 16) {
        throw std::invalid_argument("synthesize_shapes: image_size must be >= 16");
    }
    const int H = cfg.image_size;
    const int W = cfg.image_size;

    LabeledDataset ds;
    ds.num_classes = cfg.num_classes;
    ds.images.reserve(cfg.count);
    ds.labels.reserve(cfg.count);
    ds.boxes.reserve(cfg.count);

    Rng base(cfg.seed);
    for (int idx = 0; idx < cfg.count; ++idx) {
        Rng rng = base.derive(static_cast<std::uint64_t>(idx));
        const int label = idx % cfg.num_classes;
        const Palette pal = pick_palette(rng);

        // Several small same-class figures instead of one large one: the
        // class evidence is spread over disjoint loci, so no single image
        // region is indispensable and different models can weight the loci
        // differently.
        struct Figure {
            int cy, cx, half;
            ShapeKind kind;
        };
        std::vector<Figure> figures;
        const int want = rng.uniform_int_incl(3, 4);
        for (int attempt = 0; attempt < 64 && static_cast<int>(figures.size()) < want; ++attempt) {
            Figure f;
            f.half = rng.uniform_int_incl(4, 6);
            // Soft class-quadrant placement prior. Real photo datasets have
            // position bias too; it gives block shuffling something to
            // marginalize that whole-image rotation cannot.
            if (rng.next_double() < 0.6) {
                const int q = label % 4;
                const int midy = H / 2, midx = W / 2;
                const int y0 = (q / 2 == 0) ? f.half + 1 : midy;
                const int y1 = (q / 2 == 0) ? midy : H - f.half - 2;
                const int x0 = (q % 2 == 0) ? f.half + 1 : midx;
                const int x1 = (q % 2 == 0) ? midx : W - f.half - 2;
                f.cy = rng.uniform_int_incl(std::min(y0, y1), std::max(y0, y1));
                f.cx = rng.uniform_int_incl(std::min(x0, x1), std::max(x0, x1));
            } else {
                f.cy = rng.uniform_int_incl(f.half + 1, H - f.half - 2);
                f.cx = rng.uniform_int_incl(f.half + 1, W - f.half - 2);
            }
            // Solid-interior kinds only; the patterned kinds (ring, checker,
            // thin cross) would interfere with the class texture.
            f.kind = static_cast<ShapeKind>(rng.uniform_int(3));
            bool clear = true;
            for (const Figure& g : figures) {
                const int dy = std::abs(f.cy - g.cy);
                const int dx = std::abs(f.cx - g.cx);
                if (std::max(dy, dx) < f.half + g.half + 2) clear = false;
            }
            if (clear) figures.push_back(f);
        }

        Tensor img = Tensor::zeros({3, H, W});
        auto px = img.data();
        PixelBox box{H, W, 0, 0};
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) {
                const Figure* hit = nullptr;
                for (const Figure& f : figures) {
                    if (inside_shape(f.kind, r, c, f.cy, f.cx, f.half)) {
                        hit = &f;
                        break;
                    }
                }
                const float* color = pal.bg;
                if (hit) {
                    box.r0 = std::min(box.r0, r);
                    box.c0 = std::min(box.c0, c);
                    box.r1 = std::max(box.r1, r + 1);
                    box.c1 = std::max(box.c1, c + 1);
                    color = texture_secondary(label, r, c, hit->cy, hit->cx) ? pal.fb : pal.fa;
                }
                for (int ch = 0; ch < 3; ++ch) {
                    px[(ch * H + r) * W + c] = quantize8(color[ch] + gaussian(rng, cfg.noise));
                }
            }
        }
        // Random dark patches teach occlusion tolerance; without them the
        // models treat any zero-filled region as wildly out of distribution.
        const int occluders = rng.uniform_int(3);  // 0, 1 or 2
        for (int o = 0; o < occluders; ++o) {
            const int oh = rng.uniform_int_incl(3, 7);
            const int ow = rng.uniform_int_incl(3, 7);
            const int orr = rng.uniform_int_incl(0, H - oh);
            const int oc = rng.uniform_int_incl(0, W - ow);
            for (int r = orr; r < orr + oh; ++r)
                for (int c = oc; c < oc + ow; ++c)
                    for (int ch = 0; ch < 3; ++ch) px[(ch * H + r) * W + c] = 0.0f;
        }

        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
        ds.boxes.push_back(box);
    }
    ds.validate();
    return ds;
}

}  // namespace bsr
