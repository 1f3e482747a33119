#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "bsr/rng.hpp"
#include "bsr/tensor.hpp"

namespace bsr {

enum class Interp { Nearest, Bilinear };

// Block shuffle + rotation sampler settings. `shuffle` and `rotate` gate the
// two randomness sources independently so the shuffle-only and rotation-only
// variants reuse the same machinery.
struct BsrConfig {
    int n = 2;                       // blocks per axis
    float tau = 24.0f;               // max rotation angle, degrees
    int copies = 20;                 // gradient samples per iteration
    float min_block_fraction = 0.1f; // lower bound on relative block extent
    Interp interpolation = Interp::Nearest;
    bool shuffle = true;
    bool rotate = true;

    void validate() const;
};

struct DimConfig {
    float probability = 0.5f;
    float resize_low_fraction = 0.9f;

    void validate() const;
};

struct TimConfig {
    int size = 7;
    float sigma = -1.0f;  // <= 0 selects size/3

    void validate() const;
    float effective_sigma() const;
};

struct SimConfig {
    int num_scales = 5;

    void validate() const;
};

struct AdmixConfig {
    int num_mix = 3;
    float strength = 0.2f;
    int num_scales = 5;

    void validate() const;
};

using TransformNode = std::variant<BsrConfig, DimConfig, TimConfig, SimConfig, AdmixConfig>;

// Ordered transform stack. Empty = no transform (plain gradient). When a
// block-shuffle node is present it supplies the copy count and is applied
// after the other nodes within each copy; everything else runs in declared
// order. A Tim node contributes a gradient-smoothing kernel to the attack
// loop rather than an input map.
struct TransformKind {
    std::vector<TransformNode> nodes;

    bool none() const { return nodes.empty(); }
    void validate() const;
    std::string describe() const;  // e.g. "none", "bsr(n=2,tau=24,copies=20)", "dim+bsr(...)"
};

int copies_of(const TransformKind& kind);
// Undefined tensor when no Tim node is present.
Tensor tim_kernel_of(const TransformKind& kind);

// Spatial linear map: each output pixel is a weighted sum of at most four
// source pixels (none = zero fill). One plan covers all channels.
struct PixelPlan {
    struct Cell {
        std::array<int, 4> src{};
        std::array<float, 4> w{};
        int count = 0;
    };
    int height = 0;
    int width = 0;
    std::vector<Cell> cells;  // size height*width, output-pixel indexed
};

// Applies the plan to [C,H,W]; records the scatter adjoint when built under
// an active tape with a tracked input.
Tensor apply_plan(const Tensor& image, const PixelPlan& plan);
// Transpose of apply_plan as a plain function of the gradient.
Tensor backprop_plan(const Tensor& grad_out, const PixelPlan& plan);

// One sampled block-shuffle/rotation draw, with enough bookkeeping to rebuild
// or invert the layout, plus the materialized pixel plan.
struct TransformRecord {
    int n = 1;
    int height = 0;
    int width = 0;
    Interp interpolation = Interp::Nearest;
    std::vector<int> row_splits;               // interior rows, strictly increasing
    std::vector<int> row_perm;                 // output strip j takes source strip row_perm[j]
    std::vector<std::vector<int>> col_splits;  // per source strip, interior columns
    std::vector<std::vector<int>> col_perms;   // within source strip i, slot k takes block col_perms[i][k]
    std::vector<float> angles_deg;             // per source block, strip-major
    PixelPlan plan;
    std::vector<std::uint8_t> zero_fill;       // 1 where no source pixel lands

    void validate_shape(const Shape& s) const;
};

TransformRecord sample_bsr(const BsrConfig& cfg, const Shape& image_shape, Rng& rng);
// Builds the record (and plan) from an explicit layout; sample_bsr uses this
// after drawing its randomness, and tests use it to pin layouts.
TransformRecord materialize_bsr(int n, const Shape& image_shape, Interp interpolation,
                                std::vector<int> row_splits, std::vector<int> row_perm,
                                std::vector<std::vector<int>> col_splits,
                                std::vector<std::vector<int>> col_perms,
                                std::vector<float> angles_deg);
// Layout that undoes `rec` up to rotation (exact inverse when all angles are
// zero): inverse permutations with split points taken from the permuted tiling.
TransformRecord invert_bsr_layout(const TransformRecord& rec);

Tensor apply_bsr(const Tensor& image, const TransformRecord& rec);
Tensor backprop_bsr(const Tensor& grad_out, const TransformRecord& rec);

// Random shrink-then-pad at the original resolution; identity with
// probability 1-p. Tape-aware like apply_plan.
Tensor apply_dim(const Tensor& image, float probability, float resize_low_fraction, Rng& rng);

// Normalized 2-D Gaussian on the integer grid.
Tensor make_tim_kernel(int size, float sigma);
// Same-padding per-channel convolution of [C,H,W] with [K,K]; plain function.
Tensor convolve_same(const Tensor& image, const Tensor& kernel);

// x, x/2, x/4, ... (num_scales entries); exact power-of-two scaling.
std::vector<Tensor> sim_scales(const Tensor& image, int num_scales);

// For each of num_mix pool draws: x + strength*x', then SIM-scaled. The pool
// image is a constant for gradient purposes.
std::vector<Tensor> admix_images(const Tensor& image, const std::vector<Tensor>& pool, int num_mix,
                                 float strength, int num_scales, Rng& rng);

// Expands one gradient-sample copy: non-BSR nodes in declared order, then one
// fresh BSR draw per bundle element. Pool may be null when no Admix node.
std::vector<Tensor> transform_bundle(const Tensor& image, const TransformKind& kind, Rng& rng,
                                     const std::vector<Tensor>* admix_pool);

}  // namespace bsr
