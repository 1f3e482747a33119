#pragma once

#include <cstdint>
#include <vector>

#include "bsr/tensor.hpp"

namespace bsr {

// Half-open pixel box [r0, r1) x [c0, c1).
struct PixelBox {
    int r0 = 0;
    int c0 = 0;
    int r1 = 0;
    int c1 = 0;
    int area() const { return (r1 - r0) * (c1 - c0); }
    bool contains(int r, int c) const { return r >= r0 && r < r1 && c >= c0 && c < c1; }
};

// Images in [0,1] with class labels. `boxes` carries the generating shape's
// bounding box for synthetic data and is empty for ingested directories.
struct LabeledDataset {
    std::vector<Tensor> images;  // each [C,H,W]
    std::vector<int> labels;
    std::vector<PixelBox> boxes;
    int num_classes = 0;

    std::size_t size() const { return images.size(); }
    void validate() const;  // labels in range, uniform shapes
};

struct SyntheticConfig {
    int image_size = 32;
    int num_classes = 4;  // 2..6 supported
    int count = 0;
    std::uint64_t seed = 0;
    float noise = 0.10f;
};

// Parametric figure/texture images: each image scatters a few small solid
// figures filled with a class-specific micro-texture over a random-color
// background, with a soft class-dependent placement bias and random dark
// occluder patches. Pixel values are quantized to the 8-bit grid so that
// file round trips are exact. Deterministic in (seed, index).
LabeledDataset synthesize_shapes(const SyntheticConfig& cfg);

}  // namespace bsr
