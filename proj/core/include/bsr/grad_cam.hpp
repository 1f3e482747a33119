#pragma once

#include <string>
#include <vector>

#include "bsr/model.hpp"

namespace bsr {

// Max-normalized class-attention map at a convolutional layer's resolution.
// Values are in [0,1]; an all-zero pre-normalization map stays all-zero.
struct Heatmap {
    std::vector<float> values;  // row-major height x width
    int height = 0;
    int width = 0;
    std::string layer;
    int class_index = -1;
    std::string normalization = "max";

    float at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
};

// Channel weights are the spatial mean of d(logit[class])/d(activation);
// the map is relu(sum_c weight_c * activation_c), max-normalized. Layer ""
// selects the deepest convolutional activation.
Heatmap grad_cam(const Classifier& model, const Tensor& image, int class_index,
                 const std::string& layer = "");

// Pearson correlation of the flattened maps; 0 when either map is constant.
// Grids of different sizes are first resampled (nearest) to the larger one.
float heatmap_consistency(const Heatmap& a, const Heatmap& b);

}  // namespace bsr
