#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bsr/dataset.hpp"
#include "bsr/tensor.hpp"

namespace bsr {

struct TrainStats {
    std::vector<float> loss;      // mean per epoch
    std::vector<float> accuracy;  // running train accuracy per epoch
};

// Small convolutional classifier. Two layouts are provided:
//   conv3: 8/16/32 channels, pools after blocks 1-2, features at 8x8
//   conv4: 12/24/32/40 channels, pools after blocks 1-2, features at 8x8
// Parameters are held in a stable order so checkpoints are reproducible.
class Classifier {
public:
    Classifier() = default;

    static Classifier build(const std::string& architecture_id, const Shape& input_shape,
                            int num_classes, std::uint64_t seed);

    const std::string& architecture_id() const { return arch_; }
    const Shape& input_shape() const { return input_shape_; }
    int num_classes() const { return num_classes_; }
    bool defined() const { return !arch_.empty(); }

    std::vector<std::pair<std::string, Tensor>>& parameters() { return params_; }
    const std::vector<std::pair<std::string, Tensor>>& parameters() const { return params_; }
    Tensor& param(const std::string& name);
    const Tensor& param(const std::string& name) const;

    // Logits for one image. Records on the active tape when inputs are tracked.
    Tensor forward(const Tensor& x) const;

    struct Trace {
        Tensor logits;
        Tensor activation;  // post-relu feature map of the requested layer
        std::string layer;
    };
    // layer "" selects the deepest convolutional activation.
    Trace forward_trace(const Tensor& x, const std::string& layer = "") const;
    std::vector<std::string> activation_layers() const;

    struct Prediction {
        std::vector<float> logits;
        int class_index = -1;
    };
    Prediction predict(const Tensor& image) const;

    TrainStats train(const LabeledDataset& data, int epochs, float lr, int batch_size,
                     std::uint64_t seed);

    // Used by checkpoint loading; validates shapes against the architecture.
    static Classifier from_parameters(const std::string& architecture_id, const Shape& input_shape,
                                      int num_classes,
                                      std::vector<std::pair<std::string, Tensor>> params);

private:
    struct Block {
        int out_channels = 0;
        bool pool = false;
    };
    std::vector<Block> blocks_;
    std::string arch_;
    Shape input_shape_;
    int num_classes_ = 0;
    std::vector<std::pair<std::string, Tensor>> params_;

    void configure(const std::string& architecture_id, const Shape& input_shape, int num_classes);
    Trace run(const Tensor& x, int trace_block) const;
};

// Fraction of images whose prediction matches the label.
float accuracy(const Classifier& model, const LabeledDataset& data);

}  // namespace bsr
