#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bsr/attack.hpp"

namespace bsr {

struct ModelSpec {
    std::string arch;
    std::string checkpoint;
    std::uint64_t train_seed = 0;
};

// Parsed experiment file. Sections: [dataset], [models], [attack], [eval],
// [ablate]. Unknown sections or keys are errors; relative paths are resolved
// against the config file's directory. User-facing epsilon/step live on the
// 0-255 scale and are converted by attack_config().
struct ExperimentConfig {
    // [dataset]
    std::string dataset_source = "synthetic";  // synthetic | directory
    std::string dataset_directory;
    int image_size = 32;
    int classes = 4;
    int count = 600;
    std::uint64_t dataset_seed = 1;
    float noise = 0.10f;

    // [models]
    std::vector<ModelSpec> models;
    int train_epochs = 30;
    float train_lr = 0.01f;
    int train_batch = 4;

    // [attack]
    float epsilon_255 = 16.0f;
    int iters = 10;
    float step_255 = -1.0f;  // <= 0 selects epsilon/iters
    float decay = 1.0f;
    std::string transform = "bsr";  // '+'-joined: none|bsr|dim|tim|sim|admix
    int blocks = 2;
    float angle = 24.0f;
    int copies = 20;
    float min_block_fraction = 0.1f;
    std::string interpolation = "nearest";
    bool shuffle = true;
    bool rotate = true;
    float dim_probability = 0.5f;
    float dim_low = 0.9f;
    int tim_size = 7;
    float tim_sigma = -1.0f;
    int sim_scales_count = 5;
    int admix_mix = 3;
    float admix_strength = 0.2f;
    int admix_scales = 5;
    std::uint64_t attack_seed = 7;
    bool clip = true;

    // [eval]
    int eval_count = 500;
    std::vector<std::uint64_t> eval_seeds = {1, 2, 3};
    std::string output_dir = "out";
    std::string adversarial_dir;
    std::string heatmap_layer;
    int heatmap_class = -1;  // -1 = use each image's true label
    int heatmap_count = 8;

    // [ablate]
    std::vector<float> n_values;
    std::vector<float> copies_values;
    std::vector<float> tau_values;
    bool ablate_variants = true;

    TransformKind transform_kind() const;
    AttackConfig attack_config() const;
    // Complete effective configuration (defaults included) in a fixed order,
    // used as the '#' preamble of every emitted file.
    std::vector<std::string> echo_lines() const;
};

ExperimentConfig load_config(const std::string& path);
// Parses config text; `base_dir` anchors relative paths ("" = leave as-is).
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir);

}  // namespace bsr
