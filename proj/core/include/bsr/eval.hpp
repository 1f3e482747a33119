#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bsr/attack.hpp"
#include "bsr/dataset.hpp"
#include "bsr/model.hpp"

namespace bsr {

struct NamedModel {
    std::string name;
    const Classifier* model = nullptr;
};

struct EvalCell {
    std::string source;
    std::string attack;
    std::string target;
    bool white_box = false;
    int sample_size = 0;
    int successes = 0;
    float rate = 0.0f;
};

// Success-rate table plus the context needed to reproduce it. CSV output is
// deterministic: '#'-prefixed echo lines, a header row, one row per cell.
struct EvalReport {
    std::vector<std::string> config_echo;
    std::vector<std::pair<std::string, float>> clean_accuracy;
    std::vector<EvalCell> cells;
    int sample_size = 0;

    std::string to_csv() const;
};

struct AblationCurve {
    std::string parameter;
    std::vector<float> values;
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<float>> per_seed;  // [value][seed], black-box mean rate
    std::vector<float> mean_rate;              // per value
    std::vector<std::string> config_echo;

    std::string to_csv() const;
};

// Rows mi / bs / br / bsr: the plain momentum attack, shuffle-only,
// rotation-only, and the full transform, each at the base settings.
struct VariantTable {
    std::vector<std::string> names;
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<float>> per_seed;  // [variant][seed]
    std::vector<float> mean_rate;
    std::vector<std::string> config_echo;

    std::string to_csv() const;
};

// Fraction of adversarial images the target misclassifies.
float attack_success_rate(const Classifier& target, const std::vector<Tensor>& adversarial,
                          const std::vector<int>& labels);

// Crafts adversarial images for data[0..count) on the source ensemble with
// per-image seeds mix(cfg.seed, index). Builds per-label pools when the
// transform mixes in other-class images.
std::vector<Tensor> craft_set(const std::vector<const Classifier*>& sources,
                              const LabeledDataset& data, const AttackConfig& cfg, int count);

// For every (source, attack): craft once, evaluate on every model.
EvalReport transfer_matrix(const std::vector<NamedModel>& models,
                           const std::vector<std::pair<std::string, AttackConfig>>& attacks,
                           const LabeledDataset& data, int sample_size);

// Sweeps one block-transform parameter ("n" | "copies" | "tau"); models[0]
// is the source, the rest are black-box targets.
AblationCurve ablate(const std::string& parameter, const std::vector<float>& values,
                     const std::vector<std::uint64_t>& seeds, const AttackConfig& base,
                     const std::vector<NamedModel>& models, const LabeledDataset& data,
                     int sample_size);

VariantTable variant_table(const std::vector<std::uint64_t>& seeds, const AttackConfig& base,
                           const std::vector<NamedModel>& models, const LabeledDataset& data,
                           int sample_size);

// Diagnostic: accuracy of the model on transformed copies of clean images
// (one transform draw per image, all bundle elements scored).
float transformed_accuracy(const Classifier& model, const LabeledDataset& data,
                           const TransformKind& kind, std::uint64_t seed, int sample_size);

}  // namespace bsr
