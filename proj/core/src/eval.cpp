#include "bsr/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace bsr {

namespace {

std::string fmt_float(float v) {
    char buf[32];
    snprintf(buf, sizeof(buf), "%.6f", static_cast<double>(v));
    return buf;
}

bool has_admix(const TransformKind& kind) {
    for (const auto& node : kind.nodes) {
        if (std::holds_alternative<AdmixConfig>(node)) return true;
    }
    return false;
}

const BsrConfig* find_bsr(const TransformKind& kind) {
    for (const auto& node : kind.nodes) {
        if (const auto* b = std::get_if<BsrConfig>(&node)) return b;
    }
    return nullptr;
}

BsrConfig* find_bsr(TransformKind& kind) {
    for (auto& node : kind.nodes) {
        if (auto* b = std::get_if<BsrConfig>(&node)) return b;
    }
    return nullptr;
}

void check_sample(const LabeledDataset& data, int sample_size) {
    if (sample_size < 1) throw std::invalid_argument("eval: sample_size must be >= 1");
    if (static_cast<std::size_t>(sample_size) > data.size()) {
        throw std::invalid_argument("eval: sample_size " + std::to_string(sample_size) +
                                    " exceeds dataset size " + std::to_string(data.size()));
    }
}

// Images of every class except `label`; handles only, no pixel copies.
std::vector<std::vector<Tensor>> build_pools(const LabeledDataset& data) {
    std::vector<std::vector<Tensor>> pools(data.num_classes);
    for (int y = 0; y < data.num_classes; ++y) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data.labels[i] != y) pools[y].push_back(data.images[i]);
        }
    }
    return pools;
}

std::vector<std::string> describe_protocol(const AttackConfig& cfg, int sample_size) {
    std::vector<std::string> lines;
    lines.push_back("sample_size=" + std::to_string(sample_size));
    lines.push_back("epsilon=" + fmt_float(cfg.epsilon));
    lines.push_back("num_iters=" + std::to_string(cfg.num_iters));
    lines.push_back("step_size=" + fmt_float(cfg.effective_step()));
    lines.push_back("decay=" + fmt_float(cfg.decay));
    lines.push_back("transform=" + cfg.transform.describe());
    lines.push_back("clip_to_valid_range=" + std::to_string(cfg.clip_to_valid_range ? 1 : 0));
    lines.push_back("seed=" + std::to_string(cfg.seed));
    return lines;
}

int count_fooled(const Classifier& target, const std::vector<Tensor>& adversarial,
                 const std::vector<int>& labels) {
    int fooled = 0;
    for (std::size_t i = 0; i < adversarial.size(); ++i) {
        if (target.predict(adversarial[i]).class_index != labels[i]) ++fooled;
    }
    return fooled;
}

float black_box_rate(const std::vector<NamedModel>& models, const std::vector<Tensor>& advs,
                     const std::vector<int>& labels) {
    double total = 0.0;
    for (std::size_t t = 1; t < models.size(); ++t) {
        total += attack_success_rate(*models[t].model, advs, labels);
    }
    return static_cast<float>(total / static_cast<double>(models.size() - 1));
}

}  // namespace

float attack_success_rate(const Classifier& target, const std::vector<Tensor>& adversarial,
                          const std::vector<int>& labels) {
    if (adversarial.empty()) throw std::invalid_argument("attack_success_rate: empty set");
    if (adversarial.size() != labels.size()) {
        throw std::invalid_argument("attack_success_rate: image/label count mismatch");
    }
    return static_cast<float>(count_fooled(target, adversarial, labels)) /
           static_cast<float>(adversarial.size());
}

std::vector<Tensor> craft_set(const std::vector<const Classifier*>& sources,
                              const LabeledDataset& data, const AttackConfig& cfg, int count) {
    check_sample(data, count);
    std::vector<std::vector<Tensor>> pools;
    if (has_admix(cfg.transform)) pools = build_pools(data);

    std::vector<Tensor> advs;
    advs.reserve(count);
    for (int i = 0; i < count; ++i) {
        AttackConfig per_image = cfg;
        per_image.seed = Rng::mix(cfg.seed, static_cast<std::uint64_t>(i));
        const std::vector<Tensor>* pool =
            pools.empty() ? nullptr : &pools[data.labels[i]];
        advs.push_back(
            run_attack(sources, data.images[i], data.labels[i], per_image, pool).adversarial);
    }
    return advs;
}

std::string EvalReport::to_csv() const {
    std::string out;
    for (const auto& line : config_echo) out += "# " + line + "\n";
    for (const auto& [name, acc] : clean_accuracy) {
        out += "# clean_accuracy " + name + "=" + fmt_float(acc) + "\n";
    }
    out += "source,attack,target,white_box,sample_size,successes,rate\n";
    for (const EvalCell& c : cells) {
        out += c.source + "," + c.attack + "," + c.target + "," + (c.white_box ? "1" : "0") + "," +
               std::to_string(c.sample_size) + "," + std::to_string(c.successes) + "," +
               fmt_float(c.rate) + "\n";
    }
    return out;
}

EvalReport transfer_matrix(const std::vector<NamedModel>& models,
                           const std::vector<std::pair<std::string, AttackConfig>>& attacks,
                           const LabeledDataset& data, int sample_size) {
    if (models.empty()) throw std::invalid_argument("transfer_matrix: no models");
    if (attacks.empty()) throw std::invalid_argument("transfer_matrix: no attacks");
    check_sample(data, sample_size);
    for (const NamedModel& m : models) {
        if (m.model == nullptr || !m.model->defined()) {
            throw std::invalid_argument("transfer_matrix: undefined model " + m.name);
        }
        if (m.model->input_shape() != models[0].model->input_shape() ||
            m.model->num_classes() != models[0].model->num_classes()) {
            throw std::invalid_argument("transfer_matrix: model " + m.name +
                                        " disagrees on input shape or classes");
        }
    }

    std::vector<int> labels(data.labels.begin(), data.labels.begin() + sample_size);
    std::vector<Tensor> clean(data.images.begin(), data.images.begin() + sample_size);

    EvalReport report;
    report.sample_size = sample_size;
    for (const auto& [name, cfg] : attacks) {
        report.config_echo.push_back("attack " + name + ": epsilon=" + fmt_float(cfg.epsilon) +
                                     " num_iters=" + std::to_string(cfg.num_iters) +
                                     " step_size=" + fmt_float(cfg.effective_step()) +
                                     " decay=" + fmt_float(cfg.decay) + " transform=" +
                                     cfg.transform.describe() +
                                     " seed=" + std::to_string(cfg.seed));
    }
    report.config_echo.push_back("sample_size=" + std::to_string(sample_size));
    for (const NamedModel& m : models) {
        report.config_echo.push_back("model " + m.name + ": arch=" + m.model->architecture_id());
        report.clean_accuracy.emplace_back(
            m.name, 1.0f - attack_success_rate(*m.model, clean, labels));
    }

    for (const NamedModel& src : models) {
        for (const auto& [name, cfg] : attacks) {
            const std::vector<Tensor> advs = craft_set({src.model}, data, cfg, sample_size);
            for (const NamedModel& tgt : models) {
                EvalCell cell;
                cell.source = src.name;
                cell.attack = name;
                cell.target = tgt.name;
                cell.white_box = (src.model == tgt.model);
                cell.sample_size = sample_size;
                cell.successes = count_fooled(*tgt.model, advs, labels);
                cell.rate = static_cast<float>(cell.successes) / static_cast<float>(sample_size);
                report.cells.push_back(std::move(cell));
            }
        }
    }
    return report;
}

std::string AblationCurve::to_csv() const {
    std::string out;
    for (const auto& line : config_echo) out += "# " + line + "\n";
    out += "parameter,value,seed,rate\n";
    for (std::size_t v = 0; v < values.size(); ++v) {
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            out += parameter + "," + fmt_float(values[v]) + "," + std::to_string(seeds[s]) + "," +
                   fmt_float(per_seed[v][s]) + "\n";
        }
        out += parameter + "," + fmt_float(values[v]) + ",mean," + fmt_float(mean_rate[v]) + "\n";
    }
    return out;
}

AblationCurve ablate(const std::string& parameter, const std::vector<float>& values,
                     const std::vector<std::uint64_t>& seeds, const AttackConfig& base,
                     const std::vector<NamedModel>& models, const LabeledDataset& data,
                     int sample_size) {
    if (values.empty()) throw std::invalid_argument("ablate: empty value list");
    if (seeds.empty()) throw std::invalid_argument("ablate: need at least one seed");
    if (models.size() < 2) throw std::invalid_argument("ablate: need a source and >=1 target");
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (!(values[i] > values[i - 1])) {
            throw std::invalid_argument("ablate: values must be strictly increasing");
        }
    }
    if (parameter != "n" && parameter != "copies" && parameter != "tau") {
        throw std::invalid_argument("ablate: unknown parameter '" + parameter +
                                    "' (known: n, copies, tau)");
    }
    if (find_bsr(base.transform) == nullptr) {
        throw std::invalid_argument("ablate: base config has no block transform to sweep");
    }

    const std::vector<int> labels(data.labels.begin(), data.labels.begin() + sample_size);

    AblationCurve curve;
    curve.parameter = parameter;
    curve.values = values;
    curve.seeds = seeds;
    curve.config_echo = describe_protocol(base, sample_size);
    curve.config_echo.push_back("source=" + models[0].name);
    for (std::size_t t = 1; t < models.size(); ++t) {
        curve.config_echo.push_back("target=" + models[t].name);
    }

    for (float value : values) {
        AttackConfig cfg = base;
        BsrConfig* bsr = find_bsr(cfg.transform);
        if (parameter == "n") {
            bsr->n = static_cast<int>(value);
        } else if (parameter == "copies") {
            bsr->copies = static_cast<int>(value);
        } else {
            bsr->tau = value;
        }
        std::vector<float> rates;
        for (std::uint64_t seed : seeds) {
            cfg.seed = seed;
            const std::vector<Tensor> advs = craft_set({models[0].model}, data, cfg, sample_size);
            rates.push_back(black_box_rate(models, advs, labels));
        }
        double mean = 0.0;
        for (float r : rates) mean += r;
        curve.per_seed.push_back(std::move(rates));
        curve.mean_rate.push_back(static_cast<float>(mean / seeds.size()));
    }
    return curve;
}

std::string VariantTable::to_csv() const {
    std::string out;
    for (const auto& line : config_echo) out += "# " + line + "\n";
    out += "variant,seed,rate\n";
    for (std::size_t v = 0; v < names.size(); ++v) {
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            out += names[v] + "," + std::to_string(seeds[s]) + "," + fmt_float(per_seed[v][s]) +
                   "\n";
        }
        out += names[v] + ",mean," + fmt_float(mean_rate[v]) + "\n";
    }
    return out;
}

VariantTable variant_table(const std::vector<std::uint64_t>& seeds, const AttackConfig& base,
                           const std::vector<NamedModel>& models, const LabeledDataset& data,
                           int sample_size) {
    if (seeds.empty()) throw std::invalid_argument("variant_table: need at least one seed");
    if (models.size() < 2) {
        throw std::invalid_argument("variant_table: need a source and >=1 target");
    }
    const BsrConfig* bsr = find_bsr(base.transform);
    if (bsr == nullptr) {
        throw std::invalid_argument("variant_table: base config has no block transform");
    }
    check_sample(data, sample_size);

    std::vector<std::pair<std::string, AttackConfig>> variants;
    {
        AttackConfig mi = base;
        mi.transform = TransformKind{};
        variants.emplace_back("mi", std::move(mi));
        AttackConfig bs = base;
        find_bsr(bs.transform)->rotate = false;
        variants.emplace_back("bs", std::move(bs));
        AttackConfig br = base;
        find_bsr(br.transform)->shuffle = false;
        variants.emplace_back("br", std::move(br));
        variants.emplace_back("bsr", base);
    }

    const std::vector<int> labels(data.labels.begin(), data.labels.begin() + sample_size);

    VariantTable table;
    table.seeds = seeds;
    table.config_echo = describe_protocol(base, sample_size);
    table.config_echo.push_back("source=" + models[0].name);
    for (std::size_t t = 1; t < models.size(); ++t) {
        table.config_echo.push_back("target=" + models[t].name);
    }

    for (auto& [name, cfg] : variants) {
        std::vector<float> rates;
        for (std::uint64_t seed : seeds) {
            cfg.seed = seed;
            const std::vector<Tensor> advs = craft_set({models[0].model}, data, cfg, sample_size);
            rates.push_back(black_box_rate(models, advs, labels));
        }
        double mean = 0.0;
        for (float r : rates) mean += r;
        table.names.push_back(name);
        table.per_seed.push_back(std::move(rates));
        table.mean_rate.push_back(static_cast<float>(mean / seeds.size()));
    }
    return table;
}

float transformed_accuracy(const Classifier& model, const LabeledDataset& data,
                           const TransformKind& kind, std::uint64_t seed, int sample_size) {
    check_sample(data, sample_size);
    kind.validate();
    std::vector<std::vector<Tensor>> pools;
    if (has_admix(kind)) pools = build_pools(data);

    Rng base(seed);
    int correct = 0;
    int total = 0;
    for (int i = 0; i < sample_size; ++i) {
        Rng rng = base.derive(static_cast<std::uint64_t>(i));
        const std::vector<Tensor>* pool = pools.empty() ? nullptr : &pools[data.labels[i]];
        for (const Tensor& t : transform_bundle(data.images[i], kind, rng, pool)) {
            if (model.predict(t).class_index == data.labels[i]) ++correct;
            ++total;
        }
    }
    return static_cast<float>(correct) / static_cast<float>(total);
}

}  // namespace bsr
