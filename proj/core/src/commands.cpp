#include "bsr/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "bsr/checkpoint.hpp"
#include "bsr/eval.hpp"
#include "bsr/grad_cam.hpp"
#include "bsr/image_io.hpp"

namespace bsr {

namespace {

namespace fs = std::filesystem;

LabeledDataset load_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset_source == "synthetic") {
        if (cfg.count < 1) {
            throw std::runtime_error("dataset count must be >= 1 for a synthetic dataset");
        }
        SyntheticConfig sc;
        sc.image_size = cfg.image_size;
        sc.num_classes = cfg.classes;
        sc.count = cfg.count;
        sc.seed = cfg.dataset_seed;
        sc.noise = cfg.noise;
        return synthesize_shapes(sc);
    }
    if (cfg.dataset_directory.empty()) {
        throw std::runtime_error("dataset.directory is required when source = directory");
    }
    return read_image_directory(cfg.dataset_directory);
}

std::string model_name(std::size_t index, const ModelSpec& spec) {
    return "m" + std::to_string(index) + "-" + spec.arch;
}

std::vector<Classifier> load_models(const ExperimentConfig& cfg) {
    if (cfg.models.empty()) throw std::runtime_error("no models declared in config");
    std::vector<Classifier> out;
    out.reserve(cfg.models.size());
    for (const ModelSpec& spec : cfg.models) {
        try {
            out.push_back(load_checkpoint(spec.checkpoint));
        } catch (const CheckpointError& e) {
            if (e.kind() == CheckpointError::Kind::Io) {
                throw std::runtime_error("cannot load checkpoint " + spec.checkpoint +
                                         " (run the train command first)");
            }
            throw;
        }
        if (out.back().architecture_id() != spec.arch) {
            throw std::runtime_error("checkpoint " + spec.checkpoint + " holds a " +
                                     out.back().architecture_id() + " model, config says " +
                                     spec.arch);
        }
    }
    return out;
}

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

std::string preamble(const ExperimentConfig& cfg) {
    std::string out;
    for (const std::string& line : cfg.echo_lines()) out += "# " + line + "\n";
    return out;
}

std::string fmt_float(double v, int digits = 6) {
    char buf[48];
    snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

float linf_255(const Tensor& a, const Tensor& b) {
    auto pa = a.data();
    auto pb = b.data();
    float peak = 0.0f;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        peak = std::max(peak, std::fabs(pa[i] - pb[i]));
    }
    return peak * 255.0f;
}

// Rows of an attack manifest that matter for re-evaluation.
std::vector<std::pair<std::string, int>> parse_manifest(const std::string& dir) {
    const std::string text = read_file(dir + "/manifest.csv");
    std::vector<std::pair<std::string, int>> rows;
    std::istringstream lines(text);
    std::string line;
    bool seen_header = false;
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!seen_header) {
            seen_header = true;
            if (line.rfind("filename,label", 0) != 0) {
                throw std::runtime_error(dir + "/manifest.csv: unexpected header '" + line + "'");
            }
            continue;
        }
        std::istringstream row(line);
        std::string fname, label;
        if (!std::getline(row, fname, ',') || !std::getline(row, label, ',')) {
            throw std::runtime_error(dir + "/manifest.csv: malformed row '" + line + "'");
        }
        rows.emplace_back(fname, std::stoi(label));
    }
    if (rows.empty()) throw std::runtime_error(dir + "/manifest.csv: no data rows");
    return rows;
}

}  // namespace

int cmd_train(const ExperimentConfig& cfg) {
    if (cfg.models.empty()) throw std::runtime_error("no models declared in config");
    const LabeledDataset ds = load_dataset(cfg);
    if (ds.size() == 0) throw std::runtime_error("dataset is empty");
    if (cfg.train_epochs < 1) throw std::runtime_error("models.epochs must be >= 1");
    ensure_dir(cfg.output_dir);

    std::string log = preamble(cfg);
    for (std::size_t i = 0; i < cfg.models.size(); ++i) {
        const ModelSpec& spec = cfg.models[i];
        const std::string name = model_name(i, spec);
        Classifier model = Classifier::build(spec.arch, ds.images[0].shape(), ds.num_classes,
                                             spec.train_seed);
        const TrainStats stats =
            model.train(ds, cfg.train_epochs, cfg.train_lr, cfg.train_batch, spec.train_seed);
        for (std::size_t e = 0; e < stats.loss.size(); ++e) {
            const std::string line = "model " + name + " epoch " + std::to_string(e + 1) +
                                     " loss=" + fmt_float(stats.loss[e]) +
                                     " acc=" + fmt_float(stats.accuracy[e], 4);
            log += line + "\n";
            std::printf("%s\n", line.c_str());
        }
        const fs::path parent = fs::path(spec.checkpoint).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
        save_checkpoint(model, spec.checkpoint);
        log += "checkpoint " + name + " " + spec.checkpoint + "\n";
    }
    write_file_atomic(cfg.output_dir + "/train_log.txt", log);
    return 0;
}

int cmd_attack(const ExperimentConfig& cfg) {
    const LabeledDataset ds = load_dataset(cfg);
    const std::vector<Classifier> models = load_models(cfg);
    const Classifier& source = models[0];
    const AttackConfig acfg = cfg.attack_config();
    ensure_dir(cfg.output_dir);

    const int count = cfg.eval_count;
    const std::vector<Tensor> advs = craft_set({&source}, ds, acfg, count);

    std::string manifest = preamble(cfg);
    manifest += "filename,label,source_prediction,linf_pre_255,linf_post_255\n";
    const float budget_255 = std::ceil(cfg.epsilon_255) + 1e-3f;
    for (int i = 0; i < count; ++i) {
        char fname[32];
        snprintf(fname, sizeof(fname), "adv_%05d.ppm", i);
        write_ppm(cfg.output_dir + "/" + fname, advs[i]);
        const Tensor quant = quantize8(advs[i]);
        const float pre = linf_255(advs[i], ds.images[i]);
        const float post = linf_255(quant, ds.images[i]);
        if (post > budget_255) {
            throw std::logic_error("quantized perturbation " + fmt_float(post, 4) +
                                   "/255 exceeds the budget on " + fname);
        }
        manifest += std::string(fname) + "," + std::to_string(ds.labels[i]) + "," +
                    std::to_string(source.predict(quant).class_index) + "," + fmt_float(pre, 4) +
                    "," + fmt_float(post, 4) + "\n";
    }
    write_file_atomic(cfg.output_dir + "/manifest.csv", manifest);
    return 0;
}

int cmd_eval(const ExperimentConfig& cfg) {
    const LabeledDataset ds = load_dataset(cfg);
    const std::vector<Classifier> models = load_models(cfg);
    std::vector<NamedModel> named;
    for (std::size_t i = 0; i < models.size(); ++i) {
        named.push_back({model_name(i, cfg.models[i]), &models[i]});
    }
    ensure_dir(cfg.output_dir);

    EvalReport report;
    if (!cfg.adversarial_dir.empty()) {
        const auto rows = parse_manifest(cfg.adversarial_dir);
        std::vector<Tensor> advs;
        std::vector<int> labels;
        for (const auto& [fname, label] : rows) {
            advs.push_back(read_ppm(cfg.adversarial_dir + "/" + fname));
            labels.push_back(label);
        }
        report.sample_size = static_cast<int>(advs.size());
        report.config_echo.push_back("adversarial_dir=" + cfg.adversarial_dir);
        for (const NamedModel& m : named) {
            EvalCell cell;
            cell.source = "saved";
            cell.attack = "saved";
            cell.target = m.name;
            cell.sample_size = report.sample_size;
            for (std::size_t i = 0; i < advs.size(); ++i) {
                if (m.model->predict(advs[i]).class_index != labels[i]) ++cell.successes;
            }
            cell.rate = static_cast<float>(cell.successes) / static_cast<float>(advs.size());
            report.cells.push_back(std::move(cell));
        }
    } else {
        const std::vector<std::pair<std::string, AttackConfig>> attacks{
            {cfg.transform, cfg.attack_config()}};
        report = transfer_matrix(named, attacks, ds, cfg.eval_count);
    }
    report.config_echo.insert(report.config_echo.begin(), cfg.echo_lines().begin(),
                              cfg.echo_lines().end());
    write_file_atomic(cfg.output_dir + "/eval_report.csv", report.to_csv());
    return 0;
}

int cmd_ablate(const ExperimentConfig& cfg) {
    const LabeledDataset ds = load_dataset(cfg);
    const std::vector<Classifier> models = load_models(cfg);
    if (models.size() < 2) {
        throw std::runtime_error("ablate needs a source model and at least one target model");
    }
    std::vector<NamedModel> named;
    for (std::size_t i = 0; i < models.size(); ++i) {
        named.push_back({model_name(i, cfg.models[i]), &models[i]});
    }
    const AttackConfig base = cfg.attack_config();
    ensure_dir(cfg.output_dir);

    const float tacc =
        transformed_accuracy(models[0], ds, base.transform, cfg.eval_seeds[0], cfg.eval_count);
    const std::string tacc_line = "transformed_accuracy_source=" + fmt_float(tacc);

    bool emitted = false;
    const std::vector<std::pair<std::string, const std::vector<float>*>> sweeps{
        {"n", &cfg.n_values}, {"copies", &cfg.copies_values}, {"tau", &cfg.tau_values}};
    for (const auto& [param, values] : sweeps) {
        if (values->empty()) continue;
        AblationCurve curve = ablate(param, *values, cfg.eval_seeds, base, named, ds,
                                     cfg.eval_count);
        curve.config_echo.insert(curve.config_echo.begin(), cfg.echo_lines().begin(),
                                 cfg.echo_lines().end());
        curve.config_echo.push_back(tacc_line);
        write_file_atomic(cfg.output_dir + "/ablation_" + param + ".csv", curve.to_csv());
        emitted = true;
    }
    if (cfg.ablate_variants) {
        VariantTable table = variant_table(cfg.eval_seeds, base, named, ds, cfg.eval_count);
        table.config_echo.insert(table.config_echo.begin(), cfg.echo_lines().begin(),
                                 cfg.echo_lines().end());
        table.config_echo.push_back(tacc_line);
        write_file_atomic(cfg.output_dir + "/ablation_variants.csv", table.to_csv());
        emitted = true;
    }
    if (!emitted) {
        throw std::runtime_error(
            "nothing to ablate: all value lists are empty and variants are disabled");
    }
    return 0;
}

int cmd_heatmap(const ExperimentConfig& cfg) {
    const LabeledDataset ds = load_dataset(cfg);
    const std::vector<Classifier> models = load_models(cfg);
    if (cfg.heatmap_count < 1) throw std::runtime_error("eval.heatmap_count must be >= 1");
    const int count = std::min<int>(cfg.heatmap_count, static_cast<int>(ds.size()));
    ensure_dir(cfg.output_dir);

    std::vector<std::vector<Heatmap>> maps(count);
    for (int i = 0; i < count; ++i) {
        const int cls = cfg.heatmap_class >= 0 ? cfg.heatmap_class : ds.labels[i];
        for (std::size_t m = 0; m < models.size(); ++m) {
            const Heatmap hm = grad_cam(models[m], ds.images[i], cls, cfg.heatmap_layer);
            std::string out = preamble(cfg);
            out += "# model=" + model_name(m, cfg.models[m]) + " layer=" + hm.layer +
                   " class=" + std::to_string(cls) + " image=" + std::to_string(i) + "\n";
            for (int r = 0; r < hm.height; ++r) {
                for (int c = 0; c < hm.width; ++c) {
                    out += (c ? "," : "") + fmt_float(hm.at(r, c));
                }
                out += "\n";
            }
            char fname[64];
            snprintf(fname, sizeof(fname), "heatmap_img%03d_m%zu.csv", i, m);
            write_file_atomic(cfg.output_dir + "/" + fname, out);
            maps[i].push_back(hm);
        }
    }
    if (models.size() >= 2) {
        std::string out = preamble(cfg);
        out += "image,model_a,model_b,consistency\n";
        for (int i = 0; i < count; ++i) {
            for (std::size_t a = 0; a < models.size(); ++a) {
                for (std::size_t b = a + 1; b < models.size(); ++b) {
                    out += std::to_string(i) + "," + model_name(a, cfg.models[a]) + "," +
                           model_name(b, cfg.models[b]) + "," +
                           fmt_float(heatmap_consistency(maps[i][a], maps[i][b])) + "\n";
                }
            }
        }
        write_file_atomic(cfg.output_dir + "/heatmap_consistency.csv", out);
    }
    return 0;
}

}  // namespace bsr
