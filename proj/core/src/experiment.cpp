#include "bsr/experiment.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "bsr/image_io.hpp"

namespace bsr {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void fail(int line, const std::string& msg) {
    throw std::runtime_error("config line " + std::to_string(line) + ": " + msg);
}

float parse_float(const std::string& v, int line) {
    try {
        std::size_t used = 0;
        const float f = std::stof(v, &used);
        if (used != v.size()) fail(line, "trailing characters in number '" + v + "'");
        return f;
    } catch (const std::logic_error&) {
        fail(line, "expected a number, got '" + v + "'");
    }
}

int parse_int(const std::string& v, int line) {
    try {
        std::size_t used = 0;
        const int i = std::stoi(v, &used);
        if (used != v.size()) fail(line, "trailing characters in integer '" + v + "'");
        return i;
    } catch (const std::logic_error&) {
        fail(line, "expected an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& v, int line) {
    try {
        std::size_t used = 0;
        const unsigned long long u = std::stoull(v, &used);
        if (used != v.size()) fail(line, "trailing characters in integer '" + v + "'");
        return u;
    } catch (const std::logic_error&) {
        fail(line, "expected a non-negative integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& v, int line) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(line, "expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_ws(const std::string& v) {
    std::vector<std::string> out;
    std::istringstream ss(v);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

std::vector<float> parse_float_list(const std::string& v, int line) {
    std::vector<float> out;
    for (const auto& tok : split_ws(v)) out.push_back(parse_float(tok, line));
    return out;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& v, int line) {
    std::vector<std::uint64_t> out;
    for (const auto& tok : split_ws(v)) out.push_back(parse_u64(tok, line));
    return out;
}

std::string resolve(const std::string& path, const std::string& base_dir) {
    if (path.empty() || base_dir.empty() || path.front() == '/') return path;
    return base_dir + "/" + path;
}

std::string fmt_g(double v) {
    char buf[48];
    snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

TransformKind ExperimentConfig::transform_kind() const {
    TransformKind kind;
    std::string tok;
    std::istringstream ss(transform);
    Interp interp;
    if (interpolation == "nearest") {
        interp = Interp::Nearest;
    } else if (interpolation == "bilinear") {
        interp = Interp::Bilinear;
    } else {
        throw std::runtime_error("unknown interpolation '" + interpolation + "'");
    }
    while (std::getline(ss, tok, '+')) {
        tok = trim(tok);
        if (tok == "none") {
            if (transform != "none") {
                throw std::runtime_error("'none' cannot combine with other transforms");
            }
            return kind;
        }
        if (tok == "bsr") {
            kind.nodes.push_back(
                BsrConfig{blocks, angle, copies, min_block_fraction, interp, shuffle, rotate});
        } else if (tok == "dim") {
            kind.nodes.push_back(DimConfig{dim_probability, dim_low});
        } else if (tok == "tim") {
            kind.nodes.push_back(TimConfig{tim_size, tim_sigma});
        } else if (tok == "sim") {
            kind.nodes.push_back(SimConfig{sim_scales_count});
        } else if (tok == "admix") {
            kind.nodes.push_back(AdmixConfig{admix_mix, admix_strength, admix_scales});
        } else {
            throw std::runtime_error("unknown transform '" + tok + "'");
        }
    }
    return kind;
}

AttackConfig ExperimentConfig::attack_config() const {
    AttackConfig cfg;
    cfg.epsilon = epsilon_255 / 255.0f;
    cfg.num_iters = iters;
    cfg.step_size = step_255 > 0.0f ? step_255 / 255.0f : 0.0f;
    cfg.decay = decay;
    cfg.transform = transform_kind();
    cfg.clip_to_valid_range = clip;
    cfg.seed = attack_seed;
    cfg.validate();
    return cfg;
}

std::vector<std::string> ExperimentConfig::echo_lines() const {
    std::vector<std::string> out;
    out.push_back("dataset.source=" + dataset_source);
    if (!dataset_directory.empty()) out.push_back("dataset.directory=" + dataset_directory);
    out.push_back("dataset.image_size=" + std::to_string(image_size));
    out.push_back("dataset.classes=" + std::to_string(classes));
    out.push_back("dataset.count=" + std::to_string(count));
    out.push_back("dataset.seed=" + std::to_string(dataset_seed));
    out.push_back("dataset.noise=" + fmt_g(noise));
    for (std::size_t i = 0; i < models.size(); ++i) {
        out.push_back("models.model" + std::to_string(i) + "=" + models[i].arch + " " +
                      models[i].checkpoint + " " + std::to_string(models[i].train_seed));
    }
    out.push_back("models.epochs=" + std::to_string(train_epochs));
    out.push_back("models.lr=" + fmt_g(train_lr));
    out.push_back("models.batch=" + std::to_string(train_batch));
    out.push_back("attack.epsilon=" + fmt_g(epsilon_255));
    out.push_back("attack.iters=" + std::to_string(iters));
    out.push_back("attack.step=" + fmt_g(step_255));
    out.push_back("attack.decay=" + fmt_g(decay));
    out.push_back("attack.transform=" + transform);
    out.push_back("attack.blocks=" + std::to_string(blocks));
    out.push_back("attack.angle=" + fmt_g(angle));
    out.push_back("attack.copies=" + std::to_string(copies));
    out.push_back("attack.min_block_fraction=" + fmt_g(min_block_fraction));
    out.push_back("attack.interpolation=" + interpolation);
    out.push_back("attack.shuffle=" + std::string(shuffle ? "true" : "false"));
    out.push_back("attack.rotate=" + std::string(rotate ? "true" : "false"));
    out.push_back("attack.dim_probability=" + fmt_g(dim_probability));
    out.push_back("attack.dim_low=" + fmt_g(dim_low));
    out.push_back("attack.tim_size=" + std::to_string(tim_size));
    out.push_back("attack.tim_sigma=" + fmt_g(tim_sigma));
    out.push_back("attack.sim_scales=" + std::to_string(sim_scales_count));
    out.push_back("attack.admix_mix=" + std::to_string(admix_mix));
    out.push_back("attack.admix_strength=" + fmt_g(admix_strength));
    out.push_back("attack.admix_scales=" + std::to_string(admix_scales));
    out.push_back("attack.seed=" + std::to_string(attack_seed));
    out.push_back("attack.clip=" + std::string(clip ? "true" : "false"));
    out.push_back("eval.count=" + std::to_string(eval_count));
    {
        std::string s = "eval.seeds=";
        for (std::size_t i = 0; i < eval_seeds.size(); ++i) {
            if (i) s += " ";
            s += std::to_string(eval_seeds[i]);
        }
        out.push_back(s);
    }
    out.push_back("eval.output=" + output_dir);
    if (!adversarial_dir.empty()) out.push_back("eval.adversarial_dir=" + adversarial_dir);
    if (!heatmap_layer.empty()) out.push_back("eval.heatmap_layer=" + heatmap_layer);
    out.push_back("eval.heatmap_class=" + std::to_string(heatmap_class));
    out.push_back("eval.heatmap_count=" + std::to_string(heatmap_count));
    auto list_line = [&](const char* key, const std::vector<float>& vals) {
        if (vals.empty()) return;
        std::string s = std::string("ablate.") + key + "=";
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (i) s += " ";
            s += fmt_g(vals[i]);
        }
        out.push_back(s);
    };
    list_line("n_values", n_values);
    list_line("copies_values", copies_values);
    list_line("tau_values", tau_values);
    out.push_back("ablate.variants=" + std::string(ablate_variants ? "true" : "false"));
    return out;
}

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
    ExperimentConfig cfg;
    cfg.models.clear();
    std::istringstream lines(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(lines, raw)) {
        ++line_no;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "malformed section header '" + line + "'");
            section = line.substr(1, line.size() - 2);
            if (section != "dataset" && section != "models" && section != "attack" &&
                section != "eval" && section != "ablate") {
                fail(line_no, "unknown section [" + section + "]");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(line_no, "expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (section.empty()) fail(line_no, "key '" + key + "' outside any section");

        if (section == "dataset") {
            if (key == "source") {
                if (val != "synthetic" && val != "directory") {
                    fail(line_no, "dataset source must be synthetic or directory");
                }
                cfg.dataset_source = val;
            } else if (key == "directory") {
                cfg.dataset_directory = resolve(val, base_dir);
            } else if (key == "image_size") {
                cfg.image_size = parse_int(val, line_no);
            } else if (key == "classes") {
                cfg.classes = parse_int(val, line_no);
            } else if (key == "count") {
                cfg.count = parse_int(val, line_no);
            } else if (key == "seed") {
                cfg.dataset_seed = parse_u64(val, line_no);
            } else if (key == "noise") {
                cfg.noise = parse_float(val, line_no);
            } else {
                fail(line_no, "unknown key '" + key + "' in [dataset]");
            }
        } else if (section == "models") {
            if (key == "model") {
                const auto parts = split_ws(val);
                if (parts.size() != 3) {
                    fail(line_no, "model entries are '<arch> <checkpoint> <train_seed>'");
                }
                cfg.models.push_back(
                    {parts[0], resolve(parts[1], base_dir), parse_u64(parts[2], line_no)});
            } else if (key == "epochs") {
                cfg.train_epochs = parse_int(val, line_no);
            } else if (key == "lr") {
                cfg.train_lr = parse_float(val, line_no);
            } else if (key == "batch") {
                cfg.train_batch = parse_int(val, line_no);
            } else {
                fail(line_no, "unknown key '" + key + "' in [models]");
            }
        } else if (section == "attack") {
            if (key == "epsilon") {
                cfg.epsilon_255 = parse_float(val, line_no);
            } else if (key == "iters") {
                cfg.iters = parse_int(val, line_no);
            } else if (key == "step") {
                cfg.step_255 = parse_float(val, line_no);
            } else if (key == "decay") {
                cfg.decay = parse_float(val, line_no);
            } else if (key == "transform") {
                cfg.transform = val;
            } else if (key == "blocks") {
                cfg.blocks = parse_int(val, line_no);
            } else if (key == "angle") {
                cfg.angle = parse_float(val, line_no);
            } else if (key == "copies") {
                cfg.copies = parse_int(val, line_no);
            } else if (key == "min_block_fraction") {
                cfg.min_block_fraction = parse_float(val, line_no);
            } else if (key == "interpolation") {
                cfg.interpolation = val;
            } else if (key == "shuffle") {
                cfg.shuffle = parse_bool(val, line_no);
            } else if (key == "rotate") {
                cfg.rotate = parse_bool(val, line_no);
            } else if (key == "dim_probability") {
                cfg.dim_probability = parse_float(val, line_no);
            } else if (key == "dim_low") {
                cfg.dim_low = parse_float(val, line_no);
            } else if (key == "tim_size") {
                cfg.tim_size = parse_int(val, line_no);
            } else if (key == "tim_sigma") {
                cfg.tim_sigma = parse_float(val, line_no);
            } else if (key == "sim_scales") {
                cfg.sim_scales_count = parse_int(val, line_no);
            } else if (key == "admix_mix") {
                cfg.admix_mix = parse_int(val, line_no);
            } else if (key == "admix_strength") {
                cfg.admix_strength = parse_float(val, line_no);
            } else if (key == "admix_scales") {
                cfg.admix_scales = parse_int(val, line_no);
            } else if (key == "seed") {
                cfg.attack_seed = parse_u64(val, line_no);
            } else if (key == "clip") {
                cfg.clip = parse_bool(val, line_no);
            } else {
                fail(line_no, "unknown key '" + key + "' in [attack]");
            }
        } else if (section == "eval") {
            if (key == "count") {
                cfg.eval_count = parse_int(val, line_no);
            } else if (key == "seeds") {
                cfg.eval_seeds = parse_u64_list(val, line_no);
                if (cfg.eval_seeds.empty()) fail(line_no, "eval seeds list is empty");
            } else if (key == "output") {
                cfg.output_dir = resolve(val, base_dir);
            } else if (key == "adversarial_dir") {
                cfg.adversarial_dir = resolve(val, base_dir);
            } else if (key == "heatmap_layer") {
                cfg.heatmap_layer = val;
            } else if (key == "heatmap_class") {
                cfg.heatmap_class = parse_int(val, line_no);
            } else if (key == "heatmap_count") {
                cfg.heatmap_count = parse_int(val, line_no);
            } else {
                fail(line_no, "unknown key '" + key + "' in [eval]");
            }
        } else {  // ablate
            if (key == "n_values") {
                cfg.n_values = parse_float_list(val, line_no);
            } else if (key == "copies_values") {
                cfg.copies_values = parse_float_list(val, line_no);
            } else if (key == "tau_values") {
                cfg.tau_values = parse_float_list(val, line_no);
            } else if (key == "variants") {
                cfg.ablate_variants = parse_bool(val, line_no);
            } else {
                fail(line_no, "unknown key '" + key + "' in [ablate]");
            }
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::runtime_error&) {
        throw std::runtime_error("cannot read config file " + path);
    }
    const std::size_t slash = path.find_last_of('/');
    const std::string dir = slash == std::string::npos ? "." : path.substr(0, slash);
    return parse_config(text, dir);
}

}  // namespace bsr
