// Command line front end. All real work lives in bsr/commands.hpp so the
// same entry points can be driven from tests without spawning processes.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "bsr/commands.hpp"
#include "bsr/experiment.hpp"

namespace {

// Fills in a usable zero-config setup: two surrogate/target checkpoints under
// the output directory. Only applied when the config declares no models.
void default_models(bsr::ExperimentConfig& cfg) {
    if (!cfg.models.empty()) return;
    cfg.models.push_back({"conv3", cfg.output_dir + "/conv3.ckpt", 11});
    cfg.models.push_back({"conv4", cfg.output_dir + "/conv4.ckpt", 22});
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"block shuffle/rotation adversarial attack toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "experiment config file (INI)");

    // Common overrides; applied on top of the config only when passed.
    float opt_epsilon = 0.0f;
    int opt_iters = 0;
    float opt_step = 0.0f;
    float opt_decay = 0.0f;
    int opt_blocks = 0;
    float opt_angle = 0.0f;
    int opt_copies = 0;
    std::string opt_transform;
    std::uint64_t opt_seed = 0;
    std::string opt_out;
    app.add_option("--epsilon", opt_epsilon, "perturbation budget on the 0..255 scale");
    app.add_option("--iters", opt_iters, "attack iterations");
    app.add_option("--step", opt_step, "step size on the 0..255 scale (<=0: epsilon/iters)");
    app.add_option("--decay", opt_decay, "momentum decay factor");
    app.add_option("--blocks", opt_blocks, "blocks per image side");
    app.add_option("--angle", opt_angle, "max block rotation angle in degrees");
    app.add_option("--copies", opt_copies, "transformed copies per gradient estimate");
    app.add_option("--transform", opt_transform, "input transform, e.g. none, bsr, dim+tim");
    app.add_option("--seed", opt_seed, "attack seed");
    app.add_option("--out", opt_out, "output directory");

    app.add_subcommand("train", "train surrogate/target models and write checkpoints");
    app.add_subcommand("attack", "craft adversarial examples and save them with a manifest");
    app.add_subcommand("eval", "measure clean accuracy and attack success rates");
    app.add_subcommand("ablate", "sweep attack parameters and variants");
    app.add_subcommand("heatmap", "write class activation heatmaps for clean vs adversarial inputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        bsr::ExperimentConfig cfg;
        if (!config_path.empty()) cfg = bsr::load_config(config_path);

        if (app.count("--out") > 0) cfg.output_dir = opt_out;
        if (app.count("--epsilon") > 0) cfg.epsilon_255 = opt_epsilon;
        if (app.count("--iters") > 0) cfg.iters = opt_iters;
        if (app.count("--step") > 0) cfg.step_255 = opt_step;
        if (app.count("--decay") > 0) cfg.decay = opt_decay;
        if (app.count("--blocks") > 0) cfg.blocks = opt_blocks;
        if (app.count("--angle") > 0) cfg.angle = opt_angle;
        if (app.count("--copies") > 0) cfg.copies = opt_copies;
        if (app.count("--transform") > 0) cfg.transform = opt_transform;
        if (app.count("--seed") > 0) cfg.attack_seed = opt_seed;
        default_models(cfg);

        const std::string sub = app.get_subcommands().at(0)->get_name();
        if (sub == "train") return bsr::cmd_train(cfg);
        if (sub == "attack") return bsr::cmd_attack(cfg);
        if (sub == "eval") return bsr::cmd_eval(cfg);
        if (sub == "ablate") return bsr::cmd_ablate(cfg);
        if (sub == "heatmap") return bsr::cmd_heatmap(cfg);
        std::fprintf(stderr, "error: unknown subcommand %s\n", sub.c_str());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
