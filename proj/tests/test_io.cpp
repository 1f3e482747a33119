#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"

#include "bsr/checkpoint.hpp"
#include "bsr/dataset.hpp"
#include "bsr/experiment.hpp"
#include "bsr/image_io.hpp"
#include "bsr/model.hpp"
#include "bsr/rng.hpp"
#include "bsr/tensor.hpp"

using namespace bsr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("bsr_test_" + std::to_string(Rng(reinterpret_cast<std::uintptr_t>(this)).next_u64() % 1000000));
        fs::create_directories(path);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i) {
        if (ad[i] != bd[i]) return false;
    }
    return true;
}

Classifier tiny_model(std::uint64_t seed) {
    return Classifier::build("conv3", {3, 32, 32}, 4, seed);
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
    TempDir dir;
    Classifier m = tiny_model(42);
    const std::string path = dir.file("m.ckpt");
    save_checkpoint(m, path);
    Classifier r = load_checkpoint(path);
    CHECK(r.architecture_id() == m.architecture_id());
    CHECK(r.input_shape() == m.input_shape());
    CHECK(r.num_classes() == m.num_classes());
    REQUIRE(r.parameters().size() == m.parameters().size());
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
        CHECK(r.parameters()[i].first == m.parameters()[i].first);
        CHECK(bitwise_equal(r.parameters()[i].second, m.parameters()[i].second));
    }

    // Writing the loaded model again produces the identical byte stream.
    const std::string path2 = dir.file("m2.ckpt");
    save_checkpoint(r, path2);
    CHECK(read_file(path) == read_file(path2));
}

TEST_CASE("checkpoint corruption is reported by kind") {
    TempDir dir;
    Classifier m = tiny_model(43);
    const std::string path = dir.file("m.ckpt");
    save_checkpoint(m, path);
    const std::string good = read_file(path);

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    write_file_atomic(dir.file("bad_magic.ckpt"), bad_magic);
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("bad_magic.ckpt")),
                         doctest::Contains("magic"), CheckpointError);
    try {
        load_checkpoint(dir.file("bad_magic.ckpt"));
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointError::Kind::BadMagic);
    }

    std::string bad_version = good;
    bad_version[8] = 99;  // little-endian u32 version follows the 8-byte magic
    write_file_atomic(dir.file("bad_version.ckpt"), bad_version);
    try {
        load_checkpoint(dir.file("bad_version.ckpt"));
        FAIL("expected version mismatch");
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointError::Kind::VersionMismatch);
    }

    write_file_atomic(dir.file("trunc.ckpt"), good.substr(0, good.size() / 2));
    try {
        load_checkpoint(dir.file("trunc.ckpt"));
        FAIL("expected truncation error");
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointError::Kind::Truncated);
    }

    CHECK_THROWS_AS(load_checkpoint(dir.file("missing.ckpt")), CheckpointError);
}

TEST_CASE("quantization snaps to the 8-bit grid and is idempotent") {
    CHECK(quantize8(0.0f) == 0.0f);
    CHECK(quantize8(1.0f) == 1.0f);
    CHECK(quantize8(-0.5f) == 0.0f);
    CHECK(quantize8(2.0f) == 1.0f);
    CHECK(quantize8(128.0f / 255.0f) == 128.0f / 255.0f);
    Rng rng(10);
    for (int i = 0; i < 200; ++i) {
        const float v = rng.uniform_float(-0.2f, 1.2f);
        const float q = quantize8(v);
        CHECK(q == quantize8(q));
        CHECK(q >= 0.0f);
        CHECK(q <= 1.0f);
    }
}

TEST_CASE("image round trip through P6 is bit exact for quantized data") {
    TempDir dir;
    Tensor img = Tensor::zeros({3, 9, 13});
    Rng rng(11);
    for (float& v : img.data()) v = rng.uniform_float(0.0f, 1.0f);
    img = quantize8(img);

    const std::string path = dir.file("img.ppm");
    write_ppm(path, img);
    Tensor back = read_ppm(path);
    CHECK(bitwise_equal(back, img));

    // Same bytes when written again (deterministic encoder).
    const std::string path2 = dir.file("img2.ppm");
    write_ppm(path2, back);
    CHECK(read_file(path) == read_file(path2));
}

TEST_CASE("ppm reader rejects non-P6 data") {
    TempDir dir;
    write_file_atomic(dir.file("bad.ppm"), "P3\n2 2\n255\n0 0 0\n");
    CHECK_THROWS(read_ppm(dir.file("bad.ppm")));
    CHECK_THROWS(read_ppm(dir.file("missing.ppm")));
}

TEST_CASE("image directory round trip preserves data and labels") {
    TempDir dir;
    SyntheticConfig cfg;
    cfg.count = 8;
    cfg.seed = 91;
    LabeledDataset data = synthesize_shapes(cfg);

    std::string csv = "filename,class_index\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "img_%03zu.ppm", i);
        write_ppm(dir.file(name), data.images[i]);
        csv += std::string(name) + "," + std::to_string(data.labels[i]) + "\n";
    }
    write_file_atomic(dir.file("labels.csv"), csv);

    LabeledDataset back = read_image_directory(dir.path.string());
    back.validate();
    REQUIRE(back.size() == data.size());
    CHECK(back.num_classes == data.num_classes);
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(back.labels[i] == data.labels[i]);
        CHECK(bitwise_equal(back.images[i], data.images[i]));
    }
}

TEST_CASE("config parser applies defaults, sections, and unit conversion") {
    ExperimentConfig cfg = parse_config(
        "[dataset]\n"
        "count = 100\n"
        "seed = 9\n"
        "\n"
        "[models]\n"
        "model = conv3 surrogate.ckpt 11\n"
        "model = conv4 target.ckpt 22\n"
        "epochs = 3\n"
        "\n"
        "[attack]\n"
        "epsilon = 8\n"
        "transform = dim+bsr\n"
        "blocks = 3\n"
        "\n"
        "[eval]\n"
        "count = 50\n"
        "seeds = 4 5 6\n",
        "/base");
    CHECK(cfg.count == 100);
    CHECK(cfg.dataset_seed == 9);
    REQUIRE(cfg.models.size() == 2);
    CHECK(cfg.models[0].arch == "conv3");
    CHECK(cfg.models[0].checkpoint == "/base/surrogate.ckpt");
    CHECK(cfg.models[1].train_seed == 22);
    CHECK(cfg.train_epochs == 3);
    CHECK(cfg.epsilon_255 == 8.0f);
    CHECK(cfg.blocks == 3);
    CHECK(cfg.eval_count == 50);
    REQUIRE(cfg.eval_seeds.size() == 3);
    CHECK(cfg.eval_seeds[1] == 5);

    AttackConfig ac = cfg.attack_config();
    CHECK(ac.epsilon == doctest::Approx(8.0f / 255.0f));
    REQUIRE(ac.transform.nodes.size() == 2);
    CHECK(std::holds_alternative<DimConfig>(ac.transform.nodes[0]));
    REQUIRE(std::holds_alternative<BsrConfig>(ac.transform.nodes[1]));
    CHECK(std::get<BsrConfig>(ac.transform.nodes[1]).n == 3);
    CHECK(ac.transform.describe().find("dim") != std::string::npos);
}

TEST_CASE("config parser rejects unknown keys, sections, and bad values") {
    CHECK_THROWS_AS(parse_config("[dataset]\nbogus = 1\n", ""), std::runtime_error);
    CHECK_THROWS_AS(parse_config("[nonsense]\n", ""), std::runtime_error);
    CHECK_THROWS_AS(parse_config("[dataset]\ncount = few\n", ""), std::runtime_error);
    CHECK_THROWS_AS(parse_config("count = 5\n", ""), std::runtime_error);  // key before section
    CHECK_THROWS_AS(parse_config("[models]\nmodel = conv3 x.ckpt\n", ""), std::runtime_error);

    // Transform spelling and value ranges surface when the attack config is
    // materialized, with the offending token in the message.
    ExperimentConfig warp = parse_config("[attack]\ntransform = warp\n", "");
    CHECK_THROWS_WITH_AS(warp.attack_config(), doctest::Contains("warp"), std::runtime_error);
    ExperimentConfig neg = parse_config("[attack]\nepsilon = -2\n", "");
    CHECK_THROWS_AS(neg.attack_config(), std::invalid_argument);
    ExperimentConfig none_plus = parse_config("[attack]\ntransform = none+bsr\n", "");
    CHECK_THROWS_AS(none_plus.attack_config(), std::runtime_error);
}

TEST_CASE("effective configuration echo is complete and deterministic") {
    ExperimentConfig a = parse_config("[attack]\ntransform = bsr\n", "");
    ExperimentConfig b = parse_config("[attack]\ntransform = bsr\n", "");
    CHECK(a.echo_lines() == b.echo_lines());
    bool saw_epsilon = false, saw_transform = false;
    for (const std::string& line : a.echo_lines()) {
        if (line.find("epsilon") != std::string::npos) saw_epsilon = true;
        if (line.find("transform") != std::string::npos) saw_transform = true;
    }
    CHECK(saw_epsilon);
    CHECK(saw_transform);
}
