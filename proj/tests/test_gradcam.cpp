#include <cmath>
#include <vector>

#include "doctest.h"

#include "bsr/dataset.hpp"
#include "bsr/grad_cam.hpp"
#include "bsr/model.hpp"
#include "bsr/rng.hpp"
#include "bsr/tensor.hpp"

using namespace bsr;

namespace {

// Pearson correlation computed directly in double, the reference for
// heatmap_consistency.
double pearson(const std::vector<float>& a, const std::vector<float>& b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

Heatmap make_map(int h, int w, std::uint64_t seed) {
    Heatmap m;
    m.height = h;
    m.width = w;
    m.values.resize(static_cast<std::size_t>(h) * w);
    Rng rng(seed);
    for (float& v : m.values) v = rng.uniform_float(0.0f, 1.0f);
    return m;
}

}  // namespace

TEST_CASE("attention maps are bounded, sized to the layer, and deterministic") {
    SyntheticConfig dc;
    dc.count = 4;
    dc.seed = 8;
    LabeledDataset data = synthesize_shapes(dc);
    Classifier model = Classifier::build("conv3", {3, 32, 32}, dc.num_classes, 3);
    model.train(data, 2, 0.01f, 4, 1);

    Heatmap deep = grad_cam(model, data.images[0], data.labels[0]);
    CHECK(deep.height == 8);  // two pooling stages below the deepest block
    CHECK(deep.width == 8);
    CHECK(deep.layer == "conv3.relu");
    CHECK(deep.class_index == data.labels[0]);
    float mx = 0.0f;
    for (float v : deep.values) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        mx = std::max(mx, v);
    }
    // Max normalization: a nonzero map peaks at exactly 1.
    if (mx > 0.0f) CHECK(mx == 1.0f);

    Heatmap shallow = grad_cam(model, data.images[0], data.labels[0], "conv1.relu");
    CHECK(shallow.height == 32);
    CHECK(shallow.width == 32);

    Heatmap again = grad_cam(model, data.images[0], data.labels[0]);
    CHECK(again.values == deep.values);

    CHECK_THROWS_AS(grad_cam(model, data.images[0], data.labels[0], "pool9"),
                    std::invalid_argument);
    CHECK_THROWS_AS(grad_cam(model, data.images[0], 99), std::invalid_argument);
}

TEST_CASE("zeroed deepest block yields an all-zero attention map") {
    SyntheticConfig dc;
    dc.count = 2;
    dc.seed = 9;
    LabeledDataset data = synthesize_shapes(dc);
    Classifier model = Classifier::build("conv3", {3, 32, 32}, dc.num_classes, 4);
    for (float& v : model.param("conv3.w").data()) v = 0.0f;
    for (float& v : model.param("conv3.b").data()) v = 0.0f;

    Heatmap m = grad_cam(model, data.images[0], 0);
    for (float v : m.values) CHECK(v == 0.0f);
}

TEST_CASE("consistency matches a direct correlation computation") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
        Heatmap a = make_map(8, 8, seed);
        Heatmap b = make_map(8, 8, seed + 100);
        const double want = pearson(a.values, b.values);
        CHECK(heatmap_consistency(a, b) == doctest::Approx(want).epsilon(1e-6));
        CHECK(heatmap_consistency(b, a) == doctest::Approx(want).epsilon(1e-6));
    }
}

TEST_CASE("consistency is 1 on identical maps and -1 on inverted maps") {
    Heatmap a = make_map(6, 9, 42);
    CHECK(heatmap_consistency(a, a) == doctest::Approx(1.0).epsilon(1e-6));
    Heatmap inv = a;
    for (float& v : inv.values) v = 1.0f - v;
    CHECK(heatmap_consistency(a, inv) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("consistency of a constant map is zero") {
    Heatmap a = make_map(5, 5, 7);
    Heatmap flat;
    flat.height = 5;
    flat.width = 5;
    flat.values.assign(25, 0.7f);
    CHECK(heatmap_consistency(a, flat) == 0.0f);
    CHECK(heatmap_consistency(flat, a) == 0.0f);
}

TEST_CASE("consistency resamples the smaller map to the larger grid") {
    Heatmap small = make_map(4, 4, 11);
    // Nearest upsampling by 2 in each axis; correlating the upsampled map with
    // itself through the library must give 1.
    Heatmap big;
    big.height = 8;
    big.width = 8;
    big.values.resize(64);
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) {
            big.values[r * 8 + c] = small.at(r / 2, c / 2);
        }
    }
    CHECK(heatmap_consistency(small, big) == doctest::Approx(1.0).epsilon(1e-6));

    Heatmap other = make_map(8, 8, 12);
    const double want = pearson(big.values, other.values);
    CHECK(heatmap_consistency(small, other) == doctest::Approx(want).epsilon(1e-6));
}
