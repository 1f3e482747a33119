#include <benchmark/benchmark.h>

#include "bsr/attack.hpp"
#include "bsr/dataset.hpp"
#include "bsr/model.hpp"
#include "bsr/transform.hpp"

namespace {

struct Fixture {
    bsr::LabeledDataset data;
    bsr::Classifier model;
    Fixture() {
        bsr::SyntheticConfig dc;
        dc.count = 16;
        dc.seed = 9;
        data = bsr::synthesize_shapes(dc);
        model = bsr::Classifier::build("conv3", {3, 32, 32}, dc.num_classes, 17);
        model.train(data, 2, 0.05f, 16, 5);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

void BM_block_transform(benchmark::State& state) {
    Fixture& f = fixture();
    bsr::BsrConfig bc;
    bsr::Rng rng(3);
    const bsr::Tensor& img = f.data.images[0];
    for (auto _ : state) {
        bsr::TransformRecord rec = bsr::sample_bsr(bc, img.shape(), rng);
        bsr::Tensor out = bsr::apply_bsr(img, rec);
        benchmark::DoNotOptimize(out.data().data());
    }
}
BENCHMARK(BM_block_transform);

void BM_gradient_average(benchmark::State& state) {
    Fixture& f = fixture();
    const int copies = static_cast<int>(state.range(0));
    bsr::TransformKind kind;
    bsr::BsrConfig bc;
    bc.copies = copies;
    kind.nodes.push_back(bc);
    std::vector<const bsr::Classifier*> models{&f.model};
    bsr::Rng rng(4);
    for (auto _ : state) {
        bsr::GradientEstimate est =
            bsr::average_gradient(models, f.data.images[0], f.data.labels[0], kind,
                                  copies, rng, nullptr);
        benchmark::DoNotOptimize(est.g.data().data());
    }
}
BENCHMARK(BM_gradient_average)->Arg(1)->Arg(5)->Arg(20);

void BM_attack_iterations(benchmark::State& state) {
    Fixture& f = fixture();
    bsr::AttackConfig cfg;
    cfg.num_iters = static_cast<int>(state.range(0));
    bsr::BsrConfig bc;
    bc.copies = 5;
    cfg.transform.nodes.push_back(bc);
    for (auto _ : state) {
        bsr::AttackResult r = bsr::run_attack(f.model, f.data.images[1], f.data.labels[1], cfg);
        benchmark::DoNotOptimize(r.adversarial.data().data());
    }
}
BENCHMARK(BM_attack_iterations)->Arg(1)->Arg(10);

} // namespace
