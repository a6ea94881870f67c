#include <benchmark/benchmark.h>

#include <random>

#include "divad/baselines.hpp"
#include "divad/divad_model.hpp"
#include "divad/evaluation.hpp"
#include "divad/scoring.hpp"
#include "divad/synthgen.hpp"

using namespace divad;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = normal(rng);
    return m;
}

model::DivadSpec dense_spec(model::PriorKind prior) {
    model::DivadSpec s;
    s.n_features = 12;
    s.encoding_dim = 16;
    s.hidden_dims = {200};
    s.prior = prior;
    s.n_components = 8;
    s.domain_ids = {0, 1, 2, 3, 4, 5};
    return s;
}

}  // namespace

static void BM_Smooth(benchmark::State& state) {
    const auto raw = gaussian(state.range(0), 1, 1);
    const std::vector<double> y(raw.data(), raw.data() + raw.size());
    for (auto _ : state) benchmark::DoNotOptimize(scoring::smooth(y, 0.99, 20));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Smooth)->Arg(2000)->Arg(100000);

static void BM_PrCurve(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto raw = gaussian(state.range(0), 1, 2);
    eval::LabeledScores s;
    for (std::size_t t = 0; t < n; ++t) {
        const int label = (t / 50) % 10 == 3 ? 1 + static_cast<int>(t / 500) % 3 : 0;
        s.labels.push_back(label);
        s.scores.push_back(raw(static_cast<Eigen::Index>(t)) + (label ? 1.5 : 0.0));
    }
    for (auto _ : state) benchmark::DoNotOptimize(eval::peak_f1(eval::pr_curve({s}, 1)));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PrCurve)->Arg(2000)->Arg(50000);

static void BM_DivadTrainStep(benchmark::State& state) {
    const auto prior = state.range(0) == 0 ? model::PriorKind::FixedGaussian : model::PriorKind::LearnedGM;
    model::DivadModel m(dense_spec(prior), 1);
    const Eigen::MatrixXd x = gaussian(128, 12, 3);
    std::vector<int> d(128);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<int>(i % 6);
    nn::Rng rng(4);
    for (auto _ : state) {
        nn::Tape tape;
        const auto noise = model::ElboNoise::sample(128, 16, rng);
        auto loss = model::DivadModel::total_objective(m.terms(tape, x, d, noise), {1.0, 1e5});
        tape.backward(loss);
        benchmark::DoNotOptimize(loss.value());
    }
    state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_DivadTrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

static void BM_DivadEncode(benchmark::State& state) {
    model::DivadModel m(dense_spec(model::PriorKind::LearnedGM), 1);
    const Eigen::MatrixXd x = gaussian(state.range(0), 12, 5);
    for (auto _ : state) benchmark::DoNotOptimize(m.prior_log_prob(m.encode_y(x)));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DivadEncode)->Arg(2000)->Unit(benchmark::kMicrosecond);

static void BM_VaeScore(benchmark::State& state) {
    baselines::DenseVae vae({.input_dim = 12, .hidden_dims = {200}, .encoding_dim = 16}, 1);
    const Eigen::MatrixXd x = gaussian(200, 12, 6);
    for (auto _ : state) benchmark::DoNotOptimize(vae.score(x, static_cast<int>(state.range(0)), 7));
    state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(BM_VaeScore)->Arg(1)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_SynthGenerate(benchmark::State& state) {
    synth::SynthConfig c;
    for (auto _ : state) {
        benchmark::DoNotOptimize(synth::generate(c));
        ++c.seed;
    }
}
BENCHMARK(BM_SynthGenerate)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
