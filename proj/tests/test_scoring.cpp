#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "divad/distributions.hpp"
#include "divad/scoring.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace divad;
using namespace divad::scoring;
using model::DivadModel;
using model::DivadSpec;
using model::PriorKind;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

DivadSpec small_spec(PriorKind prior) {
    DivadSpec s;
    s.n_features = 3;
    s.encoding_dim = 2;
    s.hidden_dims = {6};
    s.prior_hidden = 4;
    s.domain_ids = {0, 1};
    s.prior = prior;
    s.n_components = 1;
    return s;
}

void zero_encoder_y(DivadModel& m) {
    for (auto* p : m.parameters()) {
        if (p->name.rfind("enc_y", 0) == 0) p->value.setZero();
    }
}

data::Sequence random_sequence(Eigen::Index T, Eigen::Index M, std::uint64_t seed) {
    data::Sequence s;
    s.id = "seq";
    s.values = testing::random_matrix(T, M, seed, 1.0);
    return s;
}

FunctionScorer row_norm_scorer(Eigen::Index L) {
    return FunctionScorer([](const Matrix& w) { return Vector(w.rowwise().squaredNorm()); }, L, "norm");
}

}  // namespace

TEST_SUITE("scoring") {

TEST_CASE("prior score of a zero encoding is ln(2 pi) for M' = 2") {
    DivadModel m(small_spec(PriorKind::FixedGaussian), 1);
    zero_encoder_y(m);
    const Vector s = score_prior(m, testing::random_matrix(5, 3, 2, 1.0));
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(s(i) == doctest::Approx(nn::kLogTwoPi).epsilon(1e-14));
}

TEST_CASE("fixed-prior score is monotone in the squared encoding norm") {
    DivadModel m(small_spec(PriorKind::FixedGaussian), 3);
    const Matrix x = testing::random_matrix(200, 3, 4, 2.0);
    const Vector s = score_prior(m, x);
    const Vector norms = m.encode_y(x).rowwise().squaredNorm();
    std::vector<Eigen::Index> order(200);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return norms(a) < norms(b); });
    for (std::size_t i = 1; i < order.size(); ++i) CHECK(s(order[i]) >= s(order[i - 1]));
    CHECK((s.array() - 0.5 * norms.array() - nn::kLogTwoPi).abs().maxCoeff() < 1e-12);
}

TEST_CASE("a one-component standard mixture scores like the fixed prior") {
    DivadModel gm(small_spec(PriorKind::LearnedGM), 5);
    gm.mixture_prior().mean_param().value.setZero();
    gm.mixture_prior().std_param().value.setConstant(nn::softplus_inverse(1.0 - nn::kStdEpsilon));
    DivadModel g(small_spec(PriorKind::FixedGaussian), 5);
    auto gp = g.parameters();
    auto mp = gm.parameters();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i]->value = mp[i]->value;
    const Matrix x = testing::random_matrix(50, 3, 6, 1.5);
    CHECK((score_prior(gm, x) - score_prior(g, x)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("Gaussian aggregated-posterior score is half the squared Mahalanobis distance plus a constant") {
    DivadModel m(small_spec(PriorKind::FixedGaussian), 7);
    const Matrix train = testing::random_matrix(500, 3, 8, 1.0);
    const auto q = m.fit_aggregated_posterior(train, 1);
    REQUIRE(q.gaussian() != nullptr);
    const Matrix x = testing::random_matrix(40, 3, 9, 2.0);
    const Vector s = score_agg_posterior(m, q, x);
    const Matrix z = m.encode_y(x);
    Vector offset(40);
    for (Eigen::Index i = 0; i < 40; ++i) offset(i) = s(i) - 0.5 * q.gaussian()->mahalanobis_squared(z.row(i).transpose());
    CHECK(offset.maxCoeff() - offset.minCoeff() < 1e-10);

    Matrix twin(2, 3);
    twin.row(0) = x.row(3);
    twin.row(1) = x.row(3);
    const Vector ts = score_agg_posterior(m, q, twin);
    CHECK(ts(0) == ts(1));
    CHECK_THROWS_AS((void)score_agg_posterior(m, density::DensityEstimate{}, x), StateError);
}

TEST_CASE("the fitted mean minimizes the score along any ray") {
    const Matrix z = testing::random_matrix(300, 2, 1, 1.0) * Eigen::Matrix2d{{1.0, 0.4}, {0.0, 0.6}};
    const density::DensityEstimate q(density::MultivariateGaussian::fit(z));
    const Vector mean = q.gaussian()->mean();
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Vector dir = testing::random_matrix(2, 1, s + 10, 1.0);
        double previous = -q.log_prob(mean);
        for (int k = 1; k <= 10; ++k) {
            const double current = -q.log_prob(mean + 0.3 * k * dir);
            CHECK(current > previous);
            previous = current;
        }
    }
}

TEST_CASE("smoothing with gamma 0 is the identity after the first L-1 records") {
    const std::vector<double> raw{3.0, -1.0, 2.5, 7.0};
    const auto out = smooth(raw, 0.0, 3);
    REQUIRE(out.size() == 6);
    CHECK(out[0] == kNegInf);
    CHECK(out[1] == kNegInf);
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(out[i + 2] == raw[i]);
    const auto bc = smooth(raw, 0.0, 3, SmoothingMode::BiasCorrected);
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(bc[i + 2] == raw[i]);
}

TEST_CASE("smoothing matches the step-by-step recursion") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int c = 0; c < 100; ++c) {
        const int L = 1 + static_cast<int>(rng() % 5);
        const int n = 1 + static_cast<int>(rng() % 60);
        const double g = c % 10 == 0 ? 0.0 : 0.999 * unit(rng);
        std::vector<double> raw(static_cast<std::size_t>(n));
        for (auto& v : raw) v = 10.0 * unit(rng) - 5.0;
        const auto got = smooth(raw, g, L);
        const auto want = testing::smooth_oracle(raw, g, L);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            if (std::isinf(want[i])) {
                CHECK(got[i] == want[i]);
            } else {
                CHECK(std::abs(got[i] - want[i]) <= 1e-12 * std::max(1.0, std::abs(want[i])));
            }
        }
    }
}

TEST_CASE("bias-corrected smoothing of a constant stays constant") {
    const std::vector<double> raw(50, 2.0);
    const auto out = smooth(raw, 0.9, 2, SmoothingMode::BiasCorrected);
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("smoothing rejects invalid arguments") {
    CHECK_THROWS_AS((void)smooth({1.0}, 1.0, 1), ArgumentError);
    CHECK_THROWS_AS((void)smooth({1.0}, -0.1, 1), ArgumentError);
    CHECK_THROWS_AS((void)smooth({}, 0.5, 1), EmptyInputError);
    CHECK(default_gamma_grid().size() == 12);
    CHECK(default_gamma_grid().front() == 0.0);
    CHECK(default_gamma_grid().back() == 0.995);
}

TEST_CASE("L = 1, gamma = 0 gives the window score of each record") {
    auto scorer = row_norm_scorer(1);
    const auto seq = random_sequence(30, 4, 1);
    const auto out = score_sequence(scorer, seq, 0.0);
    REQUIRE(out.size() == 30);
    for (Eigen::Index t = 0; t < 30; ++t) CHECK(out.smoothed[static_cast<std::size_t>(t)] == seq.values.row(t).squaredNorm());
}

TEST_CASE("scores are causal: a prefix reproduces the leading scores") {
    auto scorer = row_norm_scorer(4);
    const auto seq = random_sequence(300, 3, 2);
    const auto full = score_sequence(scorer, seq, 0.95);
    for (Eigen::Index cut : {4, 5, 57, 299}) {
        auto prefix = seq;
        prefix.values = seq.values.topRows(cut);
        const auto part = score_sequence(scorer, prefix, 0.95);
        REQUIRE(part.size() == static_cast<std::size_t>(cut));
        // batch composition may change the last bit of a window score
        for (std::size_t i = 0; i < part.size(); ++i) {
            if (std::isinf(full.smoothed[i])) {
                CHECK(part.smoothed[i] == full.smoothed[i]);
            } else {
                CHECK(std::abs(part.smoothed[i] - full.smoothed[i]) <= 1e-12 * std::abs(full.smoothed[i]));
            }
        }
    }
}

TEST_CASE("a constant-zero scorer gives zero finite scores") {
    FunctionScorer zero([](const Matrix& w) { return Vector::Zero(w.rows()); }, 3);
    const auto out = score_sequence(zero, random_sequence(20, 2, 3), 0.9);
    CHECK(out.smoothed[0] == kNegInf);
    CHECK(out.smoothed[1] == kNegInf);
    for (std::size_t i = 2; i < out.size(); ++i) CHECK(out.smoothed[i] == 0.0);
}

TEST_CASE("a strictly increasing transform preserves the ranking at gamma 0") {
    auto base = row_norm_scorer(2);
    FunctionScorer transformed([](const Matrix& w) { return Vector(w.rowwise().squaredNorm().array().sqrt().exp()); }, 2);
    const auto seq = random_sequence(100, 3, 4);
    const auto a = score_sequence(base, seq, 0.0);
    const auto b = score_sequence(transformed, seq, 0.0);
    for (std::size_t i = 1; i < a.size(); ++i) {
        for (std::size_t j = 1; j < a.size(); ++j) CHECK((a.smoothed[i] < a.smoothed[j]) == (b.smoothed[i] < b.smoothed[j]));
    }
}

TEST_CASE("windows follow the flattening convention") {
    FunctionScorer first_cell([](const Matrix& w) { return Vector(w.col(w.cols() - 1)); }, 3);
    const auto seq = random_sequence(10, 2, 5);
    const auto raw = window_scores(first_cell, seq);
    REQUIRE(raw.size() == 8);
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(raw[i] == seq.values(static_cast<Eigen::Index>(i) + 2, 1));
}

TEST_CASE("a sequence shorter than L yields no scores and a warning") {
    auto scorer = row_norm_scorer(5);
    testing::WarningLog log;
    const auto out = score_sequence(scorer, random_sequence(3, 2, 6), 0.5);
    CHECK(out.size() == 0);
    CHECK(log.messages.size() == 1);
}

TEST_CASE("score CSV round trip keeps -inf and exact values") {
    testing::TempDir tmp("divad-scores");
    auto scorer = row_norm_scorer(3);
    auto seq = random_sequence(25, 2, 7);
    seq.timestamps.resize(25);
    for (std::size_t i = 0; i < 25; ++i) seq.timestamps[i] = 1000 + 10 * static_cast<std::int64_t>(i);
    const auto out = score_sequence(scorer, seq, 0.9);
    write_scores_csv(tmp.path / "s.csv", out);
    const auto back = read_scores_csv(tmp.path / "s.csv");
    CHECK(back.timestamps == out.timestamps);
    REQUIRE(back.size() == out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(back.smoothed[i] == out.smoothed[i]);
        CHECK(back.raw[i] == out.raw[i]);
    }
}

TEST_CASE("DIVAD scores are pure functions of the frozen model and window") {
    DivadModel m(small_spec(PriorKind::LearnedGM), 2);
    const Matrix x = testing::random_matrix(10, 3, 1, 1.0);
    CHECK(score_prior(m, x) == score_prior(m, x));
    Matrix doubled(20, 3);
    doubled << x, x;
    const Vector s = score_prior(m, doubled);
    CHECK(s.head(10) == s.tail(10));
}

}  // TEST_SUITE
