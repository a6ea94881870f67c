#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

#include "divad/evaluation.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace divad;
using namespace divad::eval;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("masking: L = 1 masks nothing, one anomaly masks the L-1 following records") {
    std::vector<int> labels(60, 0);
    for (int t = 10; t <= 15; ++t) labels[static_cast<std::size_t>(t)] = 1;
    const auto none = mask_post_anomaly(labels, 1);
    CHECK(std::count(none.begin(), none.end(), true) == 0);
    const auto m = mask_post_anomaly(labels, 20);
    for (std::size_t t = 0; t < 60; ++t) CHECK(m[t] == (t >= 16 && t <= 34));
}

TEST_CASE("masking agrees with enumeration and never masks anomalies") {
    for (int L = 1; L <= 4; ++L) {
        for (int code = 0; code < 3 * 3 * 3 * 3 * 3 * 3 * 3 * 3; ++code) {
            std::vector<int> labels;
            for (int c = code, i = 0; i < 8; ++i, c /= 3) labels.push_back(c % 3);
            const auto got = mask_post_anomaly(labels, L);
            const auto want = testing::mask_oracle(labels, L);
            CHECK(got == want);
            for (std::size_t t = 0; t < labels.size(); ++t) {
                if (labels[t] != 0) CHECK_FALSE(got[t]);
            }
        }
    }
}

TEST_CASE("six-record example peaks at threshold 4") {
    const LabeledScores s{{1, 2, 3, 4, 5, 6}, {0, 0, 0, 0, 1, 2}};
    const auto report = evaluate({s}, 1);
    CHECK(report.peak.threshold == 4.0);
    CHECK(report.peak.precision == 1.0);
    CHECK(report.peak.recall == 1.0);
    CHECK(report.peak.f1 == 1.0);
    CHECK(report.peak.type_recalls.at(1) == 1.0);
    CHECK(report.peak.type_recalls.at(2) == 1.0);
}

TEST_CASE("a perfect scorer reaches F1 1") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LabeledScores s;
    for (int i = 0; i < 100; ++i) {
        const int label = i % 7 == 0 ? 1 + i % 3 : 0;
        s.labels.push_back(label);
        s.scores.push_back(label ? 2.0 + u(rng) : u(rng));
    }
    CHECK(evaluate({s}, 1).peak.f1 == 1.0);
}

TEST_CASE("a constant scorer peaks at the all-positive detector") {
    const LabeledScores s{std::vector<double>(20, 3.0), {0, 0, 1, 1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}};
    const auto curve = pr_curve({s}, 1);
    REQUIRE(curve.points.size() == 2);
    CHECK(curve.points[0].threshold == kNegInf);
    CHECK(curve.points[0].recall == 1.0);
    CHECK(curve.points[0].precision == doctest::Approx(3.0 / 20.0));
    CHECK(curve.points[1].precision == 1.0);
    CHECK(curve.points[1].recall == 0.0);
    const auto peak = peak_f1(curve);
    CHECK(peak.threshold == kNegInf);
    CHECK(peak.f1 == doctest::Approx(2 * 0.15 / 1.15));
}

TEST_CASE("PR curve and peak F1 equal a brute-force threshold sweep") {
    std::mt19937_64 rng(2024);
    for (int instance = 0; instance < 200; ++instance) {
        const auto inst = testing::random_instance(rng);
        const auto got = pr_curve(inst.sequences, inst.window_length);
        const auto want = testing::brute_force_curve(inst.sequences, inst.window_length);
        REQUIRE(got.points.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(got.points[i].threshold == want[i].threshold);
            CHECK(got.points[i].precision == want[i].precision);
            CHECK(got.points[i].recall == want[i].recall);
            CHECK(got.points[i].f1 == want[i].f1);
        }
        const auto peak = peak_f1(got);
        const auto best = testing::brute_force_peak(want);
        CHECK(peak.f1 == best.f1);
        CHECK(peak.threshold == best.threshold);
    }
}

TEST_CASE("precision and per-type recall are monotone in the threshold") {
    std::mt19937_64 rng(7);
    for (int instance = 0; instance < 50; ++instance) {
        const auto inst = testing::random_instance(rng);
        const auto curve = pr_curve(inst.sequences, inst.window_length);
        for (std::size_t i = 1; i < curve.points.size(); ++i) {
            for (std::size_t k = 0; k < curve.event_types.size(); ++k) {
                CHECK(curve.points[i].type_recalls[k] <= curve.points[i - 1].type_recalls[k]);
            }
        }
        // nothing exceeds the largest finite score
        CHECK(curve.points.back().recall == 0.0);
        CHECK(curve.points.back().precision == 1.0);
    }
}

TEST_CASE("peak F1 is invariant under strictly increasing transforms") {
    std::mt19937_64 rng(11);
    for (int instance = 0; instance < 30; ++instance) {
        auto inst = testing::random_instance(rng);
        const double before = peak_f1(pr_curve(inst.sequences, inst.window_length)).f1;
        for (auto& s : inst.sequences) {
            for (auto& v : s.scores) v = std::isinf(v) ? v : std::exp(0.5 * v) + 3.0;
        }
        CHECK(peak_f1(pr_curve(inst.sequences, inst.window_length)).f1 == before);
    }
}

TEST_CASE("masked records influence no metric") {
    std::mt19937_64 rng(13);
    for (int instance = 0; instance < 30; ++instance) {
        auto inst = testing::random_instance(rng);
        const auto before = pr_curve(inst.sequences, inst.window_length);
        for (auto& s : inst.sequences) {
            const auto mask = mask_post_anomaly(s.labels, inst.window_length);
            for (std::size_t t = 0; t < s.scores.size(); ++t) {
                if (mask[t]) s.scores[t] = 1e6 * static_cast<double>(rng() % 100);
            }
        }
        const auto after = pr_curve(inst.sequences, inst.window_length);
        REQUIRE(after.points.size() == before.points.size());
        for (std::size_t i = 0; i < after.points.size(); ++i) {
            CHECK(after.points[i].threshold == before.points[i].threshold);
            CHECK(after.points[i].f1 == before.points[i].f1);
        }
    }
}

TEST_CASE("adding a dominated candidate leaves the peak unchanged") {
    LabeledScores s{{0.1, 0.4, 0.35, 0.8, 0.9, 0.2}, {0, 0, 0, 1, 1, 0}};
    const auto base = evaluate({s}, 1).peak;
    s.scores.push_back(0.05);
    s.labels.push_back(0);
    CHECK(evaluate({s}, 1).peak.f1 == base.f1);
}

TEST_CASE("pr_curve rejects one-class inputs and NaN scores") {
    CHECK_THROWS_AS((void)pr_curve({{{1, 2}, {0, 0}}}, 1), ArgumentError);
    CHECK_THROWS_AS((void)pr_curve({{{1, 2}, {1, 1}}}, 1), ArgumentError);
    CHECK_THROWS_AS((void)pr_curve({{{1, std::nan("")}, {0, 1}}}, 1), ArgumentError);
    CHECK_THROWS_AS((void)pr_curve({{{1, 2}, {0}}}, 1), DimensionError);
}

TEST_CASE("KDE: identical populations give identical curves, unit mass peaks at its point") {
    const std::vector<double> a{0.1, 0.5, 0.7, 1.2, 2.0};
    const auto d = export_score_distributions(a, a, {3.0, 4.0});
    REQUIRE(d.kde.size() == 3);
    CHECK(d.kde[0].density == d.kde[1].density);
    CHECK(d.grid.size() == 512);

    std::vector<double> grid;
    for (int i = -50; i <= 50; ++i) grid.push_back(0.02 * i);
    const auto dens = gaussian_kde({0.0}, grid, 0.1);
    CHECK(std::max_element(dens.begin(), dens.end()) - dens.begin() == 50);
    double mass = 0.0;
    for (double v : dens) mass += v * 0.02;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("Scott bandwidth") {
    CHECK(scott_bandwidth({2.0, 2.0, 2.0}) == 0.0);
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const double sd = std::sqrt(5.0 / 3.0);
    CHECK(scott_bandwidth(x) == doctest::Approx(sd * std::pow(4.0, -0.2)));
}

TEST_CASE("well-separated populations barely overlap") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> lo(0.0, 1.0), hi(10.0, 1.0);
    std::vector<double> normal, anomalous, train;
    for (int i = 0; i < 2000; ++i) {
        normal.push_back(lo(rng));
        anomalous.push_back(hi(rng));
        train.push_back(lo(rng));
    }
    const auto d = export_score_distributions(train, normal, anomalous);
    CHECK(d.normal_anomalous_overlap < 0.05);
    CHECK(d.train_test_overlap == doctest::Approx(0.5).epsilon(0.1));
    CHECK(overlap_statistic(anomalous, normal) == doctest::Approx(1.0));
}

TEST_CASE("empty populations are dropped with a warning and non-finite scores ignored") {
    testing::WarningLog log;
    const auto d = export_score_distributions({1.0, 2.0, kNegInf}, {1.5, 2.5}, {});
    CHECK(d.populations.size() == 2);
    CHECK(d.populations[0].scores.size() == 2);
    CHECK(log.messages.size() == 1);
}

TEST_CASE("report files are written") {
    testing::TempDir tmp("divad-eval");
    const LabeledScores s{{1, 2, 3, 4, 5, 6}, {0, 0, 0, 0, 1, 2}};
    const auto report = evaluate({s}, 1);
    const auto d = export_score_distributions({1, 2}, {1, 2, 3, 4}, {5, 6});
    write_pr_curve_csv(tmp.path / "pr.csv", report.curve);
    write_distributions_csv(tmp.path / "d.csv", d);
    write_kde_csv(tmp.path / "k.csv", d);
    CHECK(std::filesystem::file_size(tmp.path / "pr.csv") > 0);
    CHECK(std::filesystem::file_size(tmp.path / "k.csv") > 0);
    const auto j = metrics_json(report, &d, R"({"gamma": 0.9})");
    CHECK(j.find("\"gamma\"") != std::string::npos);
    CHECK(j.find("peak_f1") != std::string::npos);
}

}  // TEST_SUITE
