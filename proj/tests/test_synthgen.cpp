#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "divad/dataset_io.hpp"
#include "divad/synthgen.hpp"
#include "helpers.hpp"

using namespace divad;
using namespace divad::synth;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

SynthConfig small_config(std::uint64_t seed) {
    SynthConfig c;
    c.length = 600;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_SUITE("synthgen") {

TEST_CASE("degenerate and infeasible configs are rejected") {
    SynthConfig none;
    none.n_train_domains = 1;
    none.n_test_domains = 1;
    none.noise_std = 0.0;
    none.anomalies.clear();
    CHECK_THROWS_AS(none.validate(), ConfigError);
    CHECK_THROWS_AS((void)generate(none), ConfigError);

    SynthConfig too_long;
    too_long.length = 30;
    too_long.anomalies = {{AnomalyType::Point, 1, 10, 40, 6.0}};
    CHECK_THROWS_AS(too_long.validate(), ConfigError);

    SynthConfig bad_m;
    bad_m.m_invariant = bad_m.n_features + 1;
    CHECK_THROWS_AS(bad_m.validate(), ConfigError);

    SynthConfig full_rank;
    full_rank.m_invariant = full_rank.latent_dim;
    CHECK_THROWS_AS(full_rank.validate(), ConfigError);
    full_rank.anomalies = {{AnomalyType::Point, 2, 10, 40, 6.0}};
    full_rank.validate();

    SynthConfig{}.validate();
    CHECK(SynthConfig{}.anomalies_per_sequence() == 8);
}

TEST_CASE("config JSON round trip") {
    SynthConfig c = small_config(17);
    c.test_shift = 0.75;
    const auto back = SynthConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.seed == 17);
    CHECK(back.anomalies.size() == c.anomalies.size());
}

TEST_CASE("contextual anomalies sit inside the global range but outside their domain's range") {
    for (std::uint64_t seed : {0, 1, 2}) {
        const auto g = generate(small_config(seed));
        const auto& seqs = g.dataset.sequences;
        const Eigen::Index M = seqs.front().values.cols();
        const Eigen::VectorXd inf = Eigen::VectorXd::Constant(M, std::numeric_limits<double>::infinity());
        Eigen::VectorXd global_lo = inf;
        Eigen::VectorXd global_hi = -inf;
        std::map<int, std::pair<Eigen::VectorXd, Eigen::VectorXd>> domain_range;
        for (const auto& s : seqs) {
            auto& [lo, hi] = domain_range.try_emplace(s.domain_id, inf, -inf).first->second;
            for (Eigen::Index t = 0; t < s.values.rows(); ++t) {
                if (!s.labels.empty() && s.labels[static_cast<std::size_t>(t)] != 0) continue;
                global_lo = global_lo.cwiseMin(s.values.row(t).transpose());
                global_hi = global_hi.cwiseMax(s.values.row(t).transpose());
                lo = lo.cwiseMin(s.values.row(t).transpose());
                hi = hi.cwiseMax(s.values.row(t).transpose());
            }
        }
        int checked = 0;
        for (const auto& a : g.anomalies) {
            if (a.type != AnomalyType::Contextual) continue;
            const auto seq = std::find_if(seqs.begin(), seqs.end(), [&](const auto& s) { return s.id == a.sequence_id; });
            REQUIRE(seq != seqs.end());
            const auto& [lo, hi] = domain_range.at(seq->domain_id);
            const Eigen::Index f = a.feature;
            CHECK(a.level > global_lo(f));
            CHECK(a.level < global_hi(f));
            CHECK((a.level < lo(f) || a.level > hi(f)));
            // every record in the range carries the level, up to observation noise
            for (Eigen::Index t = a.start; t <= a.end; ++t) {
                const double v = seq->values(t, f);
                CHECK(v >= global_lo(f));
                CHECK(v <= global_hi(f));
                CHECK((v < lo(f) || v > hi(f)));
            }
            ++checked;
        }
        CHECK(checked == 2 * 3);
    }
}

TEST_CASE("the same seed produces byte-identical files") {
    testing::TempDir tmp("divad-synth");
    const auto a = data::save_dataset(tmp.path / "a", generate(small_config(5)).dataset);
    const auto b = data::save_dataset(tmp.path / "b", generate(small_config(5)).dataset);
    std::size_t files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(tmp.path / "a")) {
        const auto other = tmp.path / "b" / entry.path().filename();
        REQUIRE(std::filesystem::exists(other));
        CHECK(slurp(entry.path()) == slurp(other));
        ++files;
    }
    CHECK(files > 8);
    CHECK(slurp(a) == slurp(b));
    const auto c = generate(small_config(6)).dataset;
    CHECK(c.sequences.front().values != generate(small_config(5)).dataset.sequences.front().values);
}

TEST_CASE("only held-out sequences are labeled and they carry every configured anomaly") {
    const auto cfg = small_config(3);
    const auto g = generate(cfg);
    std::set<int> train_domains, test_domains;
    for (const auto& s : g.dataset.sequences) {
        (s.role == data::Role::Train ? train_domains : test_domains).insert(s.domain_id);
        const bool anomalous = std::any_of(s.labels.begin(), s.labels.end(), [](int l) { return l != 0; });
        CHECK(anomalous == (s.role == data::Role::Test));
    }
    CHECK(train_domains.size() == 6);
    CHECK(test_domains.size() == 2);
    for (int d : test_domains) CHECK(train_domains.count(d) == 0);
    CHECK(g.anomalies.size() == 2u * 8u);
}

TEST_CASE("held-out domains lie outside the training parameter hull") {
    const auto g = generate(small_config(4));
    double max_train_freq = 0.0;
    Eigen::VectorXd train_lo, train_hi;
    for (const auto& d : g.domains) {
        if (d.held_out) continue;
        max_train_freq = std::max(max_train_freq, d.frequency);
        train_lo = train_lo.size() ? train_lo.cwiseMin(d.offset) : d.offset;
        train_hi = train_hi.size() ? train_hi.cwiseMax(d.offset) : d.offset;
    }
    for (const auto& d : g.domains) {
        if (!d.held_out) continue;
        bool outside = d.frequency > max_train_freq;
        for (Eigen::Index f = 0; f < d.offset.size(); ++f) {
            outside = outside || d.offset(f) < train_lo(f) || d.offset(f) > train_hi(f);
        }
        CHECK(outside);
    }
}

TEST_CASE("describe lists held-out domains, anomaly counts and a positive shift") {
    const auto cfg = small_config(8);
    const auto summary = describe(generate(cfg).dataset);
    CHECK(summary.held_out_domains.size() == 2);
    CHECK(summary.domains.size() == 8);
    for (const auto& spec : cfg.anomalies) {
        CHECK(summary.anomaly_counts.at(static_cast<int>(spec.type)) == spec.count * cfg.n_test_domains);
    }
    CHECK(summary.shift_magnitude.maxCoeff() > 0.0);
    for (const auto& d : summary.domains) CHECK((d.feature_min.array() <= d.feature_max.array()).all());
    CHECK(summary.to_json().find("held_out_domains") != std::string::npos);
}

TEST_CASE("KS statistic and critical value") {
    CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(ks_statistic({1, 2, 3}, {4, 5, 6}) == 1.0);
    // ECDFs differ by 1/2 at 2.5 for {1,2} against {3,4} shifted by one
    CHECK(ks_statistic({1, 2, 3, 4}, {3, 4, 5, 6}) == doctest::Approx(0.5));
    CHECK(ks_critical_value_1pct(2000, 2000) == doctest::Approx(1.628 * std::sqrt(4000.0 / 4e6)));
}

TEST_CASE("generated data passes its validity checks at the default length") {
    for (std::uint64_t seed : {0, 9}) {
        SynthConfig c;
        c.seed = seed;
        const auto report = check_validity(generate(c).dataset, c.m_invariant);
        INFO(report.max_invariant_ks, " ", report.min_specific_ks, " ", report.ks_critical);
        CHECK(report.passed());
        CHECK(report.anomalies == 16);
    }
}

}  // TEST_SUITE
