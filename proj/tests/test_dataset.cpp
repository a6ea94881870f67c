#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "divad/dataset.hpp"
#include "divad/dataset_io.hpp"
#include "helpers.hpp"

using namespace divad;
using data::Sequence;
using data::WindowSet;
using Eigen::MatrixXd;

namespace {

Sequence ramp(const std::string& id, Eigen::Index T, Eigen::Index M, int domain = 0) {
    Sequence s;
    s.id = id;
    s.domain_id = domain;
    s.values.resize(T, M);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index j = 0; j < M; ++j) s.values(t, j) = 100.0 * static_cast<double>(t) + static_cast<double>(j);
    }
    return s;
}

WindowSet windows_per_domain(const std::map<int, int>& counts) {
    WindowSet ws(1, 1);
    for (const auto& [domain, n] : counts) {
        for (int i = 0; i < n; ++i) {
            ws.push_back(MatrixXd::Constant(1, 1, domain * 1000 + i), domain, "s" + std::to_string(domain), i);
        }
    }
    return ws;
}

std::map<int, int> domain_counts(const WindowSet& ws) {
    std::map<int, int> out;
    for (int d : ws.domain_ids()) ++out[d];
    return out;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("windows of length 1 are the records") {
    const auto s = ramp("a", 5, 3);
    const auto ws = data::extract_windows(s, 1);
    REQUIRE(ws.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(ws.window(i) == s.values.row(static_cast<Eigen::Index>(i)));
}

TEST_CASE("a window as long as the sequence is the sequence") {
    const auto s = ramp("a", 5, 2);
    const auto ws = data::extract_windows(s, 5);
    REQUIRE(ws.size() == 1);
    CHECK(ws.window(0) == s.values);
    CHECK(ws.end_timestamps()[0] == 4);
}

TEST_CASE("T=100, L=20 gives 81 windows sliced from the rows") {
    const auto s = ramp("a", 100, 3);
    const auto ws = data::extract_windows(s, 20);
    REQUIRE(ws.size() == 81);
    CHECK(ws.window(0) == s.values.topRows(20));
    for (std::size_t i = 0; i < ws.size(); ++i) {
        CHECK(ws.window(i) == s.values.middleRows(static_cast<Eigen::Index>(i), 20));
        CHECK(ws.end_timestamps()[i] == static_cast<Eigen::Index>(i) + 19);
        CHECK(ws.sequence_ids()[i] == "a");
    }
}

TEST_CASE("window longer than the sequence names the sequence") {
    const auto s = ramp("short-trace", 4, 2);
    try {
        (void)data::extract_windows(s, 5);
        FAIL("expected EmptyInputError");
    } catch (const EmptyInputError& e) {
        CHECK(std::string(e.what()).find("short-trace") != std::string::npos);
    }
}

TEST_CASE("last rows of consecutive windows rebuild the sequence tail") {
    const auto s = ramp("a", 37, 4);
    const Eigen::Index L = 6;
    const auto ws = data::extract_windows(s, L);
    MatrixXd rebuilt(static_cast<Eigen::Index>(ws.size()), 4);
    for (std::size_t i = 0; i < ws.size(); ++i) rebuilt.row(static_cast<Eigen::Index>(i)) = ws.window(i).row(L - 1);
    CHECK(rebuilt == s.values.bottomRows(37 - L + 1));
}

TEST_CASE("flattening lays records end to end") {
    const auto s = ramp("a", 6, 3);
    const auto flat = data::extract_windows(s, 2).flattened();
    REQUIRE(flat.rows() == 5);
    REQUIRE(flat.cols() == 6);
    CHECK(flat(0, 0) == s.values(0, 0));
    CHECK(flat(0, 2) == s.values(0, 2));
    CHECK(flat(0, 3) == s.values(1, 0));
    CHECK(flat(4, 5) == s.values(5, 2));
}

TEST_CASE("normal-window extraction skips windows touching an anomaly") {
    auto s = ramp("a", 10, 1);
    s.labels.assign(10, 0);
    s.labels[4] = 2;
    const auto ws = data::extract_normal_windows(s, 3);
    // windows end at 2..9; those ending at 4, 5, 6 contain record 4
    std::vector<Eigen::Index> ends(ws.end_timestamps().begin(), ws.end_timestamps().end());
    CHECK(ends == std::vector<Eigen::Index>{2, 3, 7, 8, 9});
}

TEST_CASE("balancing an already balanced set keeps the counts") {
    const auto in = windows_per_domain({{0, 10}, {1, 10}});
    const auto out = data::balance_by_domain(in, 3);
    CHECK(domain_counts(out) == std::map<int, int>{{0, 10}, {1, 10}});
    const auto three = data::balance_by_domain(windows_per_domain({{0, 7}, {1, 7}, {2, 7}}), 3);
    CHECK(domain_counts(three) == std::map<int, int>{{0, 7}, {1, 7}, {2, 7}});
}

TEST_CASE("balancing 18/2 gives 10/10") {
    const auto out = data::balance_by_domain(windows_per_domain({{0, 18}, {1, 2}}), 11);
    CHECK(out.size() == 20);
    CHECK(domain_counts(out) == std::map<int, int>{{0, 10}, {1, 10}});
}

TEST_CASE("balancing preserves cardinality and emits only input windows") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::map<int, int> counts;
        const int n_domains = 1 + static_cast<int>(rng() % 5);
        for (int d = 0; d < n_domains; ++d) counts[d] = 1 + static_cast<int>(rng() % 30);
        const auto in = windows_per_domain(counts);
        const auto out = data::balance_by_domain(in, seed);
        CHECK(out.size() == in.size());
        auto c = domain_counts(out);
        int lo = 1 << 30, hi = 0;
        for (auto& [d, n] : c) {
            lo = std::min(lo, n);
            hi = std::max(hi, n);
        }
        CHECK(static_cast<int>(c.size()) == n_domains);
        CHECK(hi - lo <= 1);
        std::set<double> values;
        for (const auto& w : in.windows()) values.insert(w(0, 0));
        for (const auto& w : out.windows()) CHECK(values.count(w(0, 0)) == 1);
        // undersampled domains draw without replacement
        for (const auto& [d, n] : counts) {
            if (n < c[d]) continue;
            std::set<double> seen;
            for (std::size_t i = 0; i < out.size(); ++i) {
                if (out.domain_ids()[i] == d) CHECK(seen.insert(out.window(i)(0, 0)).second);
            }
        }
        const auto again = data::balance_by_domain(in, seed);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(again.window(i) == out.window(i));
    }
}

TEST_CASE("standardizer: constant feature maps to zero") {
    MatrixXd x(4, 2);
    x << 3, 1, 3, 2, 3, 3, 3, 4;
    const auto s = data::Standardizer::fit(x);
    CHECK(s.stddev()(0) == data::Standardizer::kDefaultFloor);
    const MatrixXd z = s.apply(x);
    CHECK(z.col(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("standardizer: values {0, 2} give mean 1, std 1") {
    MatrixXd x(2, 1);
    x << 0, 2;
    const auto s = data::Standardizer::fit(x);
    CHECK(s.mean()(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.stddev()(0) == doctest::Approx(1.0).epsilon(1e-15));
    const MatrixXd z = s.apply(x);
    CHECK(z(0, 0) == doctest::Approx(-1.0));
    CHECK(z(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("standardizer: training data is centered and scaled, inverse round-trips") {
    const MatrixXd x = testing::random_matrix(500, 5, 1, 3.0).rowwise() + Eigen::RowVectorXd::LinSpaced(5, -4, 4);
    const auto s = data::Standardizer::fit(x);
    const MatrixXd z = s.apply(x);
    for (Eigen::Index j = 0; j < 5; ++j) {
        const double mean = z.col(j).mean();
        const double sd = std::sqrt((z.col(j).array() - mean).square().mean());
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(sd - 1.0) < 1e-6);
    }
    CHECK((s.inverse(z) - x).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("standardizer statistics cover every record of every window") {
    const auto seq = ramp("a", 8, 2);
    const auto ws = data::extract_windows(seq, 3);
    const auto s = data::Standardizer::fit(ws);
    MatrixXd records(static_cast<Eigen::Index>(ws.size()) * 3, 2);
    for (std::size_t i = 0; i < ws.size(); ++i) records.middleRows(static_cast<Eigen::Index>(i) * 3, 3) = ws.window(i);
    const auto direct = data::Standardizer::fit(records);
    CHECK((s.mean() - direct.mean()).norm() < 1e-12);
    CHECK((s.stddev() - direct.stddev()).norm() < 1e-12);
}

TEST_CASE("split 0.2 of one sequence with 10 windows is 8/2") {
    const auto ws = data::extract_windows(ramp("a", 10, 1), 1);
    const auto [train, val] = data::train_val_split(ws, 0.2, 5);
    CHECK(train.size() == 8);
    CHECK(val.size() == 2);
}

TEST_CASE("split is stratified by sequence, disjoint and deterministic") {
    const auto a = ramp("a", 10, 1), b = ramp("b", 10, 1);
    const std::vector<const Sequence*> seqs{&a, &b};
    const auto ws = data::extract_windows(std::span<const Sequence* const>(seqs), 1);
    const auto [ti, vi] = data::train_val_split_indices(ws, 0.2, 9);
    std::map<std::string, int> per_seq;
    for (auto i : vi) ++per_seq[ws.sequence_ids()[i]];
    CHECK(per_seq == std::map<std::string, int>{{"a", 2}, {"b", 2}});
    std::set<std::size_t> all(ti.begin(), ti.end());
    for (auto i : vi) CHECK(all.insert(i).second);
    CHECK(all.size() == ws.size());
    const auto again = data::train_val_split_indices(ws, 0.2, 9);
    CHECK(again.first == ti);
    CHECK(again.second == vi);
}

TEST_CASE("a sequence with one window stays in training with a warning") {
    const auto a = ramp("a", 10, 1), b = ramp("tiny", 1, 1);
    const std::vector<const Sequence*> seqs{&a, &b};
    const auto ws = data::extract_windows(std::span<const Sequence* const>(seqs), 1);
    testing::WarningLog log;
    const auto [ti, vi] = data::train_val_split_indices(ws, 0.2, 1);
    CHECK(log.messages.size() == 1);
    for (auto i : vi) CHECK(ws.sequence_ids()[i] != "tiny");
    CHECK(ti.size() + vi.size() == 11);
}

TEST_CASE("sequence invariants are enforced") {
    auto s = ramp("a", 5, 2);
    s.labels = {0, 0, 1};
    CHECK_THROWS_AS(s.validate(), DimensionError);
    s.labels.clear();
    s.timestamps = {0, 1, 1, 2, 3};
    CHECK_THROWS_AS(s.validate(), FormatError);
    data::Dataset d;
    d.sequences = {ramp("a", 5, 2), ramp("b", 5, 3)};
    CHECK_THROWS_AS(d.validate(), DimensionError);
}

TEST_CASE("dataset files round-trip through the manifest") {
    testing::TempDir tmp("divad-dataset");
    data::Dataset d;
    auto a = ramp("train_a", 12, 3, 0);
    auto b = ramp("test_b", 9, 3, 4);
    b.role = data::Role::Test;
    b.labels.assign(9, 0);
    b.labels[2] = b.labels[3] = 1;
    b.labels[7] = 3;
    b.timestamps = {10, 20, 30, 40, 50, 60, 70, 80, 90};
    d.sequences = {a, b};
    const auto manifest = data::save_dataset(tmp.path, d);
    const auto loaded = data::load_dataset(manifest);
    REQUIRE(loaded.sequences.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& x = d.sequences[i];
        const auto& y = loaded.sequences[i];
        CHECK(x.id == y.id);
        CHECK(x.domain_id == y.domain_id);
        CHECK(x.role == y.role);
        CHECK(x.values == y.values);
        CHECK(x.labels == y.labels);
        for (Eigen::Index t = 0; t < x.length(); ++t) CHECK(x.timestamp(t) == y.timestamp(t));
    }
    const auto ranges = data::label_ranges(b);
    REQUIRE(ranges.size() == 2);
    CHECK(ranges[0].start == 2);
    CHECK(ranges[0].end == 3);
    CHECK(ranges[0].event_type == 1);
    CHECK(ranges[1].start == 7);
    CHECK(ranges[1].event_type == 3);
}

}  // TEST_SUITE
