#include "divad/scoring.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "divad/error.hpp"
#include "divad/format.hpp"

namespace divad::scoring {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr Eigen::Index kScoreBatch = 2048;

double parse_double(const std::string& field, const std::filesystem::path& path) {
    double v = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc() || ptr != end) throw FormatError(path.string() + ": bad number '" + field + "'");
    return v;
}

}  // namespace

Vector score_prior(model::DivadModel& model, const Matrix& windows) {
    return -model.prior_log_prob(model.encode_y(windows));
}

Vector score_agg_posterior(model::DivadModel& model, const density::DensityEstimate& q, const Matrix& windows) {
    if (!q.fitted()) throw StateError("aggregated-posterior estimate used before fitting");
    return -q.log_prob_rows(model.encode_y(windows));
}

std::vector<double> smooth(const std::vector<double>& raw, double gamma, Eigen::Index window_length,
                           SmoothingMode mode) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ArgumentError("smoothing factor must lie in [0, 1)");
    if (window_length < 1) throw ArgumentError("window length must be positive");
    if (raw.empty()) throw EmptyInputError("no window scores to smooth");
    const auto lead = static_cast<std::size_t>(window_length - 1);
    std::vector<double> out(lead + raw.size(), kNegInf);
    double m = (1.0 - gamma) * raw[0];
    out[lead] = mode == SmoothingMode::Literal ? m : m / (1.0 - gamma);
    for (std::size_t i = 1; i < raw.size(); ++i) {
        const double t = static_cast<double>(window_length) + static_cast<double>(i);  // 1-based record index
        m = gamma * m + (1.0 - gamma) * raw[i];
        if (mode == SmoothingMode::Literal) {
            m /= 1.0 - std::pow(gamma, t + 1.0);
            out[lead + i] = m;
        } else {
            out[lead + i] = m / (1.0 - std::pow(gamma, static_cast<double>(i + 1)));
        }
    }
    return out;
}

const std::vector<double>& default_gamma_grid() {
    static const std::vector<double> grid{0.0,   0.8,     0.9,    0.95,    0.96667, 0.975,
                                          0.98,  0.98333, 0.9875, 0.99167, 0.99375, 0.995};
    return grid;
}

std::vector<double> window_scores(WindowScorer& scorer, const data::Sequence& sequence) {
    const Eigen::Index L = scorer.window_length();
    const Eigen::Index T = sequence.length();
    if (T < L) {
        warn("sequence '" + sequence.id + "' has " + std::to_string(T) + " records, fewer than the window length " +
             std::to_string(L) + "; no scores produced");
        return {};
    }
    const Eigen::Index M = sequence.n_features();
    const Eigen::Index n = T - L + 1;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index start = 0; start < n; start += kScoreBatch) {
        const Eigen::Index b = std::min(kScoreBatch, n - start);
        Matrix batch(b, L * M);
        for (Eigen::Index i = 0; i < b; ++i) {
            for (Eigen::Index r = 0; r < L; ++r) batch.block(i, r * M, 1, M) = sequence.values.row(start + i + r);
        }
        const Vector s = scorer.score(batch);
        if (s.size() != b) throw DimensionError("window scorer returned the wrong number of scores");
        out.insert(out.end(), s.data(), s.data() + s.size());
    }
    return out;
}

OnlineScorer::OnlineScorer(WindowScorer& scorer, double gamma, SmoothingMode mode)
    : scorer_(&scorer), gamma_(gamma), mode_(mode) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ArgumentError("smoothing factor must lie in [0, 1)");
}

SequenceScores OnlineScorer::score(const data::Sequence& sequence) const {
    return from_window_scores(sequence, window_scores(*scorer_, sequence));
}

SequenceScores OnlineScorer::from_window_scores(const data::Sequence& sequence, const std::vector<double>& raw) const {
    SequenceScores out;
    out.sequence_id = sequence.id;
    if (raw.empty()) return out;
    const Eigen::Index L = scorer_->window_length();
    if (static_cast<Eigen::Index>(raw.size()) != sequence.length() - L + 1) {
        throw DimensionError("window-score count does not match sequence '" + sequence.id + "'");
    }
    out.smoothed = smooth(raw, gamma_, L, mode_);
    out.raw.assign(static_cast<std::size_t>(L - 1), kNegInf);
    out.raw.insert(out.raw.end(), raw.begin(), raw.end());
    out.timestamps.reserve(out.raw.size());
    for (Eigen::Index t = 0; t < sequence.length(); ++t) out.timestamps.push_back(sequence.timestamp(t));
    return out;
}

SequenceScores score_sequence(WindowScorer& scorer, const data::Sequence& sequence, double gamma, SmoothingMode mode) {
    return OnlineScorer(scorer, gamma, mode).score(sequence);
}

void write_scores_csv(const std::filesystem::path& path, const SequenceScores& scores) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "timestamp,raw_score,smoothed_score\n";
    for (std::size_t t = 0; t < scores.size(); ++t) {
        out << scores.timestamps[t] << ',';
        if (std::isfinite(scores.raw[t])) out << format_double(scores.raw[t]);
        out << ',' << format_double(scores.smoothed[t]) << '\n';
    }
}

SequenceScores read_scores_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read " + path.string());
    SequenceScores s;
    s.sequence_id = path.stem().string();
    std::string line;
    std::getline(in, line);
    if (line != "timestamp,raw_score,smoothed_score") throw FormatError(path.string() + ": unexpected header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto a = line.find(',');
        const auto b = line.find(',', a + 1);
        if (a == std::string::npos || b == std::string::npos) throw FormatError(path.string() + ": bad row '" + line + "'");
        std::int64_t ts = 0;
        auto [ptr, ec] = std::from_chars(line.data(), line.data() + a, ts);
        if (ec != std::errc() || ptr != line.data() + a) throw FormatError(path.string() + ": bad timestamp in '" + line + "'");
        s.timestamps.push_back(ts);
        const std::string raw = line.substr(a + 1, b - a - 1);
        s.raw.push_back(raw.empty() ? kNegInf : parse_double(raw, path));
        s.smoothed.push_back(parse_double(line.substr(b + 1), path));
    }
    return s;
}

}  // namespace divad::scoring
