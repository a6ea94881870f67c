#include "divad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "divad/error.hpp"
#include "divad/format.hpp"

namespace divad::eval {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kKdeGridPoints = 512;
constexpr double kKdeMargin = 0.05;

double median(std::vector<double> v) {
    if (v.empty()) throw EmptyInputError("median of an empty population");
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

std::vector<double> finite_only(const std::vector<double>& v) {
    std::vector<double> out;
    out.reserve(v.size());
    for (double x : v) {
        if (std::isfinite(x)) out.push_back(x);
    }
    return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    return out;
}

nlohmann::json json_number(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

}  // namespace

std::vector<bool> mask_post_anomaly(const std::vector<int>& labels, Eigen::Index window_length) {
    if (window_length < 1) throw ArgumentError("window length must be positive");
    std::vector<bool> mask(labels.size(), false);
    const auto n = labels.size();
    for (std::size_t t = 0; t < n; ++t) {
        const bool run_ends = labels[t] != 0 && (t + 1 == n || labels[t + 1] == 0);
        if (!run_ends) continue;
        for (std::size_t k = t + 1; k < n && k <= t + static_cast<std::size_t>(window_length - 1); ++k) {
            if (labels[k] == 0) mask[k] = true;
        }
    }
    return mask;
}

PrCurve pr_curve(const std::vector<LabeledScores>& sequences, Eigen::Index window_length) {
    struct Record {
        double score;
        int label;
    };
    std::vector<Record> records;
    PrCurve curve;
    for (const auto& s : sequences) {
        if (s.scores.size() != s.labels.size()) throw DimensionError("scores and labels differ in length");
        const auto mask = mask_post_anomaly(s.labels, window_length);
        for (std::size_t t = 0; t < s.scores.size(); ++t) {
            if (mask[t]) {
                ++curve.masked_count;
                continue;
            }
            if (std::isnan(s.scores[t])) throw ArgumentError("NaN score at an evaluated record");
            records.push_back({s.scores[t], s.labels[t]});
        }
    }
    curve.n_records = records.size();

    std::map<int, std::size_t> type_totals;
    std::size_t n_normal = 0;
    for (const auto& r : records) {
        if (r.label == 0) ++n_normal;
        else ++type_totals[r.label];
    }
    if (type_totals.empty()) throw ArgumentError("no anomalous record among evaluated records");
    if (n_normal == 0) throw ArgumentError("no normal record among evaluated records");
    std::map<int, std::size_t> type_slot;
    for (const auto& [type, count] : type_totals) {
        type_slot[type] = curve.event_types.size();
        curve.event_types.push_back(type);
    }

    std::sort(records.begin(), records.end(), [](const Record& a, const Record& b) { return a.score > b.score; });
    std::vector<double> thresholds;
    for (const auto& r : records) {
        if (std::isfinite(r.score) && (thresholds.empty() || thresholds.back() != r.score)) thresholds.push_back(r.score);
    }
    thresholds.push_back(kNegInf);  // descending order

    const auto n_types = curve.event_types.size();
    std::vector<std::size_t> tp(n_types, 0);
    std::size_t positives = 0;
    std::size_t next = 0;
    curve.points.reserve(thresholds.size());
    for (double delta : thresholds) {
        while (next < records.size() && records[next].score > delta) {
            if (records[next].label != 0) ++tp[type_slot[records[next].label]];
            ++positives;
            ++next;
        }
        PrPoint p;
        p.threshold = delta;
        const std::size_t true_pos = std::accumulate(tp.begin(), tp.end(), std::size_t{0});
        p.precision = positives == 0 ? 1.0 : static_cast<double>(true_pos) / static_cast<double>(positives);
        p.type_recalls.resize(n_types);
        double recall_sum = 0.0;
        for (std::size_t k = 0; k < n_types; ++k) {
            p.type_recalls[k] = static_cast<double>(tp[k]) / static_cast<double>(type_totals[curve.event_types[k]]);
            recall_sum += p.type_recalls[k];
        }
        p.recall = recall_sum / static_cast<double>(n_types);
        const double denom = p.precision + p.recall;
        p.f1 = denom > 0.0 ? 2.0 * p.precision * p.recall / denom : 0.0;
        curve.points.push_back(std::move(p));
    }
    std::reverse(curve.points.begin(), curve.points.end());
    return curve;
}

PeakF1 peak_f1(const PrCurve& curve) {
    if (curve.points.empty()) throw EmptyInputError("PR curve has no points");
    const PrPoint* best = &curve.points.front();
    for (const auto& p : curve.points) {
        if (p.f1 > best->f1 || (p.f1 == best->f1 && p.threshold > best->threshold)) best = &p;
    }
    PeakF1 out;
    out.f1 = best->f1;
    out.threshold = best->threshold;
    out.precision = best->precision;
    out.recall = best->recall;
    for (std::size_t k = 0; k < curve.event_types.size(); ++k) out.type_recalls[curve.event_types[k]] = best->type_recalls[k];
    return out;
}

EvaluationReport evaluate(const std::vector<LabeledScores>& sequences, Eigen::Index window_length) {
    EvaluationReport r;
    r.curve = pr_curve(sequences, window_length);
    r.peak = peak_f1(r.curve);
    return r;
}

double overlap_statistic(const std::vector<double>& population, const std::vector<double>& reference) {
    if (population.empty()) throw EmptyInputError("overlap of an empty population");
    const double m = median(reference);
    const auto above = std::count_if(population.begin(), population.end(), [m](double x) { return x > m; });
    return static_cast<double>(above) / static_cast<double>(population.size());
}

double scott_bandwidth(const std::vector<double>& samples) {
    const auto n = samples.size();
    if (n < 2) return 0.0;
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    return sd * std::pow(static_cast<double>(n), -0.2);
}

std::vector<double> gaussian_kde(const std::vector<double>& samples, const std::vector<double>& grid, double bandwidth) {
    if (samples.empty()) throw EmptyInputError("KDE of an empty population");
    if (!(bandwidth > 0.0)) throw ArgumentError("KDE bandwidth must be positive");
    const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth * std::sqrt(2.0 * M_PI));
    std::vector<double> density(grid.size(), 0.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double acc = 0.0;
        for (double x : samples) {
            const double u = (grid[g] - x) / bandwidth;
            acc += std::exp(-0.5 * u * u);
        }
        density[g] = acc * norm;
    }
    return density;
}

ScoreDistributions export_score_distributions(const std::vector<double>& train_normal,
                                              const std::vector<double>& test_normal,
                                              const std::vector<double>& test_anomalous) {
    ScoreDistributions d;
    const std::pair<const char*, const std::vector<double>*> inputs[] = {
        {"train-normal", &train_normal}, {"test-normal", &test_normal}, {"test-anomalous", &test_anomalous}};
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& [name, scores] : inputs) {
        auto finite = finite_only(*scores);
        if (finite.empty()) {
            warn(std::string("score population '") + name + "' is empty; omitted");
            continue;
        }
        lo = std::min(lo, *std::min_element(finite.begin(), finite.end()));
        hi = std::max(hi, *std::max_element(finite.begin(), finite.end()));
        d.populations.push_back({name, std::move(finite)});
    }
    if (d.populations.empty()) return d;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double margin = kKdeMargin * (hi - lo);
    lo -= margin;
    hi += margin;
    d.grid.resize(kKdeGridPoints);
    for (int i = 0; i < kKdeGridPoints; ++i) d.grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (kKdeGridPoints - 1);
    const double fallback = (hi - lo) / 100.0;
    for (const auto& p : d.populations) {
        double h = scott_bandwidth(p.scores);
        if (!(h > 0.0)) h = fallback;
        d.kde.push_back({p.name, h, gaussian_kde(p.scores, d.grid, h)});
    }

    auto find = [&](const std::string& name) -> const std::vector<double>* {
        for (const auto& p : d.populations) {
            if (p.name == name) return &p.scores;
        }
        return nullptr;
    };
    const auto* tn = find("test-normal");
    const auto* ta = find("test-anomalous");
    const auto* trn = find("train-normal");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    d.normal_anomalous_overlap = tn && ta ? overlap_statistic(*tn, *ta) : nan;
    d.train_test_overlap = tn && trn ? overlap_statistic(*tn, *trn) : nan;
    return d;
}

void write_pr_curve_csv(const std::filesystem::path& path, const PrCurve& curve) {
    auto out = open_out(path);
    out << "threshold,precision,recall,f1";
    for (int t : curve.event_types) out << ",recall_type_" << t;
    out << '\n';
    for (const auto& p : curve.points) {
        out << format_double(p.threshold) << ',' << format_double(p.precision) << ',' << format_double(p.recall) << ','
            << format_double(p.f1);
        for (double r : p.type_recalls) out << ',' << format_double(r);
        out << '\n';
    }
}

void write_distributions_csv(const std::filesystem::path& path, const ScoreDistributions& d) {
    auto out = open_out(path);
    out << "population,score\n";
    for (const auto& p : d.populations) {
        for (double s : p.scores) out << p.name << ',' << format_double(s) << '\n';
    }
}

void write_kde_csv(const std::filesystem::path& path, const ScoreDistributions& d) {
    auto out = open_out(path);
    out << "population,x,density\n";
    for (const auto& k : d.kde) {
        for (std::size_t i = 0; i < d.grid.size(); ++i) {
            out << k.name << ',' << format_double(d.grid[i]) << ',' << format_double(k.density[i]) << '\n';
        }
    }
}

std::string metrics_json(const EvaluationReport& report, const ScoreDistributions* distributions,
                         const std::string& extra_json) {
    nlohmann::json j = nlohmann::json::parse(extra_json);
    j["peak_f1"] = report.peak.f1;
    j["threshold"] = json_number(report.peak.threshold);
    j["precision"] = report.peak.precision;
    j["recall"] = report.peak.recall;
    nlohmann::json types = nlohmann::json::object();
    for (const auto& [type, recall] : report.peak.type_recalls) types[std::to_string(type)] = recall;
    j["type_recalls"] = types;
    j["masked_count"] = report.curve.masked_count;
    j["evaluated_records"] = report.curve.n_records;
    if (distributions != nullptr) {
        j["normal_anomalous_overlap"] = json_number(distributions->normal_anomalous_overlap);
        j["train_test_overlap"] = json_number(distributions->train_test_overlap);
    }
    return j.dump(2);
}

}  // namespace divad::eval
