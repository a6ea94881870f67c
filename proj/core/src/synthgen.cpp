#include "divad/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "divad/error.hpp"

namespace divad::synth {
namespace {

using Rng = std::mt19937_64;

constexpr int kCollectiveAttempts = 1000;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
    }
    return m;
}

Matrix unit_rows(Matrix m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r).normalize();
    return m;
}

/// T x P AR(1) path with stationary N(0, I) marginals.
Matrix latent_path(Rng& rng, Eigen::Index length, Eigen::Index dim, double phi) {
    const Matrix eps = normal_matrix(rng, length, dim);
    Matrix h(length, dim);
    h.row(0) = eps.row(0);
    const double innovation = std::sqrt(1.0 - phi * phi);
    for (Eigen::Index t = 1; t < length; ++t) h.row(t) = phi * h.row(t - 1) + innovation * eps.row(t);
    return h;
}

struct Mixing {
    Matrix invariant;  // M_inv x P
    Matrix specific;   // M_spec x P
};

void fill_features(Matrix& x, Eigen::Index t, const Eigen::RowVectorXd& h, const Mixing& mix, const DomainParams& d,
                   const Eigen::RowVectorXd& noise, Eigen::Index m_inv) {
    const Eigen::Index m_spec = mix.specific.rows();
    x.row(t).head(m_inv) = (mix.invariant * h.transpose()).transpose() + noise.head(m_inv);
    const double two_pi_ft = 2.0 * M_PI * d.frequency * static_cast<double>(t);
    for (Eigen::Index j = 0; j < m_spec; ++j) {
        x(t, m_inv + j) = d.offset(j) + d.scale(j) * mix.specific.row(j).dot(h) +
                          d.amplitude(j) * std::sin(two_pi_ft + d.phase(j)) + noise(m_inv + j);
    }
}

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> column(const Matrix& x, Eigen::Index c, const std::vector<Eigen::Index>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(x(r, c));
    return out;
}

std::vector<Eigen::Index> normal_rows(const data::Sequence& s) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index t = 0; t < s.length(); ++t) {
        if (!s.has_labels() || s.labels[static_cast<std::size_t>(t)] == data::kNormalLabel) rows.push_back(t);
    }
    return rows;
}

}  // namespace

std::string to_string(AnomalyType t) {
    switch (t) {
        case AnomalyType::Contextual: return "contextual";
        case AnomalyType::Point: return "point";
        case AnomalyType::Collective: return "collective";
    }
    return "unknown";
}

AnomalyType anomaly_type_from_string(const std::string& text) {
    if (text == "contextual") return AnomalyType::Contextual;
    if (text == "point") return AnomalyType::Point;
    if (text == "collective") return AnomalyType::Collective;
    throw ArgumentError("unknown anomaly type '" + text + "'");
}

int SynthConfig::anomalies_per_sequence() const {
    int n = 0;
    for (const auto& a : anomalies) n += a.count;
    return n;
}

void SynthConfig::validate() const {
    if (n_train_domains < 2) throw ConfigError("at least two training domains required");
    if (n_test_domains < 1) throw ConfigError("at least one held-out domain required");
    if (length < 2) throw ConfigError("sequence length must be at least 2");
    if (m_invariant < 1 || m_invariant >= n_features) throw ConfigError("need 1 <= m_invariant < n_features");
    if (latent_dim < 1) throw ConfigError("latent dimension must be positive");
    const bool collective = std::any_of(anomalies.begin(), anomalies.end(), [](const AnomalySpec& a) {
        return a.type == AnomalyType::Collective && a.count > 0;
    });
    // Full-rank invariant features leave no joint structure for a collective anomaly to break.
    if (collective && m_invariant <= latent_dim) throw ConfigError("collective anomalies need m_invariant > latent_dim");
    if (!(ar_coefficient >= 0.0 && ar_coefficient < 1.0)) throw ConfigError("AR coefficient must lie in [0, 1)");
    if (!(noise_std >= 0.0)) throw ConfigError("noise level must be nonnegative");
    for (const Range* r : {&offset, &scale, &frequency, &amplitude}) {
        if (!(r->lo <= r->hi)) throw ConfigError("parameter range with lo > hi");
    }
    if (!(test_shift > 0.0)) throw ConfigError("held-out shift must be positive");
    const int n = anomalies_per_sequence();
    if (n < 1) throw ConfigError("held-out sequences need at least one anomaly for evaluation to be defined");
    Eigen::Index longest = 0;
    for (const auto& a : anomalies) {
        if (a.count < 0) throw ConfigError("anomaly count must be nonnegative");
        if (a.min_duration < 1 || a.max_duration < a.min_duration) throw ConfigError("bad anomaly duration range");
        if (a.max_duration > length) {
            throw ConfigError("anomaly duration " + std::to_string(a.max_duration) + " exceeds sequence length " +
                              std::to_string(length));
        }
        if (!(a.magnitude > 0.0)) throw ConfigError("anomaly magnitude must be positive");
        longest = std::max(longest, a.max_duration);
    }
    if (length / n < longest + 2) {
        throw ConfigError("cannot place " + std::to_string(n) + " anomalies of up to " + std::to_string(longest) +
                          " records in a sequence of " + std::to_string(length));
    }
}

std::string SynthConfig::to_json() const {
    nlohmann::json j;
    j["n_train_domains"] = n_train_domains;
    j["n_test_domains"] = n_test_domains;
    j["length"] = length;
    j["n_features"] = n_features;
    j["m_invariant"] = m_invariant;
    j["latent_dim"] = latent_dim;
    j["ar_coefficient"] = ar_coefficient;
    j["noise_std"] = noise_std;
    auto range = [](const Range& r) { return nlohmann::json::array({r.lo, r.hi}); };
    j["offset"] = range(offset);
    j["scale"] = range(scale);
    j["frequency"] = range(frequency);
    j["amplitude"] = range(amplitude);
    j["test_shift"] = test_shift;
    j["anomalies"] = nlohmann::json::array();
    for (const auto& a : anomalies) {
        j["anomalies"].push_back({{"type", to_string(a.type)},
                                  {"count", a.count},
                                  {"min_duration", a.min_duration},
                                  {"max_duration", a.max_duration},
                                  {"magnitude", a.magnitude}});
    }
    j["seed"] = seed;
    return j.dump(2);
}

SynthConfig SynthConfig::from_json(const std::string& text) {
    SynthConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        auto range = [&](const char* key, Range& r) {
            if (j.contains(key)) r = {j[key].at(0).get<double>(), j[key].at(1).get<double>()};
        };
        c.n_train_domains = j.value("n_train_domains", c.n_train_domains);
        c.n_test_domains = j.value("n_test_domains", c.n_test_domains);
        c.length = j.value("length", c.length);
        c.n_features = j.value("n_features", c.n_features);
        c.m_invariant = j.value("m_invariant", c.m_invariant);
        c.latent_dim = j.value("latent_dim", c.latent_dim);
        c.ar_coefficient = j.value("ar_coefficient", c.ar_coefficient);
        c.noise_std = j.value("noise_std", c.noise_std);
        range("offset", c.offset);
        range("scale", c.scale);
        range("frequency", c.frequency);
        range("amplitude", c.amplitude);
        c.test_shift = j.value("test_shift", c.test_shift);
        if (j.contains("anomalies")) {
            c.anomalies.clear();
            for (const auto& a : j["anomalies"]) {
                AnomalySpec s;
                s.type = anomaly_type_from_string(a.at("type").get<std::string>());
                s.count = a.value("count", s.count);
                s.min_duration = a.value("min_duration", s.min_duration);
                s.max_duration = a.value("max_duration", s.max_duration);
                s.magnitude = a.value("magnitude", s.magnitude);
                c.anomalies.push_back(s);
            }
        }
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("synth config: ") + e.what());
    }
    c.validate();
    return c;
}

Generated generate(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const Eigen::Index T = config.length;
    const Eigen::Index m_inv = config.m_invariant;
    const Eigen::Index m_spec = config.n_features - m_inv;
    const Eigen::Index P = config.latent_dim;

    Mixing mix{unit_rows(normal_matrix(rng, m_inv, P)), unit_rows(normal_matrix(rng, m_spec, P))};
    const Matrix h = latent_path(rng, T, P, config.ar_coefficient);

    Generated out;
    const int n_domains = config.n_train_domains + config.n_test_domains;
    for (int d = 0; d < n_domains; ++d) {
        DomainParams p;
        p.domain_id = d;
        p.held_out = d >= config.n_train_domains;
        p.offset.resize(m_spec);
        p.scale.resize(m_spec);
        p.amplitude.resize(m_spec);
        p.phase.resize(m_spec);
        for (Eigen::Index j = 0; j < m_spec; ++j) {
            p.offset(j) = uniform(rng, config.offset.lo, config.offset.hi);
            p.scale(j) = uniform(rng, config.scale.lo, config.scale.hi);
            p.amplitude(j) = uniform(rng, config.amplitude.lo, config.amplitude.hi);
            p.phase(j) = uniform(rng, 0.0, 2.0 * M_PI);
        }
        p.frequency = uniform(rng, config.frequency.lo, config.frequency.hi);
        out.domains.push_back(std::move(p));
    }
    // Held-out domains leave the training hull: offsets beyond the training
    // extremes of every specific feature, frequency above the training maximum.
    double max_train_freq = 0.0;
    Vector off_min = Vector::Constant(m_spec, std::numeric_limits<double>::infinity());
    Vector off_max = -off_min;
    for (int d = 0; d < config.n_train_domains; ++d) {
        off_min = off_min.cwiseMin(out.domains[static_cast<std::size_t>(d)].offset);
        off_max = off_max.cwiseMax(out.domains[static_cast<std::size_t>(d)].offset);
        max_train_freq = std::max(max_train_freq, out.domains[static_cast<std::size_t>(d)].frequency);
    }
    for (int d = config.n_train_domains; d < n_domains; ++d) {
        auto& p = out.domains[static_cast<std::size_t>(d)];
        for (Eigen::Index j = 0; j < m_spec; ++j) {
            const double distance = config.test_shift * uniform(rng, 0.5, 1.0);
            p.offset(j) = uniform(rng, 0.0, 1.0) < 0.5 ? off_min(j) - distance : off_max(j) + distance;
        }
        p.frequency = max_train_freq * uniform(rng, 1.2, 1.5);
    }

    std::vector<Matrix> noise;
    for (int d = 0; d < n_domains; ++d) {
        noise.push_back(config.noise_std * normal_matrix(rng, T, config.n_features));
        data::Sequence s;
        const auto& p = out.domains[static_cast<std::size_t>(d)];
        s.id = (p.held_out ? "test_d" : "train_d") + std::to_string(d);
        s.domain_id = d;
        s.role = p.held_out ? data::Role::Test : data::Role::Train;
        s.values.resize(T, config.n_features);
        for (Eigen::Index t = 0; t < T; ++t) fill_features(s.values, t, h.row(t), mix, p, noise.back().row(t), m_inv);
        if (p.held_out) s.labels.assign(static_cast<std::size_t>(T), data::kNormalLabel);
        out.dataset.sequences.push_back(std::move(s));
    }

    // Global normal range of every feature, before injection.
    Vector global_min = Vector::Constant(config.n_features, std::numeric_limits<double>::infinity());
    Vector global_max = -global_min;
    for (const auto& s : out.dataset.sequences) {
        global_min = global_min.cwiseMin(s.values.colwise().minCoeff().transpose());
        global_max = global_max.cwiseMax(s.values.colwise().maxCoeff().transpose());
    }

    // 99.9th-percentile Mahalanobis ellipsoid of the invariant features,
    // matching the validity check.
    Matrix inv(T * n_domains, m_inv);
    for (int d = 0; d < n_domains; ++d) inv.middleRows(d * T, T) = out.dataset.sequences[static_cast<std::size_t>(d)].values.leftCols(m_inv);
    const Eigen::RowVectorXd inv_mean = inv.colwise().mean();
    const Matrix inv_centered = inv.rowwise() - inv_mean;
    const Eigen::LLT<Matrix> inv_llt(inv_centered.transpose() * inv_centered / static_cast<double>(inv.rows()));
    auto inv_d2 = [&](const Eigen::RowVectorXd& v) { return inv_llt.matrixL().solve((v - inv_mean).transpose()).squaredNorm(); };
    std::vector<double> inv_d2_all(static_cast<std::size_t>(inv.rows()));
    for (Eigen::Index r = 0; r < inv.rows(); ++r) inv_d2_all[static_cast<std::size_t>(r)] = inv_d2(inv.row(r));
    // margin against the ellipsoid refit on the records left normal
    const double inv_limit = 1.5 * percentile(inv_d2_all, 0.999);

    std::vector<AnomalyType> plan;
    std::vector<const AnomalySpec*> specs;
    for (const auto& a : config.anomalies) {
        for (int i = 0; i < a.count; ++i) specs.push_back(&a);
    }
    const auto n_anom = static_cast<Eigen::Index>(specs.size());
    const Eigen::Index slot = T / n_anom;
    std::normal_distribution<double> normal;

    for (int d = config.n_train_domains; d < n_domains; ++d) {
        auto& s = out.dataset.sequences[static_cast<std::size_t>(d)];
        const auto& p = out.domains[static_cast<std::size_t>(d)];
        const Matrix& eps = noise[static_cast<std::size_t>(d)];
        std::vector<const AnomalySpec*> order = specs;
        std::shuffle(order.begin(), order.end(), rng);
        const Vector dom_min = s.values.colwise().minCoeff().transpose();
        const Vector dom_max = s.values.colwise().maxCoeff().transpose();
        for (Eigen::Index k = 0; k < n_anom; ++k) {
            const AnomalySpec& a = *order[static_cast<std::size_t>(k)];
            const auto duration = std::uniform_int_distribution<Eigen::Index>(a.min_duration, a.max_duration)(rng);
            const Eigen::Index slot_start = k * slot + 1;
            const Eigen::Index latest = (k + 1) * slot - duration - 1;
            const Eigen::Index start = std::uniform_int_distribution<Eigen::Index>(slot_start, latest)(rng);
            const Eigen::Index end = start + duration - 1;
            Injected inj{s.id, a.type, start, end};

            if (a.type == AnomalyType::Collective) {
                // Half of the invariant features follow an unrelated latent path:
                // marginals stay normal, their joint structure breaks. Paths are
                // redrawn until one record leaves the normal invariant ellipsoid.
                const Eigen::Index broken = std::max<Eigen::Index>(1, m_inv / 2);
                bool placed = false;
                for (int attempt = 0; attempt < kCollectiveAttempts && !placed; ++attempt) {
                    const Matrix other = latent_path(rng, duration, P, config.ar_coefficient);
                    Matrix block = s.values.block(start, 0, duration, m_inv);
                    for (Eigen::Index t = 0; t < duration; ++t) {
                        for (Eigen::Index j = 0; j < broken; ++j) {
                            block(t, j) = mix.invariant.row(j).dot(other.row(t)) + eps(start + t, j);
                        }
                    }
                    bool in_range = true, leaves = false;
                    for (Eigen::Index t = 0; t < duration; ++t) {
                        in_range = in_range && (block.row(t).array() >= global_min.head(m_inv).transpose().array()).all() &&
                                   (block.row(t).array() <= global_max.head(m_inv).transpose().array()).all();
                        leaves = leaves || inv_d2(block.row(t)) > inv_limit;
                    }
                    if (in_range && leaves) {
                        s.values.block(start, 0, duration, m_inv) = block;
                        placed = true;
                    }
                }
                if (!placed) {
                    throw ConfigError("no collective anomaly of " + std::to_string(duration) +
                                      " records leaves the normal invariant region; use more invariant features");
                }
            } else {
                // Latent displacement along one invariant direction, large enough
                // to leave the normal range of that feature.
                const Eigen::Index target = std::uniform_int_distribution<Eigen::Index>(0, m_inv - 1)(rng);
                const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
                const Eigen::RowVectorXd shift = sign * a.magnitude * mix.invariant.row(target).normalized();
                for (Eigen::Index t = start; t <= end; ++t) {
                    fill_features(s.values, t, h.row(t) + shift, mix, p, eps.row(t), m_inv);
                }
                if (a.type == AnomalyType::Contextual) {
                    // One specific feature moves to a level seen in other domains
                    // but outside this domain's own range.
                    std::vector<Eigen::Index> roomy;
                    for (Eigen::Index j = m_inv; j < config.n_features; ++j) {
                        if (std::max(dom_min(j) - global_min(j), global_max(j) - dom_max(j)) > 0.0) roomy.push_back(j);
                    }
                    if (roomy.empty()) throw ConfigError("no domain-specific feature leaves room for a contextual level");
                    const Eigen::Index j = roomy[std::uniform_int_distribution<std::size_t>(0, roomy.size() - 1)(rng)];
                    const double below = dom_min(j) - global_min(j);
                    const double above = global_max(j) - dom_max(j);
                    const double level = below > above ? global_min(j) + 0.5 * below : global_max(j) - 0.5 * above;
                    for (Eigen::Index t = start; t <= end; ++t) s.values(t, j) = level;
                    inj.feature = j;
                    inj.level = level;
                }
            }
            for (Eigen::Index t = start; t <= end; ++t) s.labels[static_cast<std::size_t>(t)] = static_cast<int>(a.type);
            out.anomalies.push_back(inj);
        }
    }
    out.dataset.validate();
    return out;
}

// describe

std::string DatasetSummary::to_json() const {
    nlohmann::json j;
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    j["held_out_domains"] = held_out_domains;
    j["domains"] = nlohmann::json::array();
    for (const auto& d : domains) {
        j["domains"].push_back({{"domain_id", d.domain_id},
                                {"role", data::to_string(d.role)},
                                {"feature_min", vec(d.feature_min)},
                                {"feature_max", vec(d.feature_max)},
                                {"feature_mean", vec(d.feature_mean)}});
    }
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [type, n] : anomaly_counts) counts[std::to_string(type)] = n;
    j["anomaly_counts"] = counts;
    j["shift_magnitude"] = vec(shift_magnitude);
    return j.dump(2);
}

DatasetSummary describe(const data::Dataset& dataset) {
    DatasetSummary out;
    const Eigen::Index M = dataset.n_features();
    std::map<int, std::vector<const data::Sequence*>> by_domain;
    for (const auto& s : dataset.sequences) by_domain[s.domain_id].push_back(&s);

    Vector train_sum = Vector::Zero(M), test_sum = Vector::Zero(M);
    double train_n = 0.0, test_n = 0.0;
    for (const auto& [domain, seqs] : by_domain) {
        DomainSummary d;
        d.domain_id = domain;
        d.role = seqs.front()->role;
        d.feature_min = Vector::Constant(M, std::numeric_limits<double>::infinity());
        d.feature_max = -d.feature_min;
        Vector sum = Vector::Zero(M);
        double n = 0.0;
        for (const auto* s : seqs) {
            for (auto t : normal_rows(*s)) {
                const Vector x = s->values.row(t).transpose();
                d.feature_min = d.feature_min.cwiseMin(x);
                d.feature_max = d.feature_max.cwiseMax(x);
                sum += x;
                n += 1.0;
            }
        }
        d.feature_mean = n > 0 ? Vector(sum / n) : Vector::Zero(M);
        if (d.role == data::Role::Test) {
            out.held_out_domains.push_back(domain);
            test_sum += sum;
            test_n += n;
        } else {
            train_sum += sum;
            train_n += n;
        }
        out.domains.push_back(std::move(d));
    }
    for (const auto& s : dataset.sequences) {
        if (!s.has_labels()) continue;
        for (std::size_t t = 0; t < s.labels.size(); ++t) {
            const bool starts = s.labels[t] != 0 && (t == 0 || s.labels[t - 1] != s.labels[t]);
            if (starts) ++out.anomaly_counts[s.labels[t]];
        }
    }
    out.shift_magnitude = (train_n > 0 && test_n > 0) ? Vector((train_sum / train_n - test_sum / test_n).cwiseAbs())
                                                      : Vector::Zero(M);
    return out;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw EmptyInputError("KS statistic of an empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_critical_value_1pct(std::size_t n, std::size_t m) {
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    return 1.628 * std::sqrt((dn + dm) / (dn * dm));
}

ValidityReport check_validity(const data::Dataset& dataset, Eigen::Index m_invariant) {
    ValidityReport r;
    const Eigen::Index M = dataset.n_features();
    if (m_invariant < 1 || m_invariant >= M) throw ArgumentError("m_invariant out of range");
    std::vector<std::vector<Eigen::Index>> rows;
    for (const auto& s : dataset.sequences) rows.push_back(normal_rows(s));

    r.min_specific_ks = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < dataset.sequences.size(); ++a) {
        for (std::size_t b = a + 1; b < dataset.sequences.size(); ++b) {
            const auto& sa = dataset.sequences[a];
            const auto& sb = dataset.sequences[b];
            const double crit = ks_critical_value_1pct(rows[a].size(), rows[b].size());
            r.ks_critical = std::max(r.ks_critical, crit);
            for (Eigen::Index j = 0; j < m_invariant; ++j) {
                r.max_invariant_ks = std::max(r.max_invariant_ks, ks_statistic(column(sa.values, j, rows[a]), column(sb.values, j, rows[b])));
            }
            double best = 0.0;
            for (Eigen::Index j = m_invariant; j < M; ++j) {
                best = std::max(best, ks_statistic(column(sa.values, j, rows[a]), column(sb.values, j, rows[b])));
            }
            r.min_specific_ks = std::min(r.min_specific_ks, best);
        }
    }

    // 99.9th-percentile Mahalanobis ellipsoid of normal invariant features.
    std::vector<Eigen::RowVectorXd> normal;
    for (std::size_t i = 0; i < dataset.sequences.size(); ++i) {
        for (auto t : rows[i]) normal.push_back(dataset.sequences[i].values.row(t).head(m_invariant));
    }
    Matrix x(static_cast<Eigen::Index>(normal.size()), m_invariant);
    for (std::size_t i = 0; i < normal.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = normal[i];
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - mean;
    const Matrix cov = centered.transpose() * centered / static_cast<double>(x.rows());
    Eigen::LLT<Matrix> llt(cov);
    auto d2 = [&](const Eigen::RowVectorXd& v) {
        return llt.matrixL().solve((v - mean).transpose()).squaredNorm();
    };
    std::vector<double> normal_d2;
    normal_d2.reserve(normal.size());
    for (const auto& v : normal) normal_d2.push_back(d2(v));
    const double limit = percentile(normal_d2, 0.999);

    for (const auto& s : dataset.sequences) {
        if (!s.has_labels()) continue;
        std::size_t t = 0;
        while (t < s.labels.size()) {
            if (s.labels[t] == 0) {
                ++t;
                continue;
            }
            const int type = s.labels[t];
            bool survives = false;
            for (; t < s.labels.size() && s.labels[t] == type; ++t) {
                if (d2(s.values.row(static_cast<Eigen::Index>(t)).head(m_invariant)) > limit) survives = true;
            }
            ++r.anomalies;
            if (survives) ++r.surviving_anomalies;
        }
    }
    return r;
}

}  // namespace divad::synth
