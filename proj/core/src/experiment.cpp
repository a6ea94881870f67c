#include "divad/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <sstream>

#include <json.hpp>

#include "divad/dataset_io.hpp"
#include "divad/error.hpp"
#include "divad/format.hpp"
#include "divad/scoring.hpp"
#include "divad/trainer.hpp"

namespace divad::experiment {
namespace fs = std::filesystem;
using nlohmann::json;
using Matrix = Eigen::MatrixXd;

namespace {

/// JSON has no NaN or infinity; those are written as text.
json finite_or_text(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vector(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string standardizer_json(const data::Standardizer& s) {
    return json{{"mean", vector_json(s.mean())}, {"stddev", vector_json(s.stddev())}, {"floor", s.floor()}}.dump(2);
}

data::Standardizer standardizer_from_json(const std::string& text) {
    const auto j = json::parse(text);
    return {json_vector(j.at("mean")), json_vector(j.at("stddev")), j.at("floor").get<double>()};
}

std::vector<int> domain_indices(const model::DivadModel& m, const std::vector<int>& domain_ids) {
    return m.domain_indices(domain_ids);
}

/// Owns a DIVAD model together with its objective for the generic trainer.
struct DivadTrainee : train::Trainable {
    DivadTrainee(model::DivadSpec spec, std::uint64_t seed, model::ObjectiveWeights w, int kl_samples)
        : model(std::make_unique<model::DivadModel>(std::move(spec), seed)), objective(*model, w, kl_samples) {}
    std::vector<nn::Parameter*> parameters() override { return objective.parameters(); }
    train::LossOutput loss(nn::Tape& tape, const nn::Matrix& x, const std::vector<int>& labels, nn::Rng& rng) override {
        return objective.loss(tape, x, labels, rng);
    }
    std::unique_ptr<model::DivadModel> model;
    model::DivadObjective objective;
};

train::FitOptions fit_options(const RunConfig& c) {
    train::FitOptions o;
    o.epochs = c.epochs;
    o.patience = c.patience;
    o.batch_size = c.batch_size;
    o.seed = c.seed;
    return o;
}

void write_histories(const fs::path& dir, const std::vector<train::History>& candidates) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        candidates[i].write_csv(dir / ("history_lr" + std::to_string(i) + ".csv"));
    }
}

json history_summary(const train::History& h) {
    return {{"learning_rate", h.learning_rate},
            {"best_epoch", h.best_epoch},
            {"epochs_run", h.epochs.size()},
            {"best_val_loss", format_double(h.best_val_loss)},
            {"diverged", h.diverged}};
}

fs::path scores_dir(const fs::path& dir, Method m, Strategy s) { return dir / "scores" / scoring_label(m, s); }

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y%m%d-%H%M%S");
    return out.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::DivadG: return "divad-g";
        case Method::DivadGM: return "divad-gm";
        case Method::Pca: return "pca";
        case Method::Maha: return "maha";
        case Method::DenseAe: return "dense-ae";
        case Method::DenseVae: return "dense-vae";
    }
    return "unknown";
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Prior: return "prior";
        case Strategy::AggPosterior: return "agg-posterior";
        case Strategy::Both: return "both";
    }
    return "unknown";
}

std::string scoring_label(Method m, Strategy s) {
    if (m == Method::DivadG || m == Method::DivadGM) return to_string(s);
    return "default";
}

Method method_from_string(const std::string& text) {
    for (auto m : {Method::DivadG, Method::DivadGM, Method::Pca, Method::Maha, Method::DenseAe, Method::DenseVae}) {
        if (to_string(m) == text) return m;
    }
    throw ConfigError("unknown method '" + text + "'");
}

Strategy strategy_from_string(const std::string& text) {
    for (auto s : {Strategy::Prior, Strategy::AggPosterior, Strategy::Both}) {
        if (to_string(s) == text) return s;
    }
    throw ConfigError("unknown scoring strategy '" + text + "'");
}

// RunConfig

void RunConfig::validate() const {
    if (!dataset.empty() && synth) throw ConfigError("a dataset manifest and a synth config are mutually exclusive");
    if (synth) synth->validate();
    if (!is_divad() && variant != model::Architecture::Dense) {
        throw ConfigError("variant '" + model::to_string(variant) + "' applies to DIVAD methods only");
    }
    if (window_length < 1) throw ConfigError("window length must be positive");
    auto nonempty = [](bool empty, const char* name) {
        if (empty) throw ConfigError(std::string("grid '") + name + "' is empty");
    };
    nonempty(beta.empty(), "beta");
    nonempty(alpha_d.empty(), "alpha_d");
    nonempty(encoding_dim.empty(), "encoding_dim");
    nonempty(n_components.empty(), "n_components");
    nonempty(learning_rate.empty(), "learning_rate");
    nonempty(pca_components.empty(), "pca_components");
    if (!gamma.empty()) {
        for (double g : gamma) {
            if (!(g >= 0.0 && g < 1.0)) throw ConfigError("gamma values must lie in [0, 1)");
        }
    }
    for (double lr : learning_rate) {
        if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
    }
    for (auto m : encoding_dim) {
        if (m < 1) throw ConfigError("encoding dimensions must be positive");
    }
    for (int k : n_components) {
        if (k < 1) throw ConfigError("component counts must be positive");
    }
    for (double p : pca_components) {
        if (!(p > 0.0)) throw ConfigError("PCA components must be positive");
    }
    if (epochs < 1 || patience < 0 || batch_size < 1) throw ConfigError("bad training schedule");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("validation fraction must lie in [0, 1)");
    if (kl_samples < 1 || vae_samples < 1) throw ConfigError("sample counts must be positive");
}

std::vector<double> RunConfig::gammas() const { return gamma.empty() ? scoring::default_gamma_grid() : gamma; }

std::vector<Strategy> RunConfig::strategies() const {
    if (!is_divad()) return {Strategy::Prior};
    if (scoring == Strategy::Both) return {Strategy::Prior, Strategy::AggPosterior};
    return {scoring};
}

std::string RunConfig::to_json() const {
    json j;
    if (synth) j["synth"] = json::parse(synth->to_json());
    else j["dataset"] = dataset;
    j["method"] = to_string(method);
    j["variant"] = model::to_string(variant);
    j["scoring"] = to_string(scoring);
    j["window_length"] = window_length;
    j["beta"] = beta;
    j["alpha_d"] = alpha_d;
    j["encoding_dim"] = encoding_dim;
    j["n_components"] = n_components;
    j["learning_rate"] = learning_rate;
    j["gamma"] = gammas();
    j["pca_components"] = pca_components;
    j["hidden_dims"] = hidden_dims;
    j["epochs"] = epochs;
    j["patience"] = patience;
    j["batch_size"] = batch_size;
    j["val_fraction"] = val_fraction;
    j["kl_samples"] = kl_samples;
    j["vae_samples"] = vae_samples;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    j["run_name"] = run_name;
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    RunConfig c;
    try {
        const auto j = json::parse(text);
        static const std::set<std::string> known{
            "dataset", "synth", "method", "variant", "scoring", "window_length", "beta", "alpha_d", "encoding_dim",
            "n_components", "learning_rate", "gamma", "pca_components", "hidden_dims", "epochs", "patience",
            "batch_size", "val_fraction", "kl_samples", "vae_samples", "seed", "output_dir", "run_name"};
        for (const auto& [key, value] : j.items()) {
            if (!known.count(key)) throw ConfigError("unknown run config key '" + key + "'");
        }
        c.dataset = j.value("dataset", c.dataset);
        if (j.contains("synth")) c.synth = synth::SynthConfig::from_json(j["synth"].dump());
        if (j.contains("method")) c.method = method_from_string(j["method"].get<std::string>());
        if (j.contains("variant")) c.variant = model::architecture_from_string(j["variant"].get<std::string>());
        if (j.contains("scoring")) c.scoring = strategy_from_string(j["scoring"].get<std::string>());
        c.window_length = j.value("window_length", c.window_length);
        c.beta = j.value("beta", c.beta);
        c.alpha_d = j.value("alpha_d", c.alpha_d);
        c.encoding_dim = j.value("encoding_dim", c.encoding_dim);
        c.n_components = j.value("n_components", c.n_components);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.gamma = j.value("gamma", c.gamma);
        c.pca_components = j.value("pca_components", c.pca_components);
        c.hidden_dims = j.value("hidden_dims", c.hidden_dims);
        c.epochs = j.value("epochs", c.epochs);
        c.patience = j.value("patience", c.patience);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.val_fraction = j.value("val_fraction", c.val_fraction);
        c.kl_samples = j.value("kl_samples", c.kl_samples);
        c.vae_samples = j.value("vae_samples", c.vae_samples);
        c.seed = j.value("seed", c.seed);
        c.output_dir = j.value("output_dir", c.output_dir);
        c.run_name = j.value("run_name", c.run_name);
    } catch (const json::exception& e) {
        throw FormatError(std::string("run config: ") + e.what());
    }
    c.validate();
    return c;
}

std::vector<GridPoint> grid_points(const RunConfig& c) {
    std::vector<GridPoint> out;
    switch (c.method) {
        case Method::DivadG:
        case Method::DivadGM: {
            const std::vector<int> ks = c.method == Method::DivadGM ? c.n_components : std::vector<int>{1};
            for (double b : c.beta) {
                for (double a : c.alpha_d) {
                    for (auto m : c.encoding_dim) {
                        for (int k : ks) {
                            GridPoint p;
                            p.beta = b;
                            p.alpha_d = a;
                            p.encoding_dim = m;
                            p.n_components = k;
                            out.push_back(p);
                        }
                    }
                }
            }
            break;
        }
        case Method::DenseAe:
        case Method::DenseVae:
            for (auto m : c.encoding_dim) {
                GridPoint p;
                p.encoding_dim = m;
                out.push_back(p);
            }
            break;
        case Method::Pca:
            for (double v : c.pca_components) {
                GridPoint p;
                p.pca_components = v;
                out.push_back(p);
            }
            break;
        case Method::Maha: out.emplace_back(); break;
    }
    return out;
}

std::string point_json(const RunConfig& c, const GridPoint& p) {
    json j;
    if (c.synth) j["synth"] = json::parse(c.synth->to_json());
    else j["dataset"] = c.dataset;
    j["method"] = to_string(c.method);
    j["window_length"] = c.window_length;
    j["seed"] = c.seed;
    j["val_fraction"] = c.val_fraction;
    j["gamma"] = c.gammas();
    json s = json::array();
    for (auto st : c.strategies()) s.push_back(to_string(st));
    j["strategies"] = s;
    switch (c.method) {
        case Method::DivadG:
        case Method::DivadGM:
            j["variant"] = model::to_string(c.variant);
            j["beta"] = p.beta;
            j["alpha_d"] = p.alpha_d;
            j["encoding_dim"] = p.encoding_dim;
            if (c.method == Method::DivadGM) j["n_components"] = p.n_components;
            j["kl_samples"] = c.kl_samples;
            [[fallthrough]];
        case Method::DenseAe:
        case Method::DenseVae:
            j["encoding_dim"] = p.encoding_dim;
            j["hidden_dims"] = c.hidden_dims;
            j["learning_rate"] = c.learning_rate;
            j["epochs"] = c.epochs;
            j["patience"] = c.patience;
            j["batch_size"] = c.batch_size;
            if (c.method == Method::DenseVae) j["vae_samples"] = c.vae_samples;
            break;
        case Method::Pca: j["pca_components"] = p.pca_components; break;
        case Method::Maha: break;
    }
    return j.dump();  // keys sorted by nlohmann::json
}

std::string stable_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

data::Dataset resolve_dataset(const RunConfig& c) {
    if (c.synth) return synth::generate(*c.synth).dataset;
    if (c.dataset.empty()) throw ConfigError("a dataset manifest or a synth config is required");
    return data::load_dataset(c.dataset);
}

// Data preparation

Prepared prepare(const RunConfig& c, const data::Dataset& dataset) {
    Prepared p;
    const auto train_seqs = dataset.with_role(data::Role::Train);
    for (const auto* s : dataset.with_role(data::Role::Test)) p.test_sequences.push_back(s->id);
    if (train_seqs.empty()) throw EmptyInputError("dataset has no training sequence");

    data::WindowSet all(c.window_length, dataset.n_features());
    for (const auto* s : train_seqs) {
        p.train_sequences.push_back(s->id);
        auto w = data::extract_normal_windows(*s, c.window_length);
        if (!w.empty()) all = data::WindowSet::concat(all, w);
    }
    if (all.empty()) throw EmptyInputError("no clean training window of length " + std::to_string(c.window_length));

    std::vector<std::size_t> train_idx(all.size()), val_idx;
    std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
    if (c.val_fraction > 0.0) std::tie(train_idx, val_idx) = data::train_val_split_indices(all, c.val_fraction, c.seed);
    const auto train_raw = all.subset(train_idx);
    p.standardizer = data::Standardizer::fit(train_raw);
    p.train = p.standardizer.apply(data::balance_by_domain(train_raw, c.seed + 1));
    p.val = p.standardizer.apply(all.subset(val_idx));
    p.normal = p.standardizer.apply(all);
    std::set<int> domains(train_raw.domain_ids().begin(), train_raw.domain_ids().end());
    p.domain_ids.assign(domains.begin(), domains.end());
    return p;
}

void audit_provenance(const Prepared& p, const data::Dataset& dataset) {
    std::set<std::string> test(p.test_sequences.begin(), p.test_sequences.end());
    for (const auto* s : dataset.with_role(data::Role::Test)) test.insert(s->id);
    for (const auto& id : p.train_sequences) {
        if (test.count(id)) throw ConfigError("provenance audit: sequence '" + id + "' is both training and test");
    }
    for (const auto* set : {&p.train, &p.val, &p.normal}) {
        for (const auto& id : set->sequence_ids()) {
            if (test.count(id)) throw ConfigError("provenance audit: window of test sequence '" + id + "' in the fit");
        }
    }
}

// Bundles

std::vector<Strategy> Bundle::strategies() const {
    if (method_ == Method::DivadG || method_ == Method::DivadGM) return {Strategy::Prior, Strategy::AggPosterior};
    return {Strategy::Prior};
}

std::unique_ptr<scoring::WindowScorer> Bundle::scorer(Strategy s) {
    const auto L = window_length_;
    switch (method_) {
        case Method::DivadG:
        case Method::DivadGM:
            if (s == Strategy::AggPosterior) return std::make_unique<scoring::AggPosteriorScorer>(divad_, agg_posterior_);
            return std::make_unique<scoring::PriorScorer>(divad_);
        case Method::Pca: return std::make_unique<baselines::PcaScorer>(*pca_, L);
        case Method::Maha: return std::make_unique<baselines::MahalanobisScorer>(*maha_, L);
        case Method::DenseAe: return std::make_unique<baselines::AutoencoderScorer>(*ae_, L);
        case Method::DenseVae: return std::make_unique<baselines::VaeScorer>(*vae_, L, vae_samples_);
    }
    throw StateError("bundle holds no model");
}

Bundle Bundle::load(const fs::path& dir) {
    Bundle b;
    const auto point = json::parse(read_text(dir / "point.json"));
    b.method_ = method_from_string(point.at("method").get<std::string>());
    b.window_length_ = point.at("window_length").get<Eigen::Index>();
    b.vae_samples_ = point.value("vae_samples", b.vae_samples_);
    b.standardizer_ = standardizer_from_json(read_text(dir / "standardizer.json"));
    switch (b.method_) {
        case Method::DivadG:
        case Method::DivadGM:
            b.divad_ = std::make_shared<model::DivadModel>(model::DivadModel::load(dir / "model.ckpt"));
            b.agg_posterior_ = density::DensityEstimate::from_json(read_text(dir / "agg_posterior.json"));
            break;
        case Method::Pca: b.pca_ = std::make_shared<baselines::PcaModel>(baselines::PcaModel::from_json(read_text(dir / "pca.json"))); break;
        case Method::Maha:
            b.maha_ = std::make_shared<baselines::MahalanobisModel>(baselines::MahalanobisModel::from_json(read_text(dir / "maha.json")));
            break;
        case Method::DenseAe: b.ae_ = std::make_shared<baselines::DenseAutoencoder>(baselines::DenseAutoencoder::load(dir / "model.ckpt")); break;
        case Method::DenseVae: b.vae_ = std::make_shared<baselines::DenseVae>(baselines::DenseVae::load(dir / "model.ckpt")); break;
    }
    return b;
}

Bundle train_point(const RunConfig& c, const GridPoint& p, const Prepared& prep, const fs::path& dir) {
    fs::create_directories(dir);
    Bundle b;
    b.method_ = c.method;
    b.window_length_ = c.window_length;
    b.vae_samples_ = c.vae_samples;
    b.standardizer_ = prep.standardizer;
    write_text(dir / "point.json", json::parse(point_json(c, p)).dump(2));
    write_text(dir / "standardizer.json", standardizer_json(prep.standardizer));
    write_text(dir / "provenance.json",
               json{{"train_sequences", prep.train_sequences},
                    {"test_sequences", prep.test_sequences},
                    {"train_windows", prep.train.size()},
                    {"val_windows", prep.val.size()}}
                   .dump(2));

    const Matrix train_x = prep.train.flattened();
    const Matrix val_x = prep.val.empty() ? Matrix(0, train_x.cols()) : prep.val.flattened();
    const auto options = fit_options(c);
    json training;

    switch (c.method) {
        case Method::DivadG:
        case Method::DivadGM: {
            model::DivadSpec spec;
            spec.architecture = c.variant;
            spec.window_length = c.window_length;
            spec.n_features = prep.train.n_features();
            spec.encoding_dim = p.encoding_dim;
            spec.domain_ids = prep.domain_ids;
            spec.prior = c.method == Method::DivadGM ? model::PriorKind::LearnedGM : model::PriorKind::FixedGaussian;
            spec.n_components = p.n_components;
            spec.hidden_dims = c.hidden_dims;
            const model::ObjectiveWeights w{p.beta, p.alpha_d};
            model::DivadModel probe(spec, c.seed);
            const auto train_d = domain_indices(probe, prep.train.domain_ids());
            const auto val_d = domain_indices(probe, prep.val.domain_ids());
            auto sel = train::select_learning_rate<DivadTrainee>(
                [&] { return std::make_unique<DivadTrainee>(spec, c.seed, w, c.kl_samples); }, c.learning_rate,
                train_x, train_d, val_x, val_d, options);
            b.divad_ = std::shared_ptr<model::DivadModel>(std::move(sel.model->model));
            b.divad_->save(dir / "model.ckpt");
            b.agg_posterior_ = b.divad_->fit_aggregated_posterior(train_x, c.seed);
            write_text(dir / "agg_posterior.json", b.agg_posterior_.to_json());
            sel.history.write_csv(dir / "history.csv");
            write_histories(dir, sel.candidates);
            training = history_summary(sel.history);
            break;
        }
        case Method::DenseAe:
        case Method::DenseVae: {
            baselines::AutoencoderSpec spec{train_x.cols(), c.hidden_dims, p.encoding_dim};
            train::History history;
            std::vector<train::History> candidates;
            if (c.method == Method::DenseAe) {
                auto sel = train::select_learning_rate<baselines::DenseAutoencoder>(
                    [&] { return std::make_unique<baselines::DenseAutoencoder>(spec, c.seed); }, c.learning_rate,
                    train_x, {}, val_x, {}, options);
                b.ae_ = std::shared_ptr<baselines::DenseAutoencoder>(std::move(sel.model));
                b.ae_->save(dir / "model.ckpt");
                history = std::move(sel.history);
                candidates = std::move(sel.candidates);
            } else {
                auto sel = train::select_learning_rate<baselines::DenseVae>(
                    [&] { return std::make_unique<baselines::DenseVae>(spec, c.seed); }, c.learning_rate, train_x, {},
                    val_x, {}, options);
                b.vae_ = std::shared_ptr<baselines::DenseVae>(std::move(sel.model));
                b.vae_->save(dir / "model.ckpt");
                history = std::move(sel.history);
                candidates = std::move(sel.candidates);
            }
            history.write_csv(dir / "history.csv");
            write_histories(dir, candidates);
            training = history_summary(history);
            break;
        }
        case Method::Pca: {
            baselines::PcaComponents n = p.pca_components >= 1.0
                                             ? baselines::PcaComponents{static_cast<Eigen::Index>(std::lround(p.pca_components))}
                                             : baselines::PcaComponents{p.pca_components};
            b.pca_ = std::make_shared<baselines::PcaModel>(baselines::PcaModel::fit(train_x, n));
            write_text(dir / "pca.json", b.pca_->to_json());
            training = {{"n_components", b.pca_->n_components()}};
            break;
        }
        case Method::Maha:
            b.maha_ = std::make_shared<baselines::MahalanobisModel>(baselines::MahalanobisModel::fit(train_x));
            write_text(dir / "maha.json", b.maha_->to_json());
            break;
    }
    if (training.is_null()) training = json::object();
    write_text(dir / "training.json", training.dump(2));
    json model_json{{"method", to_string(c.method)}, {"training", training}};
    if (b.divad_) model_json["spec"] = json::parse(b.divad_->spec().to_json());
    if (b.ae_) model_json["spec"] = json::parse(b.ae_->spec().to_json());
    if (b.vae_) model_json["spec"] = json::parse(b.vae_->spec().to_json());
    model_json["point"] = json::parse(point_json(c, p));
    write_text(dir / "model.json", model_json.dump(2));
    return b;
}

void score_point(Bundle& b, const Prepared& prep, const data::Dataset& dataset, const fs::path& dir) {
    const auto train_x = prep.normal.flattened();
    for (auto s : b.strategies()) {
        auto scorer = b.scorer(s);
        const auto out = scores_dir(dir, b.method(), s);
        fs::create_directories(out);
        const Eigen::VectorXd train_scores = scorer->score(train_x);
        std::ofstream tn(out / "train-normal.csv");
        tn << "score\n";
        for (Eigen::Index i = 0; i < train_scores.size(); ++i) tn << format_double(train_scores(i)) << '\n';

        for (const auto* seq : dataset.with_role(data::Role::Test)) {
            const auto standardized = b.standardizer().apply(*seq);
            const auto raw = scoring::window_scores(*scorer, standardized);
            const auto scores = scoring::OnlineScorer(*scorer, 0.0).from_window_scores(standardized, raw);
            scoring::write_scores_csv(out / (seq->id + ".csv"), scores);
        }
    }
}

const Evaluation* PointResult::best(std::optional<Strategy> s) const {
    const Evaluation* out = nullptr;
    for (const auto& e : evaluations) {
        if (s && e.strategy != *s) continue;
        if (out == nullptr || e.peak.f1 > out->peak.f1) out = &e;
    }
    return out;
}

PointResult evaluate_point(const RunConfig& c, const data::Dataset& dataset, const fs::path& dir) {
    PointResult r;
    r.directory = dir;
    const auto point = json::parse(read_text(dir / "point.json"));
    const Method method = method_from_string(point.at("method").get<std::string>());
    const auto L = point.at("window_length").get<Eigen::Index>();
    r.hash = dir.filename().string();
    r.point.beta = point.value("beta", r.point.beta);
    r.point.alpha_d = point.value("alpha_d", r.point.alpha_d);
    r.point.encoding_dim = point.value("encoding_dim", r.point.encoding_dim);
    r.point.n_components = point.value("n_components", r.point.n_components);
    r.point.pca_components = point.value("pca_components", r.point.pca_components);

    json metrics;
    metrics["point"] = point;
    metrics["evaluations"] = json::array();
    metrics["distributions"] = json::object();

    std::vector<Strategy> strategies;
    for (const auto& s : point.at("strategies")) strategies.push_back(strategy_from_string(s.get<std::string>()));

    for (auto strategy : strategies) {
        const auto label = scoring_label(method, strategy);
        const auto sdir = scores_dir(dir, method, strategy);
        std::vector<const data::Sequence*> test;
        std::vector<std::vector<double>> raw_windows;
        for (const auto* seq : dataset.with_role(data::Role::Test)) {
            if (!seq->has_labels()) continue;
            const auto scores = scoring::read_scores_csv(sdir / (seq->id + ".csv"));
            if (scores.size() != static_cast<std::size_t>(seq->length())) {
                throw FormatError("score file of '" + seq->id + "' does not match the sequence length");
            }
            test.push_back(seq);
            raw_windows.emplace_back(scores.raw.begin() + std::min<std::ptrdiff_t>(L - 1, static_cast<std::ptrdiff_t>(scores.raw.size())),
                                     scores.raw.end());
        }
        if (test.empty()) throw EmptyInputError("no labeled test sequence to evaluate");

        std::optional<eval::EvaluationReport> best_report;
        double best_gamma = 0.0;
        for (double g : c.gammas()) {
            std::vector<eval::LabeledScores> labeled;
            for (std::size_t i = 0; i < test.size(); ++i) {
                labeled.push_back({scoring::smooth(raw_windows[i], g, L), test[i]->labels});
            }
            auto report = eval::evaluate(labeled, L);
            json e = json::parse(eval::metrics_json(report, nullptr, json{{"scoring", label}, {"gamma", g}}.dump()));
            metrics["evaluations"].push_back(e);
            r.evaluations.push_back({strategy, g, report.peak});
            if (!best_report || report.peak.f1 > best_report->peak.f1) {
                best_report = std::move(report);
                best_gamma = g;
            }
        }
        eval::write_pr_curve_csv(dir / ("pr_curve_" + label + ".csv"), best_report->curve);

        std::vector<double> train_normal, test_normal, test_anomalous;
        {
            std::ifstream in(sdir / "train-normal.csv");
            if (!in) throw FormatError("missing train-normal scores in " + sdir.string());
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                if (!line.empty()) train_normal.push_back(std::stod(line));
            }
        }
        for (std::size_t i = 0; i < test.size(); ++i) {
            for (std::size_t k = 0; k < raw_windows[i].size(); ++k) {
                const auto t = k + static_cast<std::size_t>(L - 1);
                (test[i]->labels[t] == data::kNormalLabel ? test_normal : test_anomalous).push_back(raw_windows[i][k]);
            }
        }
        auto dist = eval::export_score_distributions(train_normal, test_normal, test_anomalous);
        eval::write_distributions_csv(dir / ("distributions_" + label + ".csv"), dist);
        eval::write_kde_csv(dir / ("kde_" + label + ".csv"), dist);
        metrics["distributions"][label] = {
            {"train_test_overlap", finite_or_text(dist.train_test_overlap)},
            {"normal_anomalous_overlap", finite_or_text(dist.normal_anomalous_overlap)},
            {"best_gamma", best_gamma},
        };
        r.distributions.emplace_back(strategy, std::move(dist));
    }
    const auto* best = r.best();
    const auto best_label = scoring_label(method, best->strategy);
    for (const char* stem : {"pr_curve", "distributions", "kde"}) {
        fs::copy_file(dir / (std::string(stem) + "_" + best_label + ".csv"), dir / (std::string(stem) + ".csv"),
                      fs::copy_options::overwrite_existing);
    }
    metrics["best"] = {{"scoring", best_label},
                       {"gamma", best->gamma},
                       {"peak_f1", best->peak.f1}};
    write_text(dir / "metrics.json", metrics.dump(2));
    r.completed = true;
    return r;
}

bool RunResult::all_completed() const {
    return std::all_of(points.begin(), points.end(), [](const PointResult& p) { return p.completed; });
}

RunResult run_experiment(const RunConfig& config) {
    config.validate();
    return run_experiment(config, resolve_dataset(config));
}

RunResult run_experiment(const RunConfig& c, const data::Dataset& dataset) {
    c.validate();
    RunResult result;
    result.directory = fs::path(c.output_dir) / (c.run_name.empty() ? timestamp_now() + "-" + to_string(c.method) : c.run_name);
    fs::create_directories(result.directory);
    write_text(result.directory / "config.json", c.to_json());

    const Prepared prep = prepare(c, dataset);
    audit_provenance(prep, dataset);

    for (const auto& p : grid_points(c)) {
        const auto hash = stable_hash(point_json(c, p));
        const auto dir = result.directory / hash;
        PointResult r;
        try {
            auto bundle = train_point(c, p, prep, dir);
            score_point(bundle, prep, dataset, dir);
            r = evaluate_point(c, dataset, dir);
        } catch (const std::exception& e) {
            r.completed = false;
            r.error = e.what();
            r.directory = dir;
            write_text(dir / "error.txt", r.error);
            warn("grid point " + hash + " failed: " + r.error);
        }
        r.hash = hash;
        r.point = p;
        result.points.push_back(std::move(r));
        write_summary(result.directory / "summary.csv", c.method, result.points);
    }
    return result;
}

void write_summary(const fs::path& path, Method method, const std::vector<PointResult>& points) {
    std::ofstream summary(path);
    if (!summary) throw FormatError("cannot write " + path.string());
    summary << "method,hash,beta,alpha_d,encoding_dim,n_components,pca_components,scoring,gamma,peak_f1,precision,recall,"
               "train_test_overlap,normal_anomalous_overlap,status\n";
    for (const auto& r : points) {
        const auto& p = r.point;
        const std::string prefix = to_string(method) + ',' + r.hash + ',' + format_double(p.beta) + ',' +
                                   format_double(p.alpha_d) + ',' + std::to_string(p.encoding_dim) + ',' +
                                   std::to_string(p.n_components) + ',' + format_double(p.pca_components) + ',';
        if (!r.completed) summary << prefix << ",,,,,,,failed\n";
        for (const auto& e : r.evaluations) {
            std::string tt, na;
            for (const auto& [s, d] : r.distributions) {
                if (s == e.strategy) {
                    tt = format_double(d.train_test_overlap);
                    na = format_double(d.normal_anomalous_overlap);
                }
            }
            summary << prefix << scoring_label(method, e.strategy) << ',' << format_double(e.gamma) << ','
                    << format_double(e.peak.f1) << ',' << format_double(e.peak.precision) << ','
                    << format_double(e.peak.recall) << ',' << tt << ',' << na << ",ok\n";
        }
    }
}

std::vector<LodoFold> run_lodo(const RunConfig& config, const data::Dataset& dataset) {
    config.validate();
    std::set<int> domain_set;
    for (const auto& s : dataset.sequences) domain_set.insert(s.domain_id);
    if (domain_set.size() < 2) throw ConfigError("leave-one-domain-out needs at least two domains");

    const fs::path root =
        fs::path(config.output_dir) / (config.run_name.empty() ? timestamp_now() + "-" + to_string(config.method) + "-lodo" : config.run_name);
    fs::create_directories(root);
    std::ofstream summary(root / "lodo_summary.csv");
    summary << "domain_id,status,hash,scoring,gamma,peak_f1,precision,recall\n";

    std::vector<LodoFold> folds;
    for (int d : domain_set) {
        LodoFold fold;
        fold.domain_id = d;
        const std::string name = "domain-" + std::to_string(d);
        data::Dataset fd;
        bool has_anomalies = false;
        for (auto s : dataset.sequences) {
            s.role = s.domain_id == d ? data::Role::Test : data::Role::Train;
            if (s.domain_id == d && s.has_anomalies()) has_anomalies = true;
            fd.sequences.push_back(std::move(s));
        }
        if (!has_anomalies) {
            warn("domain " + std::to_string(d) + " has no labeled anomaly; fold skipped");
            fold.skipped = true;
            write_text(root / name / "skipped.txt", "no labeled anomaly in held-out domain " + std::to_string(d));
            summary << d << ",skipped,,,,,,\n";
            folds.push_back(std::move(fold));
            continue;
        }
        RunConfig fc = config;
        fc.output_dir = root.string();
        fc.run_name = name;
        fold.run = run_experiment(fc, fd);
        const PointResult* best_point = nullptr;
        const Evaluation* best = nullptr;
        for (const auto& p : fold.run.points) {
            const auto* e = p.best();
            if (e != nullptr && (best == nullptr || e->peak.f1 > best->peak.f1)) {
                best = e;
                best_point = &p;
            }
        }
        if (best == nullptr) {
            summary << d << ",failed,,,,,,\n";
        } else {
            summary << d << ",ok," << best_point->hash << ',' << scoring_label(config.method, best->strategy) << ','
                    << format_double(best->gamma) << ',' << format_double(best->peak.f1) << ','
                    << format_double(best->peak.precision) << ',' << format_double(best->peak.recall) << '\n';
        }
        folds.push_back(std::move(fold));
    }
    return folds;
}

std::string report(const fs::path& runs_root) {
    struct Row {
        std::string run, method, scoring, hash, gamma;
        double f1 = -1.0;
    };
    std::vector<Row> rows;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(runs_root)) {
        if (entry.is_regular_file() && entry.path().filename() == "summary.csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream in(file);
        std::string line;
        std::getline(in, line);
        const auto header = split_csv_line(line);
        auto col = [&](const char* name) {
            const auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end()) throw FormatError(file.string() + ": missing column " + name);
            return static_cast<std::size_t>(it - header.begin());
        };
        const auto c_method = col("method"), c_scoring = col("scoring"), c_hash = col("hash"), c_gamma = col("gamma"),
                   c_f1 = col("peak_f1"), c_status = col("status");
        std::map<std::string, Row> best;
        while (std::getline(in, line)) {
            const auto cells = split_csv_line(line);
            if (cells.size() != header.size() || cells[c_status] != "ok") continue;
            const double f1 = std::stod(cells[c_f1]);
            auto& b = best[cells[c_scoring]];
            if (f1 > b.f1) {
                b = {fs::relative(file.parent_path(), runs_root).string(), cells[c_method], cells[c_scoring],
                     cells[c_hash], cells[c_gamma], f1};
            }
        }
        for (auto& [k, r] : best) rows.push_back(r);
    }
    std::ostringstream out;
    out << "| run | method | scoring | best peak F1 | gamma | grid point |\n";
    out << "|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        out << "| " << r.run << " | " << r.method << " | " << r.scoring << " | " << std::fixed << std::setprecision(4)
            << r.f1 << " | " << r.gamma << " | " << r.hash << " |\n";
    }
    return out.str();
}

}  // namespace divad::experiment
