// divad: generate synthetic datasets, train, score and evaluate detectors,
// run grid sweeps and leave-one-domain-out experiments.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "divad/dataset_io.hpp"
#include "divad/error.hpp"
#include "divad/experiment.hpp"
#include "divad/synthgen.hpp"

namespace fs = std::filesystem;
namespace ex = divad::experiment;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw divad::FormatError("cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

/// Flags mirroring RunConfig; only the ones given on the command line
/// override the config file.
struct RunFlags {
    std::string config_file;
    std::string dataset;
    std::string synth_file;
    std::string method;
    std::string variant;
    std::string scoring;
    Eigen::Index window_length = 1;
    std::vector<double> beta, alpha_d, learning_rate, gamma, pca_components;
    std::vector<Eigen::Index> encoding_dim, hidden_dims;
    std::vector<int> n_components;
    int epochs = 0, patience = 0, kl_samples = 0, vae_samples = 0;
    Eigen::Index batch_size = 0;
    double val_fraction = 0.0;
    std::uint64_t seed = 0;
    std::string output_dir;
    std::string run_name;

    std::vector<std::pair<std::string, CLI::Option*>> options;

    void attach(CLI::App* app, bool seed_required) {
        auto add = [&](const std::string& name, auto& target, const std::string& help) {
            options.emplace_back(name, app->add_option(name, target, help));
            return options.back().second;
        };
        add("--config", config_file, "run configuration (JSON); flags override its values")->check(CLI::ExistingFile);
        add("--dataset", dataset, "dataset manifest");
        add("--synth", synth_file, "synthetic dataset configuration (JSON) generated on the fly")->check(CLI::ExistingFile);
        add("--method", method, "divad-g | divad-gm | pca | maha | dense-ae | dense-vae");
        add("--variant", variant, "dense | recurrent (DIVAD only)");
        add("--scoring", scoring, "prior | agg-posterior | both (DIVAD only)");
        add("--window-length", window_length, "window length L");
        add("--beta", beta, "KL weight grid");
        add("--alpha-d", alpha_d, "domain classification weight grid");
        add("--encoding-dim", encoding_dim, "latent dimension grid");
        add("--n-components", n_components, "mixture prior component grid (divad-gm)");
        add("--lr", learning_rate, "learning rates, selected by validation loss");
        add("--gamma", gamma, "smoothing factors (default: 12-value grid)");
        add("--pca-components", pca_components, "PCA component counts (>= 1) or variance fractions (< 1)");
        add("--hidden", hidden_dims, "hidden layer widths");
        add("--epochs", epochs, "maximum epochs");
        add("--patience", patience, "early-stopping patience");
        add("--batch-size", batch_size, "mini-batch size");
        add("--val-fraction", val_fraction, "fraction of windows held out for validation");
        add("--kl-samples", kl_samples, "samples of the mixture-prior KL estimate");
        add("--vae-samples", vae_samples, "samples of the VAE reconstruction score");
        auto* s = add("--seed", seed, "random seed");
        if (seed_required) s->required();
        add("--output-dir", output_dir, "root directory of runs");
        add("--run-name", run_name, "run directory name (default: <timestamp>-<method>)");
    }

    [[nodiscard]] bool given(const std::string& name) const {
        for (const auto& [n, opt] : options) {
            if (n == name) return opt->count() > 0;
        }
        return false;
    }

    [[nodiscard]] ex::RunConfig build() const {
        ex::RunConfig c;
        if (!config_file.empty()) {
            auto j = nlohmann::json::parse(read_file(config_file));
            if (given("--dataset") || given("--synth")) {
                j.erase("dataset");
                j.erase("synth");
                j["dataset"] = "-";  // placeholder until overridden below
            }
            c = ex::RunConfig::from_json(j.dump());
        }
        if (given("--dataset")) {
            c.dataset = dataset;
            c.synth.reset();
        }
        if (given("--synth")) {
            c.synth = divad::synth::SynthConfig::from_json(read_file(synth_file));
            c.dataset.clear();
        }
        if (given("--method")) c.method = ex::method_from_string(method);
        if (given("--variant")) c.variant = divad::model::architecture_from_string(variant);
        if (given("--scoring")) c.scoring = ex::strategy_from_string(scoring);
        if (given("--window-length")) c.window_length = window_length;
        if (given("--beta")) c.beta = beta;
        if (given("--alpha-d")) c.alpha_d = alpha_d;
        if (given("--encoding-dim")) c.encoding_dim = encoding_dim;
        if (given("--n-components")) c.n_components = n_components;
        if (given("--lr")) c.learning_rate = learning_rate;
        if (given("--gamma")) c.gamma = gamma;
        if (given("--pca-components")) c.pca_components = pca_components;
        if (given("--hidden")) c.hidden_dims = hidden_dims;
        if (given("--epochs")) c.epochs = epochs;
        if (given("--patience")) c.patience = patience;
        if (given("--batch-size")) c.batch_size = batch_size;
        if (given("--val-fraction")) c.val_fraction = val_fraction;
        if (given("--kl-samples")) c.kl_samples = kl_samples;
        if (given("--vae-samples")) c.vae_samples = vae_samples;
        if (given("--seed")) c.seed = seed;
        if (given("--output-dir")) c.output_dir = output_dir;
        if (given("--run-name")) c.run_name = run_name;
        c.validate();
        return c;
    }
};

int report_points(const ex::RunResult& run, ex::Method method) {
    int failed = 0;
    for (const auto& p : run.points) {
        if (!p.completed) {
            ++failed;
            std::cerr << "failed " << p.hash << ": " << p.error << '\n';
            continue;
        }
        const auto* best = p.best();
        std::cout << p.hash << "  best peak F1 " << best->peak.f1 << " (" << ex::scoring_label(method, best->strategy)
                  << ", gamma " << best->gamma << ")\n";
    }
    std::cout << run.directory.string() << '\n';
    return failed == 0 ? 0 : 1;
}

ex::RunConfig run_config_of(const fs::path& run_dir) { return ex::RunConfig::from_json(read_file(run_dir / "config.json")); }

std::vector<fs::path> point_dirs(const fs::path& run_dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(run_dir)) {
        if (e.is_directory() && fs::exists(e.path() / "point.json")) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Domain-invariant VAE anomaly detection experiments"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic multi-domain dataset");
    std::string gen_config, gen_out = "data/synth";
    std::uint64_t gen_seed = 0;
    gen->add_option("--config", gen_config, "generator configuration (JSON)")->check(CLI::ExistingFile);
    gen->add_option("--seed", gen_seed, "random seed")->required();
    gen->add_option("--out", gen_out, "output directory");

    // train / sweep / lodo share the run flags
    RunFlags train_flags, sweep_flags, lodo_flags;
    auto* train = app.add_subcommand("train", "fit every grid point and write model bundles (no scoring)");
    train_flags.attach(train, true);
    auto* sweep = app.add_subcommand("sweep", "train, score and evaluate every grid point");
    sweep_flags.attach(sweep, false);
    auto* lodo = app.add_subcommand("lodo", "leave-one-domain-out over every domain of the dataset");
    lodo_flags.attach(lodo, false);

    auto* score = app.add_subcommand("score", "score the test sequences with every bundle of a run");
    std::string score_run;
    score->add_option("run", score_run, "run directory written by train")->required()->check(CLI::ExistingDirectory);

    auto* evaluate = app.add_subcommand("evaluate", "evaluate the scores of every grid point of a run");
    std::string eval_run;
    evaluate->add_option("run", eval_run, "run directory")->required()->check(CLI::ExistingDirectory);

    auto* report = app.add_subcommand("report", "tabulate the best peak F1 of every run");
    std::string report_root = "runs";
    report->add_option("root", report_root, "directory holding runs")->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            divad::synth::SynthConfig cfg;
            if (!gen_config.empty()) cfg = divad::synth::SynthConfig::from_json(read_file(gen_config));
            cfg.seed = gen_seed;
            const auto generated = divad::synth::generate(cfg);
            const auto manifest = divad::data::save_dataset(gen_out, generated.dataset);
            std::ofstream(fs::path(gen_out) / "generator.json") << cfg.to_json() << '\n';
            std::ofstream(fs::path(gen_out) / "summary.json") << divad::synth::describe(generated.dataset).to_json() << '\n';
            std::cout << manifest.string() << '\n';
            return 0;
        }
        if (*train) {
            const auto c = train_flags.build();
            const auto dataset = ex::resolve_dataset(c);
            const auto prep = ex::prepare(c, dataset);
            ex::audit_provenance(prep, dataset);
            const fs::path dir = fs::path(c.output_dir) / (c.run_name.empty() ? ex::to_string(c.method) : c.run_name);
            fs::create_directories(dir);
            std::ofstream(dir / "config.json") << c.to_json() << '\n';
            int failed = 0;
            for (const auto& p : ex::grid_points(c)) {
                const auto hash = ex::stable_hash(ex::point_json(c, p));
                try {
                    ex::train_point(c, p, prep, dir / hash);
                    std::cout << "trained " << hash << '\n';
                } catch (const divad::Error& e) {
                    ++failed;
                    std::cerr << "failed " << hash << ": " << e.what() << '\n';
                }
            }
            std::cout << dir.string() << '\n';
            return failed == 0 ? 0 : 1;
        }
        if (*score) {
            const auto c = run_config_of(score_run);
            const auto dataset = ex::resolve_dataset(c);
            const auto prep = ex::prepare(c, dataset);
            ex::audit_provenance(prep, dataset);
            for (const auto& dir : point_dirs(score_run)) {
                auto bundle = ex::Bundle::load(dir);
                ex::score_point(bundle, prep, dataset, dir);
                std::cout << "scored " << dir.filename().string() << '\n';
            }
            return 0;
        }
        if (*evaluate) {
            const auto c = run_config_of(eval_run);
            const auto dataset = ex::resolve_dataset(c);
            ex::RunResult run;
            run.directory = eval_run;
            for (const auto& dir : point_dirs(eval_run)) {
                try {
                    run.points.push_back(ex::evaluate_point(c, dataset, dir));
                } catch (const divad::Error& e) {
                    ex::PointResult failed;
                    failed.hash = dir.filename().string();
                    failed.error = e.what();
                    run.points.push_back(failed);
                }
            }
            ex::write_summary(fs::path(eval_run) / "summary.csv", c.method, run.points);
            return report_points(run, c.method);
        }
        if (*sweep) {
            const auto c = sweep_flags.build();
            return report_points(ex::run_experiment(c), c.method);
        }
        if (*lodo) {
            const auto c = lodo_flags.build();
            const auto folds = ex::run_lodo(c, ex::resolve_dataset(c));
            int status = 0;
            for (const auto& f : folds) {
                if (f.skipped) {
                    std::cout << "domain " << f.domain_id << ": skipped\n";
                    continue;
                }
                std::cout << "domain " << f.domain_id << ":\n";
                status |= report_points(f.run, c.method);
            }
            return status;
        }
        if (*report) {
            std::cout << ex::report(report_root);
            return 0;
        }
    } catch (const divad::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
