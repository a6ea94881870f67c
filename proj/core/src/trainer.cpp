#include "divad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <span>

#include "divad/checkpoint.hpp"
#include "divad/error.hpp"
#include "divad/format.hpp"

namespace divad::train {
namespace {

constexpr Eigen::Index kValidationChunk = 1024;

std::vector<int> gather(const std::vector<int>& labels, std::span<const std::size_t> idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(labels.empty() ? 0 : labels[i]);
    return out;
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
    return out;
}

}  // namespace

double validation_loss(Trainable& model, const Matrix& x, const std::vector<int>& labels, std::uint64_t seed,
                       std::vector<std::pair<std::string, double>>* components) {
    if (x.rows() == 0) throw EmptyInputError("validation set is empty");
    nn::Rng noise(seed);
    double total = 0.0;
    std::vector<std::pair<std::string, double>> sums;
    for (Eigen::Index start = 0; start < x.rows(); start += kValidationChunk) {
        const Eigen::Index n = std::min(kValidationChunk, x.rows() - start);
        std::vector<int> chunk_labels;
        if (!labels.empty()) chunk_labels.assign(labels.begin() + start, labels.begin() + start + n);
        else chunk_labels.assign(static_cast<std::size_t>(n), 0);
        Tape tape(false);
        auto out = model.loss(tape, x.middleRows(start, n), chunk_labels, noise);
        const double w = static_cast<double>(n);
        total += w * out.total.value()(0, 0);
        if (sums.empty()) {
            for (auto& [name, v] : out.components) sums.emplace_back(name, 0.0);
        }
        for (std::size_t i = 0; i < out.components.size(); ++i) sums[i].second += w * out.components[i].second;
    }
    const double n = static_cast<double>(x.rows());
    if (components != nullptr) {
        for (auto& [name, v] : sums) v /= n;
        *components = std::move(sums);
    }
    return total / n;
}

History fit(Trainable& model, const Matrix& train_x, const std::vector<int>& train_labels, const Matrix& val_x,
            const std::vector<int>& val_labels, const FitOptions& options) {
    if (train_x.rows() == 0) throw EmptyInputError("training set is empty");
    if (options.batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (options.epochs < 1) throw ConfigError("epochs must be at least 1");
    if (options.patience < 0) throw ConfigError("patience must be nonnegative");

    auto params = model.parameters();
    nn::AdamW optimizer(options.optimizer);
    std::seed_seq seq{options.seed, std::uint64_t{0x5eed}};
    nn::Rng shuffle_rng(seq);
    nn::Rng noise_rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
    const std::uint64_t val_seed = options.seed ^ 0xd1b54a32d192ed03ULL;

    History history;
    history.learning_rate = options.optimizer.learning_rate;
    auto best_values = nn::snapshot(params);

    std::vector<std::size_t> order(static_cast<std::size_t>(train_x.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    int since_best = 0;
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double train_sum = 0.0;
        EpochRecord record;
        record.epoch = epoch;
        try {
            for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
                const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(options.batch_size), order.size() - start);
                std::span<const std::size_t> idx(order.data() + start, n);
                const Matrix xb = gather_rows(train_x, idx);
                const auto lb = gather(train_labels, idx);
                for (auto* p : params) p->zero_grad();
                Tape tape;
                auto out = model.loss(tape, xb, lb, noise_rng);
                const double value = out.total.value()(0, 0);
                if (!std::isfinite(value)) throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch));
                tape.backward(out.total);
                optimizer.step(params);
                train_sum += value * static_cast<double>(n);
            }
            record.train_loss = train_sum / static_cast<double>(order.size());
            record.val_loss = validation_loss(model, val_x.rows() > 0 ? val_x : train_x,
                                              val_x.rows() > 0 ? val_labels : train_labels, val_seed,
                                              &record.val_components);
            if (!std::isfinite(record.val_loss)) {
                throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
            }
        } catch (const DivergenceError& e) {
            history.diverged = true;
            history.message = e.what();
            nn::restore(best_values, params);
            warn(std::string("training diverged (") + e.what() + "); restored epoch " +
                 std::to_string(history.best_epoch) + " parameters");
            return history;
        }
        history.epochs.push_back(record);
        if (record.val_loss < history.best_val_loss) {
            history.best_val_loss = record.val_loss;
            history.best_epoch = epoch;
            best_values = nn::snapshot(params);
            since_best = 0;
        } else if (++since_best >= options.patience) {
            break;
        }
    }
    nn::restore(best_values, params);
    return history;
}

void History::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "epoch,train_loss,val_loss";
    if (!epochs.empty()) {
        for (auto& [name, v] : epochs.front().val_components) out << ",val_" << name;
    }
    out << "\n";
    for (const auto& e : epochs) {
        out << e.epoch << "," << format_double(e.train_loss) << "," << format_double(e.val_loss);
        for (auto& [name, v] : e.val_components) out << "," << format_double(v);
        out << "\n";
    }
}

}  // namespace divad::train
