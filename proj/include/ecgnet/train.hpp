#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgnet/imbalance.hpp"
#include "ecgnet/metrics.hpp"
#include "ecgnet/model.hpp"

namespace ecgnet {

struct TrainConfig {
    double lr = 5e-4;
    double weight_decay = 1e-4;
    std::size_t patience = 10;
    std::size_t max_epochs = 100;
    std::size_t batch_size = 16;
    double split_ratio = 0.8;
    std::uint64_t seed = 0;
    std::size_t adasyn_k = 5;
    double adasyn_beta = 1.0;

    void validate() const {
        if (!(lr > 0.0)) throw UsageError("train: lr must be > 0");
        if (patience < 1) throw UsageError("train: patience must be >= 1");
        if (max_epochs < 1) throw UsageError("train: max_epochs must be >= 1");
        if (batch_size < 1) throw UsageError("train: batch_size must be >= 1");
        if (!(split_ratio > 0.0 && split_ratio < 1.0))
            throw UsageError("train: split_ratio must be in (0,1)");
    }
};

/// Overflow-safe binary cross entropy with logits:
///   max(z,0) - z*y + log(1 + exp(-|z|))
inline double stable_binary_cross_entropy(double logit, double target) {
    if (!std::isfinite(logit)) throw NumericError("bce: non-finite logit");
    if (!(target >= 0.0 && target <= 1.0)) throw UsageError("bce: target outside [0,1]");
    return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

inline double bce_grad(double logit, double target) { return sigmoid(logit) - target; }

struct AdamState {
    std::vector<std::vector<double>> m, v;
    long step = 0;

    void reset(const std::vector<Param*>& params) {
        m.clear();
        v.clear();
        for (const Param* p : params) {
            m.emplace_back(p->count(), 0.0);
            v.emplace_back(p->count(), 0.0);
        }
        step = 0;
    }
};

/// One Adam step (beta1 0.9, beta2 0.999, eps 1e-8) with classic coupled
/// weight decay added to the gradients.
inline void adam_update(std::vector<Param*>& params, AdamState& state, const TrainConfig& cfg) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (state.m.size() != params.size()) state.reset(params);
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param& p = *params[pi];
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        for (std::size_t i = 0; i < p.count(); ++i) {
            double g = p.grad[i];
            if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient");
            g += cfg.weight_decay * p.value[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            p.value[i] -= cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
}

struct HistoryEntry {
    std::size_t dataset = 0;
    std::size_t epoch = 0;
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct History {
    std::vector<HistoryEntry> entries;

    std::string to_jsonl() const {
        std::string out;
        for (const auto& e : entries) {
            nlohmann::json j{{"dataset", e.dataset},
                             {"epoch", e.epoch},
                             {"split", e.split},
                             {"loss", e.loss},
                             {"accuracy", e.accuracy}};
            out += j.dump();
            out += '\n';
        }
        return out;
    }
};

namespace detail {

inline Tensor3 batch_tensor(const LabeledSet& set, const std::vector<std::size_t>& idx,
                            std::size_t lo, std::size_t hi, const ModelConfig& cfg) {
    const std::size_t n = hi - lo;
    Tensor3 x(n, cfg.n_channels, cfg.input_len);
    for (std::size_t b = 0; b < n; ++b) {
        const auto& vec = set.vectors[idx[lo + b]];
        if (vec.size() != cfg.n_channels * cfg.input_len)
            throw DataError("train: vector dimension does not match model input shape");
        std::copy(vec.begin(), vec.end(), x.v.begin() + static_cast<long>(b * vec.size()));
    }
    return x;
}

/// Two-stage prediction: gate at sigmoid(binary) > 0.5, then disease argmax.
inline int predicted_label(double binary_logit, const std::array<double, 5>& multi) {
    if (binary_logit <= 0.0) return 0;
    std::size_t best = 0;
    for (std::size_t k = 1; k < 5; ++k)
        if (multi[k] > multi[best]) best = k;
    return static_cast<int>(best) + 1;
}

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

inline double sample_loss_and_grads(const ModelOutput& out, const std::vector<int>& labels,
                                    std::vector<double>* dbin,
                                    std::vector<std::array<double, 5>>* dmulti) {
    const std::size_t n = labels.size();
    double loss = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        const double y_bin = labels[b] > 0 ? 1.0 : 0.0;
        loss += stable_binary_cross_entropy(out.binary[b], y_bin);
        if (dbin) (*dbin)[b] = bce_grad(out.binary[b], y_bin) / static_cast<double>(n);
        if (labels[b] > 0) {
            for (std::size_t k = 0; k < 5; ++k) {
                const double t = (static_cast<int>(k) == labels[b] - 1) ? 1.0 : 0.0;
                loss += stable_binary_cross_entropy(out.multi[b][k], t) / 5.0;
                if (dmulti)
                    (*dmulti)[b][k] = bce_grad(out.multi[b][k], t) / (5.0 * static_cast<double>(n));
            }
        } else if (dmulti) {
            (*dmulti)[b].fill(0.0);
        }
    }
    return loss / static_cast<double>(n);
}

inline EvalResult evaluate(Model& model, const LabeledSet& set,
                           const std::vector<std::size_t>& idx, const TrainConfig& cfg) {
    EvalResult res;
    if (idx.empty()) return res;
    std::size_t correct = 0;
    double loss_sum = 0.0;
    for (std::size_t lo = 0; lo < idx.size(); lo += cfg.batch_size) {
        const std::size_t hi = std::min(idx.size(), lo + cfg.batch_size);
        const Tensor3 x = batch_tensor(set, idx, lo, hi, model.config());
        const ModelOutput out = model.forward(x, Mode::Eval);
        std::vector<int> labels(hi - lo);
        for (std::size_t b = 0; b < labels.size(); ++b) labels[b] = set.labels[idx[lo + b]];
        loss_sum += sample_loss_and_grads(out, labels, nullptr, nullptr) *
                    static_cast<double>(hi - lo);
        for (std::size_t b = 0; b < labels.size(); ++b)
            correct += (predicted_label(out.binary[b], out.multi[b]) == labels[b]);
    }
    res.loss = loss_sum / static_cast<double>(idx.size());
    res.accuracy = static_cast<double>(correct) / static_cast<double>(idx.size());
    return res;
}

/// Snapshot of trainable values plus BN running statistics.
struct ModelSnapshot {
    std::vector<std::vector<double>> values;
    std::vector<std::vector<double>> buffers;
};

inline ModelSnapshot snapshot_model(Model& model) {
    ModelSnapshot snap;
    for (Param* p : model.params()) snap.values.push_back(p->value);
    for (auto* b : model.buffers()) snap.buffers.push_back(*b);
    return snap;
}

inline void restore_model(Model& model, const ModelSnapshot& snap) {
    auto params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap.values[i];
    auto bufs = model.buffers();
    for (std::size_t i = 0; i < bufs.size(); ++i) *bufs[i] = snap.buffers[i];
}

} // namespace detail

/// Train on each dataset in order: seeded 80:20 split, ADASYN on the training
/// split only, epoch loop with early stopping on validation accuracy
/// (maximize, strict improvement, patience consecutive misses), best-epoch
/// weights restored before moving to the next dataset.
inline History train_sequential(const std::vector<LabeledSet>& datasets, Model& model,
                                const TrainConfig& cfg) {
    cfg.validate();
    if (datasets.empty()) throw UsageError("train: need at least one dataset");
    History history;
    AdamState adam;
    auto params = model.params();
    adam.reset(params);

    for (std::size_t di = 0; di < datasets.size(); ++di) {
        const LabeledSet& raw = datasets[di];
        raw.validate();
        std::mt19937_64 rng(cfg.seed * 1000003ULL + di);
        std::vector<std::size_t> order(raw.vectors.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng() % i]);

        const std::size_t n_train =
            static_cast<std::size_t>(std::llround(cfg.split_ratio * static_cast<double>(order.size())));
        if (n_train == 0 || n_train == order.size())
            throw DataError("train: dataset too small to split");
        LabeledSet train_set;
        train_set.seed = cfg.seed * 7919ULL + di;
        for (std::size_t i = 0; i < n_train; ++i) {
            train_set.vectors.push_back(raw.vectors[order[i]]);
            train_set.labels.push_back(raw.labels[order[i]]);
        }
        std::vector<std::size_t> val_idx(order.begin() + static_cast<long>(n_train), order.end());
        {
            bool has0 = false, has1 = false;
            for (std::size_t i : val_idx) (raw.labels[i] > 0 ? has1 : has0) = true;
            for (int l : train_set.labels) (l > 0 ? has1 : has0) = true;
            if (!has0 || !has1)
                throw DataError("train: split does not contain both classes");
        }
        const LabeledSet balanced = adasyn_augment(train_set, cfg.adasyn_k, cfg.adasyn_beta);

        std::vector<std::size_t> train_idx(balanced.vectors.size());
        std::iota(train_idx.begin(), train_idx.end(), 0);

        double best_acc = -1.0;
        auto best = detail::snapshot_model(model);
        std::size_t since_improve = 0;

        for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
            for (std::size_t i = train_idx.size(); i > 1; --i)
                std::swap(train_idx[i - 1], train_idx[rng() % i]);
            double loss_sum = 0.0;
            std::size_t correct = 0;
            for (std::size_t lo = 0; lo < train_idx.size(); lo += cfg.batch_size) {
                const std::size_t hi = std::min(train_idx.size(), lo + cfg.batch_size);
                const Tensor3 x = detail::batch_tensor(balanced, train_idx, lo, hi, model.config());
                model.zero_grads();
                const ModelOutput out = model.forward(x, Mode::Train);
                std::vector<int> labels(hi - lo);
                for (std::size_t b = 0; b < labels.size(); ++b)
                    labels[b] = balanced.labels[train_idx[lo + b]];
                std::vector<double> dbin(labels.size(), 0.0);
                std::vector<std::array<double, 5>> dmulti(labels.size());
                const double loss = detail::sample_loss_and_grads(out, labels, &dbin, &dmulti);
                if (!std::isfinite(loss)) throw NumericError("train: non-finite loss");
                loss_sum += loss * static_cast<double>(labels.size());
                for (std::size_t b = 0; b < labels.size(); ++b)
                    correct += (detail::predicted_label(out.binary[b], out.multi[b]) == labels[b]);
                model.backward(dbin, dmulti);
                adam_update(params, adam, cfg);
            }
            history.entries.push_back({di, epoch, "train",
                                       loss_sum / static_cast<double>(train_idx.size()),
                                       static_cast<double>(correct) /
                                           static_cast<double>(train_idx.size())});
            const auto val = detail::evaluate(model, raw, val_idx, cfg);
            history.entries.push_back({di, epoch, "val", val.loss, val.accuracy});

            if (val.accuracy > best_acc) {
                best_acc = val.accuracy;
                best = detail::snapshot_model(model);
                since_improve = 0;
            } else if (++since_improve >= cfg.patience) {
                break;
            }
        }
        detail::restore_model(model, best);
    }
    return history;
}

} // namespace ecgnet
