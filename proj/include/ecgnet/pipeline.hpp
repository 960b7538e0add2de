#pragma once

#include <string>
#include <vector>

#include "ecgnet/metrics.hpp"
#include "ecgnet/model.hpp"
#include "ecgnet/symbolic.hpp"
#include "ecgnet/synth.hpp"
#include "ecgnet/train.hpp"

namespace ecgnet {

/// Canonicalize then min-max normalize.
inline EcgRecord preprocess_record(const EcgRecord& rec) {
    return normalize_minmax(canonicalize(rec));
}

/// Denoise every channel in place (canonical record expected).
inline EcgRecord denoise_record(const EcgRecord& rec,
                                const WaveletConfig& cfg = WaveletConfig::pipeline_default()) {
    EcgRecord out = rec;
    const Db4Filters filters;
    for (auto& ch : out.channels) ch = denoise(ch, cfg, filters, rec.rate);
    return out;
}

/// The network input for one record: canonicalize, normalize, denoise.
inline Tensor3 record_to_tensor(const EcgRecord& rec) {
    const EcgRecord prepared = denoise_record(preprocess_record(rec));
    Tensor3 x(1, prepared.n_channels(), prepared.length());
    for (std::size_t c = 0; c < prepared.n_channels(); ++c)
        std::copy(prepared.channels[c].begin(), prepared.channels[c].end(), x.row(0, c));
    return x;
}

/// Flattened (channel-major) feature vector for dataset building.
inline std::vector<double> featurize_record(const EcgRecord& rec) {
    const Tensor3 x = record_to_tensor(rec);
    return x.v;
}

inline int label_to_int(ClassTag tag) { return static_cast<int>(tag); }

/// Full inference path: preprocess -> network gate -> symbolic findings and
/// rule probabilities -> assembled report. Findings come from the canonical
/// millivolt record, independent of the normalized network input.
inline DiagnosisReport predict_end_to_end(const EcgRecord& rec, Model& model,
                                          std::size_t lead = 0) {
    const EcgRecord canonical = canonicalize(rec);
    const Tensor3 x = record_to_tensor(rec);
    const ModelOutput out = model.forward(x, Mode::Eval);
    const bool abnormal = out.binary[0] > 0.0;

    std::optional<ClinicalFindings> findings;
    std::optional<DiseaseProbabilities> probs;
    try {
        findings = extract_findings(canonical, lead);
        probs = disease_probabilities(*findings);
    } catch (const DataError&) {
        if (abnormal) throw; // an abnormal call needs measurable findings
    }
    return build_report(abnormal, findings, probs);
}

/// LabeledSet JSON: {"shape": [channels, length], "vectors": [...],
/// "labels": [...], "seed": n}
inline nlohmann::json labeled_set_to_json(const LabeledSet& s, std::size_t channels,
                                          std::size_t length) {
    nlohmann::json j;
    j["shape"] = {channels, length};
    j["vectors"] = s.vectors;
    j["labels"] = s.labels;
    j["seed"] = s.seed;
    return j;
}

struct LoadedSet {
    LabeledSet set;
    std::size_t channels = 1;
    std::size_t length = 0;
};

inline LoadedSet labeled_set_from_json(const nlohmann::json& j) {
    LoadedSet out;
    try {
        j.at("vectors").get_to(out.set.vectors);
        j.at("labels").get_to(out.set.labels);
        if (j.contains("seed")) out.set.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("shape")) {
            const auto shape = j.at("shape").get<std::vector<std::size_t>>();
            if (shape.size() != 2) throw DataError("dataset: shape must be [channels, length]");
            out.channels = shape[0];
            out.length = shape[1];
        } else if (!out.set.vectors.empty()) {
            out.length = out.set.vectors.front().size();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("dataset: ") + e.what());
    }
    out.set.validate();
    if (out.channels * out.length != out.set.dim())
        throw DataError("dataset: shape does not match vector dimension");
    return out;
}

struct AblationRow {
    AblationFlags flags;
    bool reference = false;
    std::map<std::string, std::size_t> param_counts;
    Metrics metrics;
};

/// The eight module combinations of the ablation study, full configuration
/// last.
inline std::vector<AblationFlags> default_ablation_combos() {
    auto mk = [](bool e, bool m, bool d, bool c, bool g, bool t) {
        AblationFlags f;
        f.exblock = e; f.morlet = m; f.db4 = d; f.cbam = c; f.gat = g; f.tst = t;
        return f;
    };
    return {mk(1, 1, 1, 1, 0, 0), mk(1, 1, 1, 0, 1, 0), mk(1, 1, 1, 0, 0, 1),
            mk(1, 1, 1, 1, 0, 0), mk(1, 1, 1, 0, 1, 1), mk(1, 0, 0, 1, 1, 1),
            mk(0, 1, 1, 1, 1, 1), mk(1, 1, 1, 1, 1, 1)};
}

/// Train and evaluate each flag combination with a shared seed and a shared
/// held-out split; one row per requested combination.
inline std::vector<AblationRow> run_ablation(const ModelConfig& base, const TrainConfig& tcfg,
                                             const LabeledSet& dataset,
                                             const std::vector<AblationFlags>& combos) {
    if (combos.empty()) throw UsageError("ablation: no combinations requested");
    dataset.validate();
    std::mt19937_64 rng(tcfg.seed * 424243ULL + 1);
    std::vector<std::size_t> order(dataset.vectors.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng() % i]);
    const std::size_t n_train =
        static_cast<std::size_t>(std::llround(tcfg.split_ratio * static_cast<double>(order.size())));
    if (n_train == 0 || n_train == order.size())
        throw DataError("ablation: dataset too small to split");
    LabeledSet train_part, eval_part;
    train_part.seed = dataset.seed;
    eval_part.seed = dataset.seed;
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto& dst = i < n_train ? train_part : eval_part;
        dst.vectors.push_back(dataset.vectors[order[i]]);
        dst.labels.push_back(dataset.labels[order[i]]);
    }

    const AblationFlags full; // all enabled
    std::vector<AblationRow> rows;
    for (const AblationFlags& flags : combos) {
        ModelConfig cfg = base;
        cfg.flags = flags;
        cfg.validate();
        Model model(cfg);
        model.init_params(tcfg.seed);
        train_sequential({train_part}, model, tcfg);

        std::vector<int> preds, truths;
        std::vector<std::size_t> idx(eval_part.vectors.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t lo = 0; lo < idx.size(); lo += tcfg.batch_size) {
            const std::size_t hi = std::min(idx.size(), lo + tcfg.batch_size);
            const Tensor3 x = detail::batch_tensor(eval_part, idx, lo, hi, cfg);
            const ModelOutput out = model.forward(x, Mode::Eval);
            for (std::size_t b = 0; b < hi - lo; ++b) {
                preds.push_back(detail::predicted_label(out.binary[b], out.multi[b]));
                truths.push_back(eval_part.labels[idx[lo + b]]);
            }
        }
        AblationRow row;
        row.flags = flags;
        row.reference = flags == full;
        row.param_counts = model.count_parameters();
        row.metrics = compute_metrics(preds, truths);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline nlohmann::json ablation_rows_to_json(const std::vector<AblationRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j;
        j["modules"] = {{"exblock", r.flags.exblock}, {"morlet", r.flags.morlet},
                        {"db4", r.flags.db4},         {"cbam", r.flags.cbam},
                        {"gat", r.flags.gat},         {"tst", r.flags.tst}};
        j["reference"] = r.reference;
        j["parameters"] = r.param_counts.at("total");
        j["accuracy"] = r.metrics.accuracy;
        j["precision"] = r.metrics.precision;
        j["recall"] = r.metrics.recall;
        j["f1"] = r.metrics.f1;
        out.push_back(j);
    }
    return out;
}

} // namespace ecgnet
