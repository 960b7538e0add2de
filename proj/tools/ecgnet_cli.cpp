// Command-line surface for the ECG pipeline: synthesis, preprocessing,
// denoising, training, evaluation, ablation, prediction, reporting, and
// parameter accounting.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecgnet/ecgnet.hpp"

namespace {

using namespace ecgnet;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << content;
}

RecordFormat format_of(const std::string& path, const std::string& explicit_format) {
    if (!explicit_format.empty()) return record_format_from_string(explicit_format);
    if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") return RecordFormat::Csv;
    return RecordFormat::Json;
}

EcgRecord load_record(const std::string& path, const std::string& explicit_format) {
    return read_record(read_file(path), format_of(path, explicit_format));
}

struct ConfigArgs {
    std::string config_path;
    std::vector<std::string> sets;
    long seed = -1;
    long lead = -1;

    RunConfig build() const {
        RunConfig rc;
        if (!config_path.empty()) rc.load(read_file(config_path));
        for (const std::string& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw UsageError("--set expects key=value, got '" + kv + "'");
            rc.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed >= 0) rc.train.seed = static_cast<std::uint64_t>(seed);
        if (lead >= 0) rc.lead = static_cast<std::size_t>(lead);
        return rc;
    }
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.config_path, "flat key=value config file");
    cmd->add_option("--set", args.sets, "config override, key=value (repeatable)");
    cmd->add_option("--seed", args.seed, "seed override (train.seed)");
    cmd->add_option("--lead", args.lead, "lead index for symbolic analysis");
}

AblationFlags parse_flags(const std::string& csv) {
    AblationFlags f;
    f.exblock = f.morlet = f.db4 = f.cbam = f.gat = f.tst = false;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "exblock") f.exblock = true;
        else if (item == "morlet") f.morlet = true;
        else if (item == "db4") f.db4 = true;
        else if (item == "cbam") f.cbam = true;
        else if (item == "gat") f.gat = true;
        else if (item == "tst") f.tst = true;
        else if (!item.empty()) throw UsageError("unknown ablation flag '" + item + "'");
    }
    return f;
}

std::unique_ptr<Model> model_from_checkpoint(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    if (!j.contains("config")) throw DataError("checkpoint: missing config");
    ModelConfig cfg = j.at("config").get<ModelConfig>();
    auto model = std::make_unique<Model>(cfg);
    model->load_checkpoint(j);
    return model;
}

std::vector<LabeledSet> load_datasets(const std::vector<std::string>& paths,
                                      const ModelConfig& cfg) {
    std::vector<LabeledSet> sets;
    for (const std::string& p : paths) {
        LoadedSet loaded = labeled_set_from_json(nlohmann::json::parse(read_file(p)));
        if (loaded.channels != cfg.n_channels || loaded.length != cfg.input_len)
            throw DataError("dataset '" + p + "' shape does not match model config");
        sets.push_back(std::move(loaded.set));
    }
    return sets;
}

int run(int argc, char** argv) {
    CLI::App app{"ECG analysis pipeline: wavelet features, attention network, clinical rules"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a deterministic synthetic record");
    SynthSpec spec;
    long synth_seed = 0, synth_channels = 1;
    double snr = 0.0;
    bool has_snr = false;
    std::string synth_label, synth_out, synth_truth_out, synth_format = "json";
    synth->add_option("--hr", spec.heart_rate_bpm, "heart rate, bpm");
    synth->add_option("--pr", spec.pr_ms, "PR interval, ms");
    synth->add_option("--qrs", spec.qrs_ms, "QRS duration, ms");
    synth->add_option("--qt", spec.qt_ms, "QT interval, ms");
    synth->add_option("--r-amp", spec.r_amp_mv, "R amplitude, mV");
    synth->add_option("--st", spec.st_mv, "ST elevation, mV");
    synth->add_option("--snr", snr, "additive noise SNR, dB")->each([&](const std::string&) {
        has_snr = true;
    });
    synth->add_option("--channels", synth_channels, "channel count");
    synth->add_option("--label", synth_label, "class tag (Normal|AM|CD|MI|QT|HE)");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--format", synth_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    synth->add_option("--out", synth_out, "output record path")->required();
    synth->add_option("--truth-out", synth_truth_out, "ground-truth JSON path");

    // ---- preprocess / denoise ----
    auto* preprocess = app.add_subcommand("preprocess", "canonicalize and normalize a record");
    auto* denoise_cmd = app.add_subcommand("denoise", "canonicalize and denoise a record");
    std::string pp_in, pp_out, pp_informat, pp_outformat = "json";
    for (CLI::App* cmd : {preprocess, denoise_cmd}) {
        cmd->add_option("--in", pp_in, "input record")->required();
        cmd->add_option("--out", pp_out, "output record")->required();
        cmd->add_option("--in-format", pp_informat, "input format override");
        cmd->add_option("--format", pp_outformat, "output format")
            ->check(CLI::IsMember({"csv", "json"}));
    }

    // ---- train ----
    auto* train = app.add_subcommand("train", "train sequentially over datasets");
    ConfigArgs train_cfg_args;
    std::vector<std::string> train_data;
    std::string train_out = "checkpoint.json", train_history, train_init;
    add_config_options(train, train_cfg_args);
    train->add_option("--data", train_data, "LabeledSet JSON files, in training order")
        ->required();
    train->add_option("--out", train_out, "checkpoint output path");
    train->add_option("--history", train_history, "history JSONL output path");
    train->add_option("--init", train_init, "initial checkpoint to fine-tune from");

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    ConfigArgs eval_cfg_args;
    std::string eval_data, eval_ckpt, eval_out;
    add_config_options(eval, eval_cfg_args);
    eval->add_option("--data", eval_data, "LabeledSet JSON file")->required();
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
    eval->add_option("--out", eval_out, "metrics JSON output (stdout when omitted)");

    // ---- ablate ----
    auto* ablate = app.add_subcommand("ablate", "train/evaluate module combinations");
    ConfigArgs ablate_cfg_args;
    std::string ablate_data, ablate_out;
    std::vector<std::string> ablate_flags;
    add_config_options(ablate, ablate_cfg_args);
    ablate->add_option("--data", ablate_data, "LabeledSet JSON file")->required();
    ablate->add_option("--ablate-flags", ablate_flags,
                       "one combination per use, e.g. exblock,morlet,db4,cbam "
                       "(default: the eight study rows)");
    ablate->add_option("--out", ablate_out, "rows JSON output (stdout when omitted)");

    // ---- predict / report ----
    auto* predict = app.add_subcommand("predict", "end-to-end diagnosis for one record");
    auto* report = app.add_subcommand("report", "diagnosis plus annotated SVG");
    ConfigArgs pr_cfg_args;
    std::string pr_in, pr_ckpt, pr_out, pr_svg, pr_informat;
    for (CLI::App* cmd : {predict, report}) {
        add_config_options(cmd, pr_cfg_args);
        cmd->add_option("--in", pr_in, "input record")->required();
        cmd->add_option("--checkpoint", pr_ckpt, "checkpoint path")->required();
        cmd->add_option("--out", pr_out, "report JSON output (stdout when omitted)");
        cmd->add_option("--in-format", pr_informat, "input format override");
    }
    report->add_option("--svg", pr_svg, "annotated SVG output path")->required();

    // ---- params ----
    auto* params = app.add_subcommand("params", "parameter and MAC counts for a config");
    ConfigArgs params_cfg_args;
    std::string params_out;
    add_config_options(params, params_cfg_args);
    params->add_option("--out", params_out, "JSON output (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    auto emit = [&](const std::string& path, const std::string& content) {
        if (path.empty()) std::cout << content;
        else write_file(path, content);
    };

    if (synth->parsed()) {
        spec.seed = static_cast<std::uint64_t>(synth_seed);
        spec.n_channels = static_cast<std::size_t>(synth_channels);
        if (has_snr) spec.noise_snr_db = snr;
        if (!synth_label.empty()) spec.label = class_tag_from_string(synth_label);
        const SynthResult res = synth_ecg(spec);
        write_file(synth_out, write_record(res.record, record_format_from_string(synth_format)));
        if (!synth_truth_out.empty()) {
            nlohmann::json t;
            t["r_peaks"] = res.truth.r_peaks;
            t["rr_s"] = res.truth.rr_s;
            t["heart_rate_bpm"] = res.truth.heart_rate_bpm;
            t["pr_ms"] = res.truth.pr_ms;
            t["qrs_ms"] = res.truth.qrs_ms;
            t["qt_ms"] = res.truth.qt_ms;
            t["st_mv"] = res.truth.st_mv;
            t["r_amp_mv"] = res.truth.r_amp_mv;
            write_file(synth_truth_out, t.dump(2) + "\n");
        }
        return kExitOk;
    }
    if (preprocess->parsed() || denoise_cmd->parsed()) {
        const EcgRecord rec = load_record(pp_in, pp_informat);
        const EcgRecord out = preprocess->parsed() ? preprocess_record(rec)
                                                   : denoise_record(canonicalize(rec));
        write_file(pp_out, write_record(out, record_format_from_string(pp_outformat)));
        return kExitOk;
    }
    if (train->parsed()) {
        const RunConfig rc = train_cfg_args.build();
        std::unique_ptr<Model> model;
        if (!train_init.empty()) {
            model = model_from_checkpoint(train_init);
        } else {
            model = std::make_unique<Model>(rc.model);
            model->init_params(rc.train.seed);
        }
        const auto datasets = load_datasets(train_data, model->config());
        const History history = train_sequential(datasets, *model, rc.train);
        write_file(train_out, model->checkpoint().dump() + "\n");
        if (!train_history.empty()) write_file(train_history, history.to_jsonl());
        return kExitOk;
    }
    if (eval->parsed()) {
        const RunConfig rc = eval_cfg_args.build();
        auto model = model_from_checkpoint(eval_ckpt);
        const auto sets = load_datasets({eval_data}, model->config());
        const LabeledSet& set = sets.front();
        std::vector<int> preds, truths;
        std::vector<std::vector<double>> scores;
        std::vector<std::size_t> idx(set.vectors.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t lo = 0; lo < idx.size(); lo += rc.train.batch_size) {
            const std::size_t hi = std::min(idx.size(), lo + rc.train.batch_size);
            const Tensor3 x = detail::batch_tensor(set, idx, lo, hi, model->config());
            const ModelOutput out = model->forward(x, Mode::Eval);
            for (std::size_t b = 0; b < hi - lo; ++b) {
                preds.push_back(detail::predicted_label(out.binary[b], out.multi[b]));
                truths.push_back(set.labels[idx[lo + b]]);
                const double gate = sigmoid(out.binary[b]);
                std::vector<double> sc{1.0 - gate, gate};
                for (double logit : out.multi[b]) sc.push_back(sigmoid(logit));
                scores.push_back(std::move(sc));
            }
        }
        int max_label = 0;
        for (int t : truths) max_label = std::max(max_label, t);
        Metrics m;
        if (max_label <= 1) {
            for (auto& sc : scores) sc.resize(2);
            m = compute_metrics(preds, scores, truths);
        } else {
            std::vector<std::vector<double>> multi_scores;
            for (const auto& sc : scores)
                multi_scores.push_back({sc[0], sc[2], sc[3], sc[4], sc[5], sc[6]});
            m = compute_metrics(preds, multi_scores, truths);
        }
        nlohmann::json j{{"accuracy", m.accuracy}, {"precision", m.precision},
                         {"recall", m.recall},     {"f1", m.f1},
                         {"specificity", m.specificity}, {"auc", m.auc},
                         {"confusion", m.confusion}};
        emit(eval_out, j.dump(2) + "\n");
        return kExitOk;
    }
    if (ablate->parsed()) {
        const RunConfig rc = ablate_cfg_args.build();
        const LoadedSet loaded = labeled_set_from_json(nlohmann::json::parse(read_file(ablate_data)));
        ModelConfig base = rc.model;
        base.n_channels = loaded.channels;
        base.input_len = loaded.length;
        std::vector<AblationFlags> combos;
        for (const std::string& s : ablate_flags) combos.push_back(parse_flags(s));
        if (combos.empty()) combos = default_ablation_combos();
        const auto rows = run_ablation(base, rc.train, loaded.set, combos);
        emit(ablate_out, ablation_rows_to_json(rows).dump(2) + "\n");
        return kExitOk;
    }
    if (predict->parsed() || report->parsed()) {
        const RunConfig rc = pr_cfg_args.build();
        auto model = model_from_checkpoint(pr_ckpt);
        const EcgRecord rec = load_record(pr_in, pr_informat);
        const DiagnosisReport rep = predict_end_to_end(rec, *model, rc.lead);
        emit(pr_out, report_to_json(rep).dump(2) + "\n");
        if (report->parsed())
            write_file(pr_svg, render_report_svg(canonicalize(rec), rc.lead, rep));
        return kExitOk;
    }
    if (params->parsed()) {
        const RunConfig rc = params_cfg_args.build();
        Model model(rc.model);
        nlohmann::json j;
        j["parameters"] = model.count_parameters();
        j["macs"] = model.count_flops();
        emit(params_out, j.dump(2) + "\n");
        return kExitOk;
    }
    return kExitUsage;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ecgnet::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ecgnet::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ecgnet::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
