#pragma once

#include <sstream>
#include <string>
#include <string_view>

#include "ecgnet/model.hpp"
#include "ecgnet/train.hpp"

namespace ecgnet {

/// Run configuration: flat dotted keys over the model, training, symbolic
/// and report settings. Unknown keys are usage errors.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::size_t lead = 0;
    std::string format = "json";

    void set(std::string_view key, std::string_view value) {
        auto as_size = [&] { return static_cast<std::size_t>(parse_long(value)); };
        auto as_bool = [&] {
            if (value == "true" || value == "1") return true;
            if (value == "false" || value == "0") return false;
            throw UsageError("config: boolean expected for '" + std::string(key) + "'");
        };
        if (key == "model.n_channels") model.n_channels = as_size();
        else if (key == "model.input_len") model.input_len = as_size();
        else if (key == "model.hidden") model.hidden = as_size();
        else if (key == "model.kernel_width") model.kernel_width = as_size();
        else if (key == "model.gat_dim") model.gat_dim = as_size();
        else if (key == "model.gat_heads") model.gat_heads = as_size();
        else if (key == "model.tst_heads") model.tst_heads = as_size();
        else if (key == "model.tst_dim") model.tst_dim = as_size();
        else if (key == "model.adaptive_out") model.adaptive_out = as_size();
        else if (key == "model.head_hidden") model.head_hidden = as_size();
        else if (key == "model.cbam_reduction") model.cbam_reduction = as_size();
        else if (key == "model.cbam_spatial_kernel") model.cbam_spatial_kernel = as_size();
        else if (key == "model.wavelet_sigma_s") model.wavelet_sigma_s = parse_double(value);
        else if (key == "model.wavelet_support_s") model.wavelet_support_s = parse_double(value);
        else if (key == "model.flags.exblock") model.flags.exblock = as_bool();
        else if (key == "model.flags.morlet") model.flags.morlet = as_bool();
        else if (key == "model.flags.db4") model.flags.db4 = as_bool();
        else if (key == "model.flags.cbam") model.flags.cbam = as_bool();
        else if (key == "model.flags.gat") model.flags.gat = as_bool();
        else if (key == "model.flags.tst") model.flags.tst = as_bool();
        else if (key == "train.lr") train.lr = parse_double(value);
        else if (key == "train.weight_decay") train.weight_decay = parse_double(value);
        else if (key == "train.patience") train.patience = as_size();
        else if (key == "train.max_epochs") train.max_epochs = as_size();
        else if (key == "train.batch_size") train.batch_size = as_size();
        else if (key == "train.split_ratio") train.split_ratio = parse_double(value);
        else if (key == "train.seed") train.seed = static_cast<std::uint64_t>(parse_long(value));
        else if (key == "train.adasyn_k") train.adasyn_k = as_size();
        else if (key == "train.adasyn_beta") train.adasyn_beta = parse_double(value);
        else if (key == "symbolic.lead") lead = as_size();
        else if (key == "report.format") format = std::string(value);
        else throw UsageError("config: unknown key '" + std::string(key) + "'");
    }

    /// Parse a `key = value` document; '#' starts a comment.
    void load(std::string_view text) {
        std::istringstream in{std::string(text)};
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto strip = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                const auto e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            const std::string stripped = strip(line);
            if (stripped.empty()) continue;
            const std::size_t eq = stripped.find('=');
            if (eq == std::string::npos)
                throw UsageError("config: expected 'key = value' at line " +
                                 std::to_string(lineno));
            set(strip(stripped.substr(0, eq)), strip(stripped.substr(eq + 1)));
        }
    }
};

} // namespace ecgnet
