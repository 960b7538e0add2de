#pragma once

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgnet/common.hpp"

namespace ecgnet {

constexpr double kCanonicalRate = 250.0;
constexpr std::size_t kCanonicalLength = 1500;

/// Diagnostic class tags. Normal gates the five abnormality classes.
enum class ClassTag { Normal = 0, AM = 1, CD = 2, MI = 3, QT = 4, HE = 5 };

inline const char* to_string(ClassTag t) {
    switch (t) {
        case ClassTag::Normal: return "Normal";
        case ClassTag::AM: return "AM";
        case ClassTag::CD: return "CD";
        case ClassTag::MI: return "MI";
        case ClassTag::QT: return "QT";
        case ClassTag::HE: return "HE";
    }
    return "?";
}

inline ClassTag class_tag_from_string(std::string_view s) {
    if (s == "Normal") return ClassTag::Normal;
    if (s == "AM") return ClassTag::AM;
    if (s == "CD") return ClassTag::CD;
    if (s == "MI") return ClassTag::MI;
    if (s == "QT") return ClassTag::QT;
    if (s == "HE") return ClassTag::HE;
    throw DataError("unknown class tag: '" + std::string(s) + "'");
}

/// Multi-channel ECG time series in millivolts. Channels share one length,
/// rate is samples/second. Canonical form is 250 Hz / 1500 samples.
struct EcgRecord {
    std::vector<std::vector<double>> channels;
    double rate = 0.0;
    std::optional<ClassTag> label;
    std::string source_id;

    std::size_t n_channels() const { return channels.size(); }
    std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }

    void validate() const {
        if (channels.empty()) throw DataError("record has no channels");
        const std::size_t len = channels.front().size();
        if (len == 0) throw DataError("record has empty channels");
        for (const auto& c : channels)
            if (c.size() != len) throw DataError("ragged channel lengths");
        if (!(rate > 0.0)) throw DataError("record rate must be > 0");
    }

    bool is_canonical() const {
        return rate == kCanonicalRate && length() == kCanonicalLength;
    }
};

enum class RecordFormat { Csv, Json };

inline RecordFormat record_format_from_string(std::string_view s) {
    if (s == "csv") return RecordFormat::Csv;
    if (s == "json") return RecordFormat::Json;
    throw UsageError("unknown record format: '" + std::string(s) + "'");
}

namespace detail {

inline EcgRecord read_record_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;

    if (!std::getline(in, line) || line.rfind("rate=", 0) != 0)
        throw DataError("csv record: first line must be 'rate=<int>'");
    EcgRecord rec;
    rec.rate = static_cast<double>(parse_long(std::string_view(line).substr(5)));

    std::streampos after_header = in.tellg();
    if (std::getline(in, line) && line.rfind("label=", 0) == 0) {
        rec.label = class_tag_from_string(std::string_view(line).substr(6));
    } else {
        in.clear();
        in.seekg(after_header);
    }

    std::size_t n_cols = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            std::size_t end = comma == std::string::npos ? line.size() : comma;
            row.push_back(parse_double(std::string_view(line).substr(pos, end - pos)));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (n_cols == 0) {
            n_cols = row.size();
            rec.channels.assign(n_cols, {});
        } else if (row.size() != n_cols) {
            throw DataError("csv record: ragged row arity");
        }
        for (std::size_t c = 0; c < n_cols; ++c) rec.channels[c].push_back(row[c]);
    }
    rec.validate();
    return rec;
}

inline EcgRecord read_record_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("json record: ") + e.what());
    }
    if (!j.is_object() || !j.contains("rate") || !j.contains("channels"))
        throw DataError("json record: need object with 'rate' and 'channels'");
    EcgRecord rec;
    rec.rate = j.at("rate").get<double>();
    for (const auto& ch : j.at("channels"))
        rec.channels.push_back(ch.get<std::vector<double>>());
    if (j.contains("label") && !j.at("label").is_null())
        rec.label = class_tag_from_string(j.at("label").get<std::string>());
    if (j.contains("source_id")) rec.source_id = j.at("source_id").get<std::string>();
    rec.validate();
    return rec;
}

} // namespace detail

/// Parse a record from its serialized bytes in the declared format.
inline EcgRecord read_record(std::string_view bytes, RecordFormat format) {
    return format == RecordFormat::Csv ? detail::read_record_csv(bytes)
                                       : detail::read_record_json(bytes);
}

/// Serialize a record. CSV carries rate/label/samples only (the format has no
/// source field); JSON round-trips everything. Floats use shortest round-trip
/// decimals in both formats.
inline std::string write_record(const EcgRecord& rec, RecordFormat format) {
    rec.validate();
    if (format == RecordFormat::Csv) {
        std::string out = "rate=" + std::to_string(static_cast<long>(rec.rate)) + "\n";
        if (rec.label) out += std::string("label=") + to_string(*rec.label) + "\n";
        const std::size_t len = rec.length();
        for (std::size_t i = 0; i < len; ++i) {
            for (std::size_t c = 0; c < rec.channels.size(); ++c) {
                if (c) out += ',';
                out += format_double(rec.channels[c][i]);
            }
            out += '\n';
        }
        return out;
    }
    nlohmann::json j;
    j["rate"] = rec.rate;
    if (rec.label) j["label"] = to_string(*rec.label);
    if (!rec.source_id.empty()) j["source_id"] = rec.source_id;
    j["channels"] = rec.channels;
    return j.dump();
}

namespace detail {

/// Resample one channel to n_out points spanning the same index range,
/// by linear interpolation. Exact on grid-coincident points and on
/// constant segments.
inline std::vector<double> resample_linear(const std::vector<double>& x, std::size_t n_out) {
    if (x.empty()) throw DataError("empty channel");
    std::vector<double> y(n_out);
    if (x.size() == 1) {
        std::fill(y.begin(), y.end(), x[0]);
        return y;
    }
    const double scale = static_cast<double>(x.size() - 1) / static_cast<double>(n_out - 1);
    for (std::size_t j = 0; j < n_out; ++j) {
        const double pos = static_cast<double>(j) * scale;
        std::size_t i = static_cast<std::size_t>(pos);
        if (i >= x.size() - 1) i = x.size() - 2;
        const double frac = pos - static_cast<double>(i);
        // x[i] + frac*(dx) keeps constants bit-exact and is the identity when frac == 0
        y[j] = frac == 0.0 ? x[i] : x[i] + frac * (x[i + 1] - x[i]);
    }
    return y;
}

} // namespace detail

/// Resample every channel to the canonical 250 Hz / 1500-sample form.
/// Idempotent: a canonical record passes through bit-identically.
inline EcgRecord canonicalize(const EcgRecord& rec) {
    rec.validate();
    EcgRecord out;
    out.rate = kCanonicalRate;
    out.label = rec.label;
    out.source_id = rec.source_id;
    out.channels.reserve(rec.channels.size());
    for (const auto& ch : rec.channels)
        out.channels.push_back(detail::resample_linear(ch, kCanonicalLength));
    return out;
}

/// Min-max scale each channel independently to [0,1].
/// Constant channels map to all-zeros.
inline EcgRecord normalize_minmax(const EcgRecord& rec) {
    rec.validate();
    EcgRecord out = rec;
    for (auto& ch : out.channels) {
        const auto [mn_it, mx_it] = std::minmax_element(ch.begin(), ch.end());
        const double mn = *mn_it, mx = *mx_it;
        if (mx == mn) {
            std::fill(ch.begin(), ch.end(), 0.0);
        } else {
            const double span = mx - mn;
            for (double& v : ch) v = (v - mn) / span;
        }
    }
    return out;
}

} // namespace ecgnet
