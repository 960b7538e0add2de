#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgnet/record.hpp"
#include "ecgnet/wavelet.hpp"

namespace ecgnet {

struct FiducialMark {
    std::size_t index = 0;
    std::string tag; // P, Q, R, S, T
};

struct ClinicalFindings {
    double heart_rate_bpm = 0.0;
    double pr_ms = 0.0;
    double qrs_ms = 0.0;
    double qt_ms = 0.0;
    double st_mv = 0.0;
    double r_amp_mv = 0.0;
    std::vector<std::size_t> r_peaks;
    std::vector<double> rr_intervals_s;
    std::vector<double> pr_per_beat_ms, qrs_per_beat_ms, qt_per_beat_ms;
    std::vector<FiducialMark> fiducials;
};

struct DiseaseProbabilities {
    double am = 0.1, cd = 0.1, mi = 0.1, qt = 0.1, he = 0.1;
};

/// Local maxima above 0.3 * max(s) separated by at least 0.4 * fs samples;
/// when two candidates conflict the taller one is kept. An all-zero signal
/// yields an empty list.
inline std::vector<std::size_t> detect_r_peaks(const std::vector<double>& s, double fs) {
    if (s.empty()) throw DataError("detect_r_peaks: empty signal");
    if (!(fs > 0.0)) throw UsageError("detect_r_peaks: fs must be > 0");
    const double mx = *std::max_element(s.begin(), s.end());
    const double threshold = 0.3 * mx;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(s[i] > threshold)) continue;
        const bool left_ok = i == 0 || s[i] >= s[i - 1];
        const bool right_ok = i + 1 == s.size() || s[i] >= s[i + 1];
        if (left_ok && right_ok) candidates.push_back(i);
    }
    std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        if (s[a] != s[b]) return s[a] > s[b];
        return a < b;
    });
    const double min_dist = 0.4 * fs;
    std::vector<std::size_t> kept;
    for (std::size_t c : candidates) {
        bool ok = true;
        for (std::size_t kpt : kept)
            if (std::abs(static_cast<double>(c) - static_cast<double>(kpt)) < min_dist) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(c);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

namespace detail {

inline double median_of(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

/// Sub-sample time of the first crossing of `level` walking from `start` by
/// `step` (either direction, either polarity). Seconds; NaN when the level is
/// never crossed inside [lo, hi].
inline double walk_crossing(const std::vector<double>& s, long start, long step, long lo, long hi,
                            double level, double fs) {
    lo = std::max<long>(lo, 0);
    hi = std::min<long>(hi, static_cast<long>(s.size()) - 1);
    for (long i = start; i >= lo && i <= hi && i + step >= lo && i + step <= hi; i += step) {
        const double a = s[static_cast<std::size_t>(i)] - level;
        const double b = s[static_cast<std::size_t>(i + step)] - level;
        if (a == 0.0) return static_cast<double>(i) / fs;
        if ((a > 0.0) != (b > 0.0) || b == 0.0) {
            const double frac = a / (a - b);
            return (static_cast<double>(i) + frac * static_cast<double>(step)) / fs;
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

inline long argmin_range(const std::vector<double>& s, long lo, long hi) {
    lo = std::max<long>(lo, 0);
    hi = std::min<long>(hi, static_cast<long>(s.size()) - 1);
    long best = lo;
    for (long i = lo + 1; i <= hi; ++i)
        if (s[static_cast<std::size_t>(i)] < s[static_cast<std::size_t>(best)]) best = i;
    return best;
}

inline long argmax_range(const std::vector<double>& s, long lo, long hi) {
    lo = std::max<long>(lo, 0);
    hi = std::min<long>(hi, static_cast<long>(s.size()) - 1);
    long best = lo;
    for (long i = lo + 1; i <= hi; ++i)
        if (s[static_cast<std::size_t>(i)] > s[static_cast<std::size_t>(best)]) best = i;
    return best;
}

} // namespace detail

/// Measure heart rate, intervals, ST deviation and R amplitude on one lead of
/// a canonical record. Timing and ST are read from the denoised signal; R
/// amplitude from the raw millivolt samples. Fiducial windows relative to R:
/// P in [-240,-80] ms, Q in [-80,0), S in (0,80], T in [80,400] ms. Interval
/// endpoints are 10%-of-R-height crossings (QRS) and 10%-of-peak crossings
/// (P onset, T end); ST is the mean deviation over [J+60, J+100] ms.
inline ClinicalFindings extract_findings(const EcgRecord& rec, std::size_t lead = 0) {
    rec.validate();
    if (!rec.is_canonical()) throw DataError("extract_findings: record must be canonical");
    if (lead >= rec.n_channels()) throw UsageError("extract_findings: lead out of range");
    const double fs = rec.rate;
    const std::vector<double>& raw = rec.channels[lead];
    const std::vector<double> sig = denoise(raw, WaveletConfig::pipeline_default(), Db4Filters{}, fs);

    ClinicalFindings f;
    f.r_peaks = detect_r_peaks(sig, fs);
    if (f.r_peaks.size() < 2) throw DataError("extract_findings: insufficient rhythm (< 2 R peaks)");

    for (std::size_t i = 1; i < f.r_peaks.size(); ++i)
        f.rr_intervals_s.push_back(
            (static_cast<double>(f.r_peaks[i]) - static_cast<double>(f.r_peaks[i - 1])) / fs);
    double rr_mean = 0.0;
    for (double rr : f.rr_intervals_s) rr_mean += rr;
    rr_mean /= static_cast<double>(f.rr_intervals_s.size());
    f.heart_rate_bpm = 60.0 / rr_mean;

    const double baseline = detail::median_of(sig);
    const double baseline_raw = detail::median_of(raw);
    const long n = static_cast<long>(sig.size());
    auto ms_to_samp = [&](double ms) { return static_cast<long>(std::lround(ms * fs / 1000.0)); };

    std::vector<double> st_vals, ramp_vals;
    for (std::size_t r : f.r_peaks) {
        const long ri = static_cast<long>(r);
        if (ri - ms_to_samp(400) < 0 || ri + ms_to_samp(680) >= n) continue; // partial beat

        const double a_r = sig[r] - baseline;
        if (!(a_r > 0.0)) continue;
        ramp_vals.push_back(raw[r] - baseline_raw);

        const long q_idx = detail::argmin_range(sig, ri - ms_to_samp(80), ri - 1);
        const long s_idx = detail::argmin_range(sig, ri + 1, ri + ms_to_samp(80));
        const long p_idx = detail::argmax_range(sig, ri - ms_to_samp(240), ri - ms_to_samp(80));
        const long t_idx = detail::argmax_range(sig, ri + ms_to_samp(80), ri + ms_to_samp(400));
        f.fiducials.push_back({static_cast<std::size_t>(p_idx), "P"});
        f.fiducials.push_back({static_cast<std::size_t>(q_idx), "Q"});
        f.fiducials.push_back({r, "R"});
        f.fiducials.push_back({static_cast<std::size_t>(s_idx), "S"});
        f.fiducials.push_back({static_cast<std::size_t>(t_idx), "T"});

        const double dip_level = baseline - 0.1 * a_r;
        double onset_s = std::numeric_limits<double>::quiet_NaN();
        if (sig[static_cast<std::size_t>(q_idx)] <= dip_level)
            onset_s = detail::walk_crossing(sig, q_idx, -1, ri - ms_to_samp(110), ri, dip_level, fs);
        if (!std::isfinite(onset_s)) {
            // shallow Q: take the R upstroke through +10% of R height, walking
            // down the left flank
            onset_s = detail::walk_crossing(sig, ri, -1, ri - ms_to_samp(110), ri,
                                            baseline + 0.1 * a_r, fs);
        }
        double end_s = std::numeric_limits<double>::quiet_NaN();
        if (sig[static_cast<std::size_t>(s_idx)] <= dip_level)
            end_s = detail::walk_crossing(sig, s_idx, +1, ri, ri + ms_to_samp(140), dip_level, fs);
        if (!std::isfinite(end_s))
            end_s = detail::walk_crossing(sig, ri, +1, ri, ri + ms_to_samp(140),
                                          baseline + 0.1 * a_r, fs);
        if (!std::isfinite(onset_s) || !std::isfinite(end_s)) continue;
        f.qrs_per_beat_ms.push_back((end_s - onset_s) * 1000.0);

        const double p_level = baseline + 0.1 * (sig[static_cast<std::size_t>(p_idx)] - baseline);
        const double p_onset_s = detail::walk_crossing(sig, p_idx, -1, p_idx - ms_to_samp(120),
                                                       p_idx, p_level, fs);
        if (std::isfinite(p_onset_s)) f.pr_per_beat_ms.push_back((onset_s - p_onset_s) * 1000.0);

        const double t_level = baseline + 0.1 * (sig[static_cast<std::size_t>(t_idx)] - baseline);
        const double t_end_s =
            detail::walk_crossing(sig, t_idx, +1, t_idx, t_idx + ms_to_samp(260), t_level, fs);
        if (std::isfinite(t_end_s)) f.qt_per_beat_ms.push_back((t_end_s - onset_s) * 1000.0);

        const long j = static_cast<long>(std::lround(end_s * fs));
        const long w0 = j + ms_to_samp(60), w1 = j + ms_to_samp(100);
        if (w1 < n) {
            double acc = 0.0;
            for (long t = w0; t <= w1; ++t) acc += sig[static_cast<std::size_t>(t)] - baseline;
            st_vals.push_back(acc / static_cast<double>(w1 - w0 + 1));
        }
    }

    auto mean_or_throw = [](const std::vector<double>& v, const char* what) {
        if (v.empty()) throw DataError(std::string("extract_findings: no measurable ") + what);
        double acc = 0.0;
        for (double x : v) acc += x;
        return acc / static_cast<double>(v.size());
    };
    f.pr_ms = mean_or_throw(f.pr_per_beat_ms, "PR interval");
    f.qrs_ms = mean_or_throw(f.qrs_per_beat_ms, "QRS duration");
    f.qt_ms = mean_or_throw(f.qt_per_beat_ms, "QT interval");
    f.st_mv = mean_or_throw(st_vals, "ST segment");
    f.r_amp_mv = mean_or_throw(ramp_vals, "R amplitude");
    return f;
}

/// The five closed-form disease rules, evaluated in tenths so the clamp
/// boundaries (0.1 .. 0.9) are exact in double arithmetic:
///   AM: max(0.1, min(0.9, |HR-75|/50))
///   CD: min(0.9, 0.1 + sum_i clamp(0, 0.4, (delta_i - O_i)/S_i)),
///       offsets 200/120 ms, scales 100/40 ms for PR/QRS
///   MI: min(0.9, 0.1 + min(0.6, 3|ST|) + 0.2 * [QRS > 110])
///   QT: min(0.9, 0.6 + (QT-460)/100) above 460 ms, mirrored below 350 ms,
///       floor 0.1 in the normal band
///   HE: min(0.9, 0.1 + clamp(0, 0.5, (R-2)/2) + clamp(0, 0.3, (QRS-110)/30))
inline DiseaseProbabilities disease_probabilities(const ClinicalFindings& f) {
    DiseaseProbabilities p;
    p.am = std::max(1.0, std::min(9.0, std::abs(f.heart_rate_bpm - 75.0) / 5.0)) / 10.0;
    p.cd = std::min(9.0, 1.0 + std::max(0.0, std::min(4.0, (f.pr_ms - 200.0) / 10.0)) +
                             std::max(0.0, std::min(4.0, (f.qrs_ms - 120.0) / 4.0))) /
           10.0;
    p.mi = std::min(9.0, 1.0 + std::min(6.0, 30.0 * std::abs(f.st_mv)) +
                             (f.qrs_ms > 110.0 ? 2.0 : 0.0)) /
           10.0;
    if (f.qt_ms > 460.0)
        p.qt = std::min(9.0, 6.0 + (f.qt_ms - 460.0) / 10.0) / 10.0;
    else if (f.qt_ms < 350.0)
        p.qt = std::min(9.0, 6.0 + (350.0 - f.qt_ms) / 10.0) / 10.0;
    else
        p.qt = 0.1;
    p.he = std::min(9.0, 1.0 + std::max(0.0, std::min(5.0, (f.r_amp_mv - 2.0) * 5.0)) +
                             std::max(0.0, std::min(3.0, (f.qrs_ms - 110.0) / 3.0))) /
           10.0;
    return p;
}

/// Highest probability wins; exact ties resolve by clinical urgency
/// MI > AM > CD > QT > HE.
inline std::pair<ClassTag, double> resolve_diagnosis(const DiseaseProbabilities& p) {
    const std::pair<ClassTag, double> ranked[] = {
        {ClassTag::MI, p.mi}, {ClassTag::AM, p.am}, {ClassTag::CD, p.cd},
        {ClassTag::QT, p.qt}, {ClassTag::HE, p.he}};
    std::pair<ClassTag, double> best = ranked[0];
    for (const auto& cand : ranked)
        if (cand.second > best.second) best = cand;
    return best;
}

enum class RiskLevel { Low, Moderate, High };

inline const char* to_string(RiskLevel r) {
    switch (r) {
        case RiskLevel::Low: return "low";
        case RiskLevel::Moderate: return "moderate";
        case RiskLevel::High: return "high";
    }
    return "?";
}

inline RiskLevel risk_from_confidence(double confidence) {
    if (confidence < 0.4) return RiskLevel::Low;
    if (confidence < 0.7) return RiskLevel::Moderate;
    return RiskLevel::High;
}

struct DiagnosisReport {
    bool abnormal = false;
    std::optional<ClassTag> diagnosis;
    std::optional<double> confidence;
    std::optional<RiskLevel> risk;
    std::optional<ClinicalFindings> findings;
    std::optional<DiseaseProbabilities> probabilities;
    std::vector<FiducialMark> annotations;
};

/// Assemble the report. The diagnosis section exists only for an Abnormal
/// gate; probabilities are reported whenever findings are available.
inline DiagnosisReport build_report(bool abnormal_gate,
                                    const std::optional<ClinicalFindings>& findings,
                                    const std::optional<DiseaseProbabilities>& probabilities) {
    DiagnosisReport rep;
    rep.abnormal = abnormal_gate;
    rep.findings = findings;
    rep.probabilities = probabilities;
    if (findings) rep.annotations = findings->fiducials;
    if (abnormal_gate) {
        if (!probabilities)
            throw UsageError("build_report: abnormal gate requires probabilities");
        const auto [tag, conf] = resolve_diagnosis(*probabilities);
        rep.diagnosis = tag;
        rep.confidence = conf;
        rep.risk = risk_from_confidence(conf);
    }
    return rep;
}

inline nlohmann::json findings_to_json(const ClinicalFindings& f) {
    nlohmann::json j;
    j["heart_rate_bpm"] = f.heart_rate_bpm;
    j["pr_ms"] = f.pr_ms;
    j["qrs_ms"] = f.qrs_ms;
    j["qt_ms"] = f.qt_ms;
    j["st_mv"] = f.st_mv;
    j["r_amp_mv"] = f.r_amp_mv;
    j["r_peaks"] = f.r_peaks;
    j["rr_intervals_s"] = f.rr_intervals_s;
    return j;
}

inline ClinicalFindings findings_from_json(const nlohmann::json& j) {
    ClinicalFindings f;
    j.at("heart_rate_bpm").get_to(f.heart_rate_bpm);
    j.at("pr_ms").get_to(f.pr_ms);
    j.at("qrs_ms").get_to(f.qrs_ms);
    j.at("qt_ms").get_to(f.qt_ms);
    j.at("st_mv").get_to(f.st_mv);
    j.at("r_amp_mv").get_to(f.r_amp_mv);
    j.at("r_peaks").get_to(f.r_peaks);
    j.at("rr_intervals_s").get_to(f.rr_intervals_s);
    return f;
}

inline nlohmann::json report_to_json(const DiagnosisReport& rep) {
    nlohmann::json j;
    j["gate"] = rep.abnormal ? "Abnormal" : "Normal";
    if (rep.diagnosis) j["diagnosis"] = to_string(*rep.diagnosis);
    if (rep.confidence) j["confidence"] = *rep.confidence;
    if (rep.risk) j["risk"] = to_string(*rep.risk);
    if (rep.findings) j["findings"] = findings_to_json(*rep.findings);
    if (rep.probabilities) {
        const auto& p = *rep.probabilities;
        j["probabilities"] = {{"AM", p.am}, {"CD", p.cd}, {"MI", p.mi}, {"QT", p.qt}, {"HE", p.he}};
    }
    nlohmann::json ann = nlohmann::json::array();
    for (const auto& a : rep.annotations) ann.push_back({{"index", a.index}, {"tag", a.tag}});
    j["annotations"] = ann;
    return j;
}

inline DiagnosisReport report_from_json(const nlohmann::json& j) {
    DiagnosisReport rep;
    rep.abnormal = j.at("gate").get<std::string>() == "Abnormal";
    if (j.contains("diagnosis")) rep.diagnosis = class_tag_from_string(j.at("diagnosis").get<std::string>());
    if (j.contains("confidence")) rep.confidence = j.at("confidence").get<double>();
    if (j.contains("risk")) {
        const std::string r = j.at("risk").get<std::string>();
        rep.risk = r == "low" ? RiskLevel::Low : r == "moderate" ? RiskLevel::Moderate : RiskLevel::High;
    }
    if (j.contains("findings")) rep.findings = findings_from_json(j.at("findings"));
    if (j.contains("probabilities")) {
        const auto& p = j.at("probabilities");
        DiseaseProbabilities dp;
        p.at("AM").get_to(dp.am);
        p.at("CD").get_to(dp.cd);
        p.at("MI").get_to(dp.mi);
        p.at("QT").get_to(dp.qt);
        p.at("HE").get_to(dp.he);
        rep.probabilities = dp;
    }
    for (const auto& a : j.at("annotations"))
        rep.annotations.push_back({a.at("index").get<std::size_t>(), a.at("tag").get<std::string>()});
    return rep;
}

} // namespace ecgnet
