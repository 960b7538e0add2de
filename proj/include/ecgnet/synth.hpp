#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "ecgnet/record.hpp"

#ifndef M_PI
#define M_PI 3.14159265358979323846
#endif

namespace ecgnet {

/// Recipe for a deterministic synthetic ECG: each beat is a sum of Gaussian
/// bumps (P, Q, R, S, T) plus a flat-topped ST segment, placed so that the
/// clinically defined intervals below match the requested values.
struct SynthSpec {
    double heart_rate_bpm = 75.0;
    double pr_ms = 160.0;
    double qrs_ms = 90.0;
    double qt_ms = 400.0;
    double r_amp_mv = 1.0;
    double st_mv = 0.0;
    std::optional<double> noise_snr_db;
    std::size_t n_channels = 1;
    std::uint64_t seed = 0;
    std::optional<ClassTag> label;

    void validate() const {
        if (!(heart_rate_bpm >= 20.0 && heart_rate_bpm <= 300.0))
            throw DataError("synth: heart_rate_bpm must be in [20, 300]");
        if (!(pr_ms > 0 && qrs_ms > 0 && qt_ms > 0))
            throw DataError("synth: intervals must be positive");
        if (!(pr_ms < qt_ms) || !(qrs_ms < qt_ms))
            throw DataError("synth: require pr_ms < qt_ms and qrs_ms < qt_ms");
        if (!(r_amp_mv > 0)) throw DataError("synth: r_amp_mv must be > 0");
        if (n_channels < 1) throw DataError("synth: n_channels must be >= 1");
    }
};

/// Ground truth reported alongside a synthetic record. Interval values are
/// solved on the continuous beat model with the same crossing definitions
/// the measurement side uses (10%-of-R levels for QRS, 10%-of-peak levels
/// for P onset and T end), so they are exact for the generated waveform.
struct SynthTruth {
    std::vector<std::size_t> r_peaks;
    double rr_s = 0.0;
    double heart_rate_bpm = 0.0;
    double pr_ms = 0.0;
    double qrs_ms = 0.0;
    double qt_ms = 0.0;
    double st_mv = 0.0;
    double r_amp_mv = 0.0;
    // fiducials relative to the R center, seconds
    double p_peak_s = 0.0, q_trough_s = 0.0, s_trough_s = 0.0, t_peak_s = 0.0;
    double p_onset_s = 0.0, qrs_onset_s = 0.0, qrs_end_s = 0.0, t_end_s = 0.0;
};

struct SynthResult {
    EcgRecord record;
    SynthTruth truth;
};

namespace detail {

inline double gauss_bump(double u, double center, double sigma) {
    const double d = (u - center) / sigma;
    return std::exp(-0.5 * d * d);
}

inline double smoothstep01(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * (3.0 - 2.0 * x);
}

/// One beat of the continuous model, R peak centered at u = 0.
struct BeatModel {
    double a_r, sigma_r;
    double a_q, c_q, a_s, c_s, sigma_qs;
    double a_p, c_p, sigma_p;
    double a_t, c_t, sigma_t;
    double st, j_point; // plateau: rise [J+10,J+40]ms, flat to J+110, fall to J+150

    double plateau(double u) const {
        if (st == 0.0) return 0.0;
        const double r0 = j_point + 0.010, r1 = j_point + 0.040;
        const double f0 = j_point + 0.110, f1 = j_point + 0.150;
        if (u <= r0 || u >= f1) return 0.0;
        if (u < r1) return st * smoothstep01((u - r0) / (r1 - r0));
        if (u <= f0) return st;
        return st * (1.0 - smoothstep01((u - f0) / (f1 - f0)));
    }

    double operator()(double u) const {
        double v = a_r * gauss_bump(u, 0.0, sigma_r);
        v -= a_q * gauss_bump(u, c_q, sigma_qs);
        v -= a_s * gauss_bump(u, c_s, sigma_qs);
        v += a_p * gauss_bump(u, c_p, sigma_p);
        v += a_t * gauss_bump(u, c_t, sigma_t);
        v += plateau(u);
        return v;
    }
};

/// Leftmost crossing of `level` scanning from `from` towards `to` (either
/// direction), refined by bisection. Returns the u where f(u) == level with
/// f on the `from` side of the level. NaN when no crossing exists.
template <typename F>
inline double scan_crossing(const F& f, double from, double to, double level) {
    const double step = (to > from ? 1.0 : -1.0) * 1e-4;
    const bool from_above = f(from) > level;
    double prev = from;
    for (double u = from + step; (to > from) ? (u <= to) : (u >= to); u += step) {
        const bool above = f(u) > level;
        if (above != from_above) {
            double lo = prev, hi = u;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                if ((f(mid) > level) == from_above) lo = mid; else hi = mid;
            }
            return 0.5 * (lo + hi);
        }
        prev = u;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

template <typename F>
inline double argmax_on(const F& f, double lo, double hi) {
    double best_u = lo, best = f(lo);
    for (double u = lo; u <= hi; u += 1e-4) {
        const double v = f(u);
        if (v > best) { best = v; best_u = u; }
    }
    return best_u;
}

template <typename F>
inline double argmin_on(const F& f, double lo, double hi) {
    double best_u = lo, best = f(lo);
    for (double u = lo; u <= hi; u += 1e-4) {
        const double v = f(u);
        if (v < best) { best = v; best_u = u; }
    }
    return best_u;
}

/// QRS onset: the -0.1*A_R crossing left of the Q trough when the trough is
/// deep enough, otherwise the +0.1*A_R crossing on the R upstroke.
inline double solve_qrs_onset(const BeatModel& b) {
    const double q_trough = argmin_on(b, -0.080, -1e-4);
    const double lvl = -0.1 * b.a_r;
    if (b(q_trough) <= lvl) {
        const double u = scan_crossing(b, q_trough, q_trough - 0.080, lvl);
        if (std::isfinite(u)) return u;
    }
    return scan_crossing(b, 0.0, -0.080, 0.1 * b.a_r);
}

inline double solve_qrs_end(const BeatModel& b) {
    const double s_trough = argmin_on(b, 1e-4, 0.080);
    const double lvl = -0.1 * b.a_r;
    if (b(s_trough) <= lvl) {
        const double u = scan_crossing(b, s_trough, s_trough + 0.080, lvl);
        if (std::isfinite(u)) return u;
    }
    return scan_crossing(b, 0.0, 0.080, 0.1 * b.a_r);
}

inline double solve_p_onset(const BeatModel& b) {
    const double p_peak = argmax_on(b, -0.240, -0.080);
    return scan_crossing(b, p_peak, p_peak - 0.120, 0.1 * b(p_peak));
}

inline double solve_t_end(const BeatModel& b) {
    const double t_peak = argmax_on(b, 0.080, 0.400);
    return scan_crossing(b, t_peak, t_peak + 0.250, 0.1 * b(t_peak));
}

/// Root of a placement -> interval objective: scan from `from` towards `to`
/// for the first sign change (the objective is only piecewise monotone, its
/// dips can leave their search windows at extreme placements), then bisect.
template <typename F>
inline double solve_placement(const F& objective, double from, double to) {
    constexpr int kScanSteps = 160;
    const double step = (to - from) / kScanSteps;
    double prev_x = from;
    double prev_f = objective(from);
    for (int i = 1; i <= kScanSteps; ++i) {
        const double x = from + step * i;
        const double fx = objective(x);
        if (std::isfinite(prev_f) && std::isfinite(fx) &&
            ((prev_f <= 0.0 && fx >= 0.0) || (prev_f >= 0.0 && fx <= 0.0))) {
            double lo = prev_x, hi = x, flo = prev_f;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = objective(mid);
                if ((fm <= 0.0) == (flo <= 0.0)) { lo = mid; flo = fm; } else { hi = mid; }
            }
            const double root = 0.5 * (lo + hi);
            objective(root); // leave the model at the solved placement
            return root;
        }
        prev_x = x;
        prev_f = fx;
    }
    throw DataError("synth: intervals do not fit within one beat period");
}

/// Fully specified normal sampler (Box-Muller over mt19937_64) so records are
/// bit-identical for equal seeds on any platform.
class GaussianSampler {
  public:
    explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}
    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53; // (0,1]
        const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;         // [0,1)
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::mt19937_64 rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace detail

/// Generate a canonical (250 Hz / 1500-sample) synthetic record together with
/// its ground truth. Deterministic: equal specs produce bit-identical output.
inline SynthResult synth_ecg(const SynthSpec& spec) {
    spec.validate();
    const double fs = kCanonicalRate;
    const double rr = 60.0 / spec.heart_rate_bpm;
    const double pr = spec.pr_ms / 1000.0;
    const double qrs = spec.qrs_ms / 1000.0;
    const double qt = spec.qt_ms / 1000.0;

    detail::BeatModel b;
    b.a_r = spec.r_amp_mv;
    b.sigma_r = qrs / 7.5;
    b.sigma_qs = qrs / 9.0;
    b.a_q = b.a_s = 0.22 * spec.r_amp_mv;
    b.a_p = 0.12 * spec.r_amp_mv;
    b.sigma_p = 0.018;
    b.a_t = 0.27 * spec.r_amp_mv;
    b.sigma_t = 0.028;
    b.st = spec.st_mv;
    b.j_point = qrs / 2.0;
    b.c_p = -10.0; // park P and T far away while solving the QRS complex
    b.c_t = 10.0;
    b.c_q = -qrs / 3.0;
    b.c_s = qrs / 3.0;

    // Q and S placed so the 10%-of-R crossings land at -/+ qrs/2; a second
    // pass absorbs the small cross-influence between the two dips.
    for (int pass = 0; pass < 2; ++pass) {
        b.c_q = detail::solve_placement(
            [&](double c) { b.c_q = c; return detail::solve_qrs_onset(b) - (-qrs / 2.0); },
            -qrs, -0.004);
        b.c_s = detail::solve_placement(
            [&](double c) { b.c_s = c; return detail::solve_qrs_end(b) - qrs / 2.0; },
            0.004, qrs);
    }
    const double onset = detail::solve_qrs_onset(b);
    const double qrs_end = detail::solve_qrs_end(b);

    b.c_p = detail::solve_placement(
        [&](double c) { b.c_p = c; return detail::solve_p_onset(b) - (onset - pr); },
        -0.260, -0.060);
    b.c_t = detail::solve_placement(
        [&](double c) { b.c_t = c; return detail::solve_t_end(b) - (onset + qt); },
        qrs_end + 0.010, 0.450);

    // Fit checks against the measurement windows and the beat period.
    const double p_peak = detail::argmax_on(b, -0.240, -0.080);
    const double t_peak = detail::argmax_on(b, 0.080, 0.400);
    const double p_onset = detail::solve_p_onset(b);
    const double t_end = detail::solve_t_end(b);
    if (!(p_peak > -0.238 && p_peak < -0.082))
        throw DataError("synth: P wave falls outside its search window; intervals do not fit");
    if (!(t_peak > qrs_end + 0.010 && t_peak < 0.390))
        throw DataError("synth: T wave falls outside its search window; intervals do not fit");
    if (spec.st_mv != 0.0 && b.c_t - 2.5 * b.sigma_t < b.j_point + 0.150)
        throw DataError("synth: ST segment overlaps the T wave; intervals do not fit");
    if (qt + pr + 0.020 > rr)
        throw DataError("synth: intervals do not fit within one beat period");

    // Beat centers on the continuous axis; ground-truth peaks on the grid.
    const double duration = static_cast<double>(kCanonicalLength) / fs;
    const double t0 = std::ceil(0.42 * fs) / fs;
    std::vector<double> centers;
    for (double c = t0; c + t_end + 0.040 < duration; c += rr) centers.push_back(c);
    if (centers.size() < 2) throw DataError("synth: record too short for two beats at this rate");

    SynthTruth truth;
    truth.rr_s = rr;
    truth.heart_rate_bpm = spec.heart_rate_bpm;
    truth.qrs_ms = (qrs_end - onset) * 1000.0;
    truth.pr_ms = (onset - p_onset) * 1000.0;
    truth.qt_ms = (t_end - onset) * 1000.0;
    truth.r_amp_mv = spec.r_amp_mv;
    truth.p_peak_s = p_peak;
    truth.q_trough_s = detail::argmin_on(b, -0.080, -1e-4);
    truth.s_trough_s = detail::argmin_on(b, 1e-4, 0.080);
    truth.t_peak_s = t_peak;
    truth.p_onset_s = p_onset;
    truth.qrs_onset_s = onset;
    truth.qrs_end_s = qrs_end;
    truth.t_end_s = t_end;
    for (double c : centers)
        truth.r_peaks.push_back(static_cast<std::size_t>(std::llround(c * fs)));
    {
        double acc = 0.0;
        int n = 0;
        for (double u = qrs_end + 0.060; u <= qrs_end + 0.100; u += 1e-4, ++n) acc += b(u);
        truth.st_mv = acc / n;
    }

    EcgRecord rec;
    rec.rate = fs;
    rec.label = spec.label;
    rec.source_id = "synth:" + std::to_string(spec.seed);
    rec.channels.assign(spec.n_channels, std::vector<double>(kCanonicalLength, 0.0));
    for (std::size_t ch = 0; ch < spec.n_channels; ++ch) {
        const double scale = 1.0 / (1.0 + 0.2 * static_cast<double>(ch));
        auto& sig = rec.channels[ch];
        for (std::size_t i = 0; i < kCanonicalLength; ++i) {
            const double t = static_cast<double>(i) / fs;
            double v = 0.0;
            for (double c : centers) {
                const double u = t - c;
                if (u > -0.45 && u < 0.60) v += b(u);
            }
            sig[i] = scale * v;
        }
    }

    if (spec.noise_snr_db) {
        detail::GaussianSampler gauss(spec.seed);
        const double gain = std::pow(10.0, -*spec.noise_snr_db / 20.0);
        for (auto& sig : rec.channels) {
            std::vector<double> noise(sig.size());
            double e_sig = 0.0, e_noise = 0.0;
            for (std::size_t i = 0; i < sig.size(); ++i) {
                noise[i] = gauss();
                e_sig += sig[i] * sig[i];
                e_noise += noise[i] * noise[i];
            }
            if (e_sig > 0.0 && e_noise > 0.0) {
                const double k = gain * std::sqrt(e_sig / e_noise);
                for (std::size_t i = 0; i < sig.size(); ++i) sig[i] += k * noise[i];
            }
        }
    }

    return SynthResult{std::move(rec), std::move(truth)};
}

} // namespace ecgnet
