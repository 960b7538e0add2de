#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "ecgnet/record.hpp"
#include "ecgnet/symbolic.hpp"

namespace ecgnet {

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

} // namespace detail

/// Annotated 2-D waveform: the analyzed lead as a polyline, labeled markers
/// at the P/Q/R/S/T fiducials, and a findings text block.
inline std::string render_report_svg(const EcgRecord& rec, std::size_t lead,
                                     const DiagnosisReport& rep) {
    rec.validate();
    if (lead >= rec.n_channels()) throw UsageError("svg: lead out of range");
    const auto& sig = rec.channels[lead];
    const double width = 1200.0, plot_h = 320.0, margin = 30.0, text_h = 150.0;
    const double height = plot_h + text_h;
    const auto [mn_it, mx_it] = std::minmax_element(sig.begin(), sig.end());
    const double mn = *mn_it, mx = *mx_it;
    const double span = mx > mn ? mx - mn : 1.0;
    auto map_x = [&](double i) {
        return margin + i / static_cast<double>(sig.size() - 1) * (width - 2 * margin);
    };
    auto map_y = [&](double v) {
        return margin + (1.0 - (v - mn) / span) * (plot_h - 2 * margin);
    };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::svg_num(width) +
           "\" height=\"" + detail::svg_num(height) + "\" viewBox=\"0 0 " +
           detail::svg_num(width) + " " + detail::svg_num(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<polyline fill=\"none\" stroke=\"#1565c0\" stroke-width=\"1\" points=\"";
    for (std::size_t i = 0; i < sig.size(); ++i) {
        svg += detail::svg_num(map_x(static_cast<double>(i)));
        svg += ',';
        svg += detail::svg_num(map_y(sig[i]));
        svg += ' ';
    }
    svg += "\"/>\n";
    for (const auto& a : rep.annotations) {
        if (a.index >= sig.size()) continue;
        const double x = map_x(static_cast<double>(a.index));
        const double y = map_y(sig[a.index]);
        svg += "<circle cx=\"" + detail::svg_num(x) + "\" cy=\"" + detail::svg_num(y) +
               "\" r=\"2.5\" fill=\"#c62828\"/>\n";
        svg += "<text x=\"" + detail::svg_num(x + 3) + "\" y=\"" + detail::svg_num(y - 4) +
               "\" font-size=\"10\" fill=\"#c62828\">" + a.tag + "</text>\n";
    }

    double ty = plot_h + 20.0;
    auto text_line = [&](const std::string& s) {
        svg += "<text x=\"30\" y=\"" + detail::svg_num(ty) +
               "\" font-size=\"13\" font-family=\"monospace\" fill=\"#212121\">" + s + "</text>\n";
        ty += 18.0;
    };
    std::string head = std::string("Gate: ") + (rep.abnormal ? "Abnormal" : "Normal");
    if (rep.diagnosis)
        head += "   Diagnosis: " + std::string(to_string(*rep.diagnosis)) +
                "   Confidence: " + detail::svg_num(*rep.confidence) +
                "   Risk: " + to_string(*rep.risk);
    text_line(head);
    if (rep.findings) {
        const auto& f = *rep.findings;
        text_line("HR " + detail::svg_num(f.heart_rate_bpm) + " bpm   PR " +
                  detail::svg_num(f.pr_ms) + " ms   QRS " + detail::svg_num(f.qrs_ms) +
                  " ms   QT " + detail::svg_num(f.qt_ms) + " ms");
        text_line("ST " + detail::svg_num(f.st_mv) + " mV   R amplitude " +
                  detail::svg_num(f.r_amp_mv) + " mV   beats " +
                  std::to_string(f.r_peaks.size()));
    }
    if (rep.probabilities) {
        const auto& p = *rep.probabilities;
        text_line("P(AM) " + detail::svg_num(p.am) + "   P(CD) " + detail::svg_num(p.cd) +
                  "   P(MI) " + detail::svg_num(p.mi) + "   P(QT) " + detail::svg_num(p.qt) +
                  "   P(HE) " + detail::svg_num(p.he));
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace ecgnet
