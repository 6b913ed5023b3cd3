#include "imdd/artifacts.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace imdd {

namespace {

constexpr const char* kHistHeader = "bin_lo,bin_hi,pre,post";

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Panel {
    double x, y, w, h;
    double x0, x1, y0, y1;
    double px(double v) const { return x + (v - x0) / (x1 - x0) * w; }
    double py(double v) const { return y + h - (v - y0) / (y1 - y0) * h; }
};

void axes(std::string& svg, const Panel& p, const std::string& title, const std::string& xlabel,
          const std::string& ylabel) {
    svg += fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="none" stroke="#333"/>)"
                       "\n",
                       p.x, p.y, p.w, p.h);
    svg += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="14" text-anchor="middle">{}</text>)"
                       "\n",
                       p.x + p.w / 2, p.y - 10, xml_escape(title));
    svg += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="12" text-anchor="middle">{}</text>)"
                       "\n",
                       p.x + p.w / 2, p.y + p.h + 36, xml_escape(xlabel));
    svg += fmt::format(
        R"svg(<text x="{:.1f}" y="{:.1f}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.1f} {:.1f})">{}</text>)svg"
        "\n",
        p.x - 46, p.y + p.h / 2, p.x - 46, p.y + p.h / 2, xml_escape(ylabel));
}

void tick_x(std::string& svg, const Panel& p, double v, const std::string& label) {
    svg += fmt::format(R"(<line x1="{0:.1f}" y1="{1:.1f}" x2="{0:.1f}" y2="{2:.1f}" stroke="#333"/>)"
                       "\n",
                       p.px(v), p.y + p.h, p.y + p.h + 5);
    svg += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="10" text-anchor="middle">{}</text>)"
                       "\n",
                       p.px(v), p.y + p.h + 18, xml_escape(label));
}

void tick_y(std::string& svg, const Panel& p, double v, const std::string& label) {
    svg += fmt::format(R"(<line x1="{:.1f}" y1="{:.1f}" x2="{:.1f}" y2="{:.1f}" stroke="#333"/>)"
                       "\n",
                       p.x - 5, p.py(v), p.x, p.py(v));
    svg += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="10" text-anchor="end">{}</text>)"
                       "\n",
                       p.x - 8, p.py(v) + 3, xml_escape(label));
}

void polyline(std::string& svg, const std::vector<std::pair<double, double>>& pts, const char* colour) {
    if (pts.empty()) return;
    svg += R"(<polyline fill="none" stroke-width="1.5" stroke=")";
    svg += colour;
    svg += R"(" points=")";
    for (std::size_t i = 0; i < pts.size(); ++i)
        svg += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", pts[i].first, pts[i].second);
    svg += "\"/>\n";
}

void legend(std::string& svg, const Panel& p, std::size_t slot, const char* colour, const std::string& label) {
    const double y = p.y + 14 + 16 * static_cast<double>(slot);
    svg += fmt::format(R"(<line x1="{:.1f}" y1="{:.1f}" x2="{:.1f}" y2="{:.1f}" stroke="{}" stroke-width="2"/>)"
                       "\n",
                       p.x + p.w - 110, y, p.x + p.w - 90, y, colour);
    svg += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="11">{}</text>)"
                       "\n",
                       p.x + p.w - 85, y + 4, xml_escape(label));
}

}  // namespace

std::filesystem::path default_output_dir() {
    const char* env = std::getenv("IMDD_OUT_DIR");
    if (env && *env) return env;
    return "imdd-out";
}

HistogramTable histogram_table(const BerReport& report) {
    const Histogram& pre = report.pre_histogram;
    const Histogram& post = report.post_histogram;
    if (pre.counts.size() != post.counts.size() || pre.lo != post.lo || pre.hi != post.hi)
        throw Error("artifacts", "pre/post histograms use different binning");
    HistogramTable t;
    for (std::size_t i = 0; i < pre.counts.size(); ++i) {
        t.bin_lo.push_back(pre.bin_lo(i));
        t.bin_hi.push_back(pre.bin_hi(i));
        t.pre.push_back(pre.counts[i]);
        t.post.push_back(post.counts[i]);
    }
    return t;
}

std::string histograms_to_csv(const HistogramTable& t) {
    std::string out = std::string(kHistHeader) + "\n";
    for (std::size_t i = 0; i < t.pre.size(); ++i)
        out += fmt::format("{:.6f},{:.6f},{},{}\n", t.bin_lo[i], t.bin_hi[i], t.pre[i], t.post[i]);
    return out;
}

HistogramTable histograms_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kHistHeader) throw Error("artifacts", "unexpected histogram CSV header");
    HistogramTable t;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string a, b, c, d;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c, ',') ||
            !std::getline(row, d))
            throw Error("artifacts", "malformed histogram CSV row: " + line);
        try {
            t.bin_lo.push_back(std::stod(a));
            t.bin_hi.push_back(std::stod(b));
            t.pre.push_back(std::stoull(c));
            t.post.push_back(std::stoull(d));
        } catch (const std::logic_error&) {
            throw Error("artifacts", "malformed histogram CSV row: " + line);
        }
    }
    return t;
}

std::string eye_to_csv(const EyeDiagram& eye) {
    std::string out = "phase,bin_lo,bin_hi,count\n";
    const double w = (eye.hi - eye.lo) / static_cast<double>(eye.bins);
    for (int ph = 0; ph < eye.phases; ++ph)
        for (std::size_t b = 0; b < eye.bins; ++b)
            out += fmt::format("{},{:.6f},{:.6f},{}\n", ph, eye.lo + w * static_cast<double>(b),
                               eye.lo + w * static_cast<double>(b + 1),
                               eye.counts[static_cast<std::size_t>(ph) * eye.bins + b]);
    return out;
}

std::string render_svg(const HistogramTable& hist, const std::vector<SweepRow>& rows) {
    const bool curves = !rows.empty();
    const double width = curves ? 1000 : 520;
    std::string svg = fmt::format(
        R"(<?xml version="1.0" encoding="UTF-8"?>)"
        "\n"
        R"(<svg xmlns="http://www.w3.org/2000/svg" width="{0:.0f}" height="400" viewBox="0 0 {0:.0f} 400">)"
        "\n"
        R"(<rect width="100%" height="100%" fill="white"/>)"
        "\n",
        width);

    // Histogram overlay, each normalized to unit area.
    if (!hist.pre.empty()) {
        const double lo = hist.bin_lo.front(), hi = hist.bin_hi.back();
        auto density = [&](const std::vector<std::uint64_t>& c) {
            double total = 0;
            for (auto v : c) total += static_cast<double>(v);
            std::vector<double> d(c.size(), 0.0);
            for (std::size_t i = 0; i < c.size() && total > 0; ++i)
                d[i] = static_cast<double>(c[i]) / total / (hist.bin_hi[i] - hist.bin_lo[i]);
            return d;
        };
        const auto dpre = density(hist.pre), dpost = density(hist.post);
        double top = 0.0;
        for (double v : dpre) top = std::max(top, v);
        for (double v : dpost) top = std::max(top, v);
        if (top <= 0.0) top = 1.0;
        const Panel p{70, 40, 400, 300, lo, hi, 0.0, top * 1.05};
        axes(svg, p, "Amplitude histograms", "amplitude", "density");
        for (int i = 0; i <= 4; ++i) {
            const double v = lo + (hi - lo) * i / 4.0;
            tick_x(svg, p, v, fmt::format("{:.1f}", v));
        }
        for (int i = 0; i <= 4; ++i) {
            const double v = p.y1 * i / 4.0;
            tick_y(svg, p, v, fmt::format("{:.2f}", v));
        }
        auto steps = [&](const std::vector<double>& d) {
            std::vector<std::pair<double, double>> pts;
            for (std::size_t i = 0; i < d.size(); ++i) {
                pts.emplace_back(p.px(hist.bin_lo[i]), p.py(d[i]));
                pts.emplace_back(p.px(hist.bin_hi[i]), p.py(d[i]));
            }
            return pts;
        };
        polyline(svg, steps(dpre), kPalette[0]);
        polyline(svg, steps(dpost), kPalette[1]);
        legend(svg, p, 0, kPalette[0], "pre-equalizer");
        legend(svg, p, 1, kPalette[1], "post-equalizer");
    }

    if (curves) {
        double x0 = rows.front().value, x1 = x0;
        double lmin = 0.0, lmax = -6.0;
        std::map<std::string, std::vector<std::pair<double, double>>> series;
        for (const auto& r : rows) {
            x0 = std::min(x0, r.value);
            x1 = std::max(x1, r.value);
            const double l = std::log10(std::max(r.ber, 1e-9));
            lmin = std::min(lmin, std::floor(l));
            lmax = std::max(lmax, std::ceil(l));
            series[r.equalizer].emplace_back(r.value, l);
        }
        if (x1 == x0) x1 = x0 + 1.0;
        if (lmax <= lmin) lmax = lmin + 1.0;
        const Panel p{570, 40, 400, 300, x0, x1, lmin, lmax};
        axes(svg, p, "BER", rows.front().parameter, "log10(BER)");
        for (int i = 0; i <= 4; ++i) {
            const double v = x0 + (x1 - x0) * i / 4.0;
            tick_x(svg, p, v, fmt::format("{:.3g}", v));
        }
        for (double v = lmin; v <= lmax; v += 1.0) tick_y(svg, p, v, fmt::format("{:.0f}", v));
        std::size_t slot = 0;
        for (auto& [name, pts] : series) {
            std::sort(pts.begin(), pts.end());
            std::vector<std::pair<double, double>> px;
            for (const auto& [x, y] : pts) px.emplace_back(p.px(x), p.py(y));
            const char* colour = kPalette[(slot + 2) % std::size(kPalette)];
            polyline(svg, px, colour);
            for (const auto& [x, y] : px)
                svg += fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="3" fill="{}"/>)"
                                   "\n",
                                   x, y, colour);
            legend(svg, p, slot++, colour, name);
        }
    }
    svg += "</svg>\n";
    return svg;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("artifacts", "cannot write '" + path.string() + "'");
    out << text;
    out.flush();
    if (!out) throw Error("artifacts", "write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("artifacts", "cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void emit_artifacts(const BerReport& report, const std::vector<SweepRow>& rows, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error("artifacts", "cannot create '" + out_dir.string() + "': " + ec.message());
    const HistogramTable table = histogram_table(report);
    write_text_file(out_dir / "histograms.csv", histograms_to_csv(table));
    write_text_file(out_dir / "eye.csv", eye_to_csv(report.eye));
    write_text_file(out_dir / "ber_sweep.csv", sweep_to_csv(rows));
    write_text_file(out_dir / "plots.svg", render_svg(table, rows));
}

}  // namespace imdd
