#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "imdd/ber.hpp"
#include "imdd/sweep.hpp"

namespace imdd {

/// $IMDD_OUT_DIR if set and non-empty, else "imdd-out".
std::filesystem::path default_output_dir();

struct HistogramTable {
    std::vector<double> bin_lo, bin_hi;
    std::vector<std::uint64_t> pre, post;
};

HistogramTable histogram_table(const BerReport& report);
std::string histograms_to_csv(const HistogramTable& table);
HistogramTable histograms_from_csv(const std::string& text);
std::string eye_to_csv(const EyeDiagram& eye);

/// Standalone SVG: histogram overlay and, if rows are given, BER curves per
/// equalizer on a log axis.
std::string render_svg(const HistogramTable& hist, const std::vector<SweepRow>& rows);

/// Writes histograms.csv, eye.csv, ber_sweep.csv and plots.svg.
void emit_artifacts(const BerReport& report, const std::vector<SweepRow>& rows, const std::filesystem::path& out_dir);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace imdd
