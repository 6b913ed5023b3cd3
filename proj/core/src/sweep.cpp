#include "imdd/sweep.hpp"

#include <fmt/format.h>

#include <sstream>

#include "imdd/link.hpp"

namespace imdd {

namespace {

constexpr const char* kCsvHeader = "parameter,value,equalizer,ber,ci_lo,ci_hi,bits,errors,synced";

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

SweepParameter parse_sweep_parameter(const std::string& name) {
    if (name == "snr_db") return SweepParameter::snr_db;
    if (name == "fiber_length_km") return SweepParameter::fiber_length_km;
    if (name == "word_bits") return SweepParameter::word_bits;
    throw Error("sweep", "parameter must be snr_db, fiber_length_km or word_bits (got '" + name + "')");
}

std::string to_string(SweepParameter p) {
    switch (p) {
        case SweepParameter::snr_db: return "snr_db";
        case SweepParameter::fiber_length_km: return "fiber_length_km";
        case SweepParameter::word_bits: return "word_bits";
    }
    return "?";
}

LinkRunConfig sweep_point_config(const LinkRunConfig& base, SweepParameter parameter, double value,
                                 std::size_t index) {
    LinkRunConfig cfg = base;
    cfg.master_seed = derive_seed(base.master_seed, 1000 + index);
    switch (parameter) {
        case SweepParameter::snr_db: cfg.snr_db = value; break;
        case SweepParameter::fiber_length_km: cfg.geometry.fiber_length_km = value; break;
        case SweepParameter::word_bits: {
            const int w = static_cast<int>(value);
            if (static_cast<double>(w) != value) throw Error("sweep", "word_bits values must be integers");
            cfg.equalizer.cnn.weight_fmt = {w, w - 2};
            if (cfg.equalizer.cnn.inference == CnnInference::float_path)
                cfg.equalizer.cnn.inference = CnnInference::quantized;
            break;
        }
    }
    cfg.validate();
    return cfg;
}

std::vector<SweepRow> sweep(const LinkRunConfig& base, SweepParameter parameter, const std::vector<double>& values,
                            const std::vector<EqualizerKind>& equalizers) {
    if (values.size() < 2) throw Error("sweep", "a sweep needs at least two values");
    if (equalizers.empty()) throw Error("sweep", "no equalizer selected");
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (EqualizerKind kind : equalizers) {
            LinkRunConfig cfg = sweep_point_config(base, parameter, values[i], i);
            cfg.equalizer.kind = kind;
            const BerReport r = run_link(cfg);
            rows.push_back({to_string(parameter), values[i], r.equalizer, r.ber, r.ci.lo, r.ci.hi, r.bits_counted,
                            r.bit_errors, r.synced});
        }
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : rows)
        out += fmt::format("{},{:.10g},{},{:.9e},{:.9e},{:.9e},{},{},{}\n", r.parameter, r.value, r.equalizer, r.ber,
                           r.ci_lo, r.ci_hi, r.bits, r.errors, r.synced ? 1 : 0);
    return out;
}

std::vector<SweepRow> sweep_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw Error("sweep", "unexpected sweep CSV header");
    std::vector<SweepRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 9) throw Error("sweep", "malformed sweep CSV row: " + line);
        try {
            rows.push_back({f[0], std::stod(f[1]), f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5]),
                            std::stoull(f[6]), std::stoull(f[7]), f[8] == "1"});
        } catch (const std::logic_error&) {
            throw Error("sweep", "malformed sweep CSV row: " + line);
        }
    }
    return rows;
}

}  // namespace imdd
