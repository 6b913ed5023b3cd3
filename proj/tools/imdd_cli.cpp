// imdd: command line front end for link runs, training, sweeps and plots.

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "imdd/artifacts.hpp"
#include "imdd/ber.hpp"
#include "imdd/config.hpp"
#include "imdd/link.hpp"
#include "imdd/model_io.hpp"
#include "imdd/pipeline.hpp"
#include "imdd/sweep.hpp"

namespace {

using namespace imdd;

LinkRunConfig load_or_default(const std::string& path, const std::vector<std::string>& overrides) {
    if (path.empty()) return apply_overrides(LinkRunConfig{}, overrides);
    return load_config(path, overrides);
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon != std::string::npos) {
            // start:step:stop
            const auto second = item.find(':', colon + 1);
            if (second == std::string::npos) throw Error("cli", "range must be start:step:stop");
            const double a = std::stod(item.substr(0, colon));
            const double step = std::stod(item.substr(colon + 1, second - colon - 1));
            const double b = std::stod(item.substr(second + 1));
            if (!(step > 0.0)) throw Error("cli", "range step must be > 0");
            for (int i = 0; a + i * step <= b + 1e-9 * step; ++i) out.push_back(a + i * step);
        } else if (!item.empty()) {
            out.push_back(std::stod(item));
        }
    }
    return out;
}

std::vector<EqualizerKind> parse_equalizers(const std::string& text) {
    std::vector<EqualizerKind> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_equalizer_kind(item));
    return out;
}

void print_throughput(const RunStats& stats) {
    const ThroughputReport t = throughput_report(StageGraph{}, stats);
    std::fprintf(stderr, "stream: %.3e samples/s, %.3e symbols/s, %llu stalls\n", t.samples_per_second,
                 t.symbols_per_second, static_cast<unsigned long long>(stats.stalls));
    for (const auto& e : t.edges)
        std::fprintf(stderr, "  %-28s cap=%zu max=%zu mean=%.2f\n", e.name.c_str(), e.capacity, e.max_occupancy,
                     e.mean_occupancy);
}

// --- selftest -------------------------------------------------------------

struct Check {
    std::string name;
    std::function<bool()> run;
};

bool check_align_identity() {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        BitSequence x(20000);
        for (auto& b : x) b = static_cast<Bit>(rng() & 1);
        BitSequence inv(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) inv[i] = !x[i];
        const auto a = align_and_count(x, x, 1000);
        const auto b = align_and_count(inv, inv, 1000);
        if (a.bit_errors != 0 || b.bit_errors != 0 || a.alignment.delay != b.alignment.delay) return false;
    }
    return true;
}

bool check_back_to_back() {
    LinkRunConfig cfg;
    cfg.geometry.fiber_length_km = 0.0;
    cfg.equalizer.kind = EqualizerKind::none;
    cfg.n_symbols_eval = 100000;
    const BerReport r = run_link(cfg);
    return r.synced && r.bit_errors == 0 && r.bits_counted > 90000;
}

bool check_bn_fold() {
    CnnModel m = CnnModel::he_init(CnnConfig::demonstrator(), 3);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto& l : m.layers)
        if (l.bn)
            for (std::size_t c = 0; c < l.bn->gamma.size(); ++c) {
                l.bn->gamma[c] = 1.0 + u(rng);
                l.bn->beta[c] = u(rng);
                l.bn->running_mean[c] = u(rng);
                l.bn->running_var[c] = 0.5 + std::abs(u(rng));
            }
    SampledSignal x{std::vector<double>(8192), 60e9};
    for (auto& v : x.samples) v = u(rng);
    const auto a = cnn_forward(m, x), b = cnn_forward(bn_fold(m), x);
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a.samples[i] - b.samples[i]) >= 1e-6) return false;
    return true;
}

bool check_streaming() {
    const CnnModel m = bn_fold(CnnModel::he_init(CnnConfig::demonstrator(), 11));
    const auto q = std::make_shared<const QuantizedModel>(quantize_model(m, {8, 6}, {16, 10}));
    std::mt19937_64 rng(13);
    std::vector<std::int32_t> codes(64 * 1024);
    for (auto& c : codes) c = static_cast<std::int32_t>(rng() % 64) - 32;
    const auto batch = quantized_forward(*q, codes);
    for (int n : {1, 2, 4})
        for (std::size_t depth : {std::size_t{2}, std::size_t{1024}}) {
            const auto out = concatenate(run_stream(build(q, n, depth), make_chunks(codes, 1024)).output);
            if (out != batch) return false;
        }
    return run_stream(build(q, 2, 2), {}).output.empty();
}

bool check_config_roundtrip() {
    LinkRunConfig cfg;
    cfg.snr_db = 17.5;
    cfg.equalizer.kind = EqualizerKind::ffe;
    const std::string a = config_to_json(cfg);
    return config_to_json(config_from_json(a)) == a;
}

int selftest() {
    const std::vector<Check> checks = {
        {"align_and_count(x, x) has zero errors, inversion symmetric", check_align_identity},
        {"back-to-back link is error free", check_back_to_back},
        {"batch-norm folding preserves the forward pass", check_bn_fold},
        {"streamed inference equals batch inference", check_streaming},
        {"config JSON round trip", check_config_roundtrip},
    };
    int failures = 0;
    for (const auto& c : checks) {
        bool ok = false;
        try {
            ok = c.run();
        } catch (const std::exception& e) {
            std::fprintf(stderr, "  %s\n", e.what());
        }
        std::printf("%s  %s\n", ok ? "PASS" : "FAIL", c.name.c_str());
        failures += !ok;
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IM/DD link simulator with CNN and FFE equalizers"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    auto add_config_opts = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "Link configuration JSON");
        sub->add_option("--set", overrides, "Override a config value, e.g. geometry.fiber_length_km=10");
    };

    auto* run = app.add_subcommand("run", "Run one link and print the BER report as JSON");
    add_config_opts(run);
    std::string out_dir;
    bool emit = false;
    run->add_flag("--artifacts", emit, "Write histograms, eye and SVG into the output directory");
    run->add_option("-o,--out-dir", out_dir, "Artifact directory (default $IMDD_OUT_DIR or imdd-out)");

    auto* train_cmd = app.add_subcommand("train", "Train the configured equalizer and save the model");
    add_config_opts(train_cmd);
    std::string model_out = "model.json";
    train_cmd->add_option("-m,--model", model_out, "Output model file");
    bool quiet = false;
    train_cmd->add_flag("-q,--quiet", quiet, "No per-epoch progress");

    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep a parameter and write a BER CSV");
    add_config_opts(sweep_cmd);
    std::string parameter = "snr_db", values_text, equalizers_text = "cnn,ffe", csv_out;
    sweep_cmd->add_option("-p,--parameter", parameter, "snr_db | fiber_length_km | word_bits");
    sweep_cmd->add_option("-v,--values", values_text, "Comma list or start:step:stop")->required();
    sweep_cmd->add_option("-e,--equalizers", equalizers_text, "Comma list of none, ffe, cnn");
    sweep_cmd->add_option("-o,--out", csv_out, "CSV file (default <out dir>/ber_sweep.csv)");

    auto* plot_cmd = app.add_subcommand("plot", "Render plots.svg from histogram and sweep CSVs");
    std::string hist_csv, sweep_csv, svg_out;
    plot_cmd->add_option("--histograms", hist_csv, "histograms.csv");
    plot_cmd->add_option("--sweep", sweep_csv, "ber_sweep.csv");
    plot_cmd->add_option("-o,--out", svg_out, "SVG file (default <out dir>/plots.svg)");

    auto* cfg_cmd = app.add_subcommand("config", "Print the effective configuration");
    add_config_opts(cfg_cmd);

    auto* self_cmd = app.add_subcommand("selftest", "Run the built-in invariant checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cfg_cmd) {
            std::cout << config_to_json(load_or_default(config_path, overrides)) << "\n";
        } else if (*run) {
            const LinkRunConfig cfg = load_or_default(config_path, overrides);
            const TrainedEqualizer eq = train_equalizer(cfg);
            const LinkEvaluation ev = evaluate_link(cfg, eq);
            std::cout << report_to_json(ev.report) << "\n";
            if (ev.stream_stats) print_throughput(*ev.stream_stats);
            if (emit) emit_artifacts(ev.report, {}, out_dir.empty() ? default_output_dir() : std::filesystem::path(out_dir));
        } else if (*train_cmd) {
            LinkRunConfig cfg = load_or_default(config_path, overrides);
            if (cfg.equalizer.kind != EqualizerKind::cnn) throw Error("cli", "train needs equalizer.kind=cnn");
            if (cfg.equalizer.cnn.inference == CnnInference::float_path)
                cfg.equalizer.cnn.inference = CnnInference::quantized;  // save both representations
            const TrainedEqualizer eq = train_equalizer(cfg, [&](int epoch, double loss) {
                if (!quiet) std::fprintf(stderr, "epoch %3d  mse %.6f\n", epoch + 1, loss);
            });
            save_model(model_out, to_bundle(eq));
            std::fprintf(stderr, "wrote %s\n", model_out.c_str());
        } else if (*sweep_cmd) {
            const LinkRunConfig cfg = load_or_default(config_path, overrides);
            const auto rows = sweep(cfg, parse_sweep_parameter(parameter), parse_values(values_text),
                                    parse_equalizers(equalizers_text));
            const std::string csv = sweep_to_csv(rows);
            std::filesystem::path target = csv_out;
            if (target.empty()) {
                std::filesystem::create_directories(default_output_dir());
                target = default_output_dir() / "ber_sweep.csv";
            }
            write_text_file(target, csv);
            std::cout << csv;
        } else if (*plot_cmd) {
            if (hist_csv.empty() && sweep_csv.empty()) throw Error("cli", "plot needs --histograms and/or --sweep");
            const HistogramTable h = hist_csv.empty() ? HistogramTable{} : histograms_from_csv(read_text_file(hist_csv));
            const auto rows = sweep_csv.empty() ? std::vector<SweepRow>{} : sweep_from_csv(read_text_file(sweep_csv));
            std::filesystem::path target = svg_out;
            if (target.empty()) {
                std::filesystem::create_directories(default_output_dir());
                target = default_output_dir() / "plots.svg";
            }
            write_text_file(target, render_svg(h, rows));
        } else if (*self_cmd) {
            return selftest();
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
