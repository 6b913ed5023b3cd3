#include "imdd/link.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "imdd/channel.hpp"
#include "imdd/clockrec.hpp"

namespace imdd {

namespace {

constexpr std::size_t kEdgeSymbols = 128;  // dropped at both ends before counting
constexpr long long kGuardSymbols = 64;    // keeps the BER delay search non-negative

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint32_t eval_prbs_seed(std::uint64_t master) {
    const std::uint32_t mask = (1u << kEvalPrbsDegree) - 1;
    std::uint32_t s = static_cast<std::uint32_t>(derive_seed(master, seed_lane::eval_prbs)) & mask;
    return s == 0 ? mask : s;
}

SampledSignal transmit_drive(const LinkRunConfig& cfg, std::span<const Bit> bits) {
    const int sps = cfg.geometry.samples_per_symbol();
    const auto symbols = pam2_map(bits);
    SampledSignal drive;
    if (cfg.tx.pulse == PulseShape::nrz) {
        drive = nrz_hold(symbols, sps, cfg.geometry.symbol_rate_baud);
    } else {
        const auto taps = rrc_taps(cfg.tx.rrc_rolloff, cfg.tx.rrc_span_symbols, sps);
        drive = fir_filter(upsample(symbols, sps, cfg.geometry.symbol_rate_baud), taps, FilterMode::same);
        double peak = 0.0;
        for (double v : drive.samples) peak = std::max(peak, std::abs(v));
        if (peak > 0.0)
            for (double& v : drive.samples) v /= peak;
    }
    return quantize_converter(drive, cfg.geometry.dac_bits, cfg.tx.dac_full_scale);
}

std::vector<double> pad_to_stride(std::span<const double> x, std::size_t stride, std::size_t min_len) {
    std::size_t n = std::max(x.size(), min_len);
    n = (n + stride - 1) / stride * stride;
    std::vector<double> out(n, 0.0);
    std::copy(x.begin(), x.end(), out.begin());
    return out;
}

std::vector<std::int32_t> pad_codes(std::span<const std::int32_t> x, std::size_t stride, std::size_t min_len) {
    std::size_t n = std::max(x.size(), min_len);
    n = (n + stride - 1) / stride * stride;
    std::vector<std::int32_t> out(n, 0);
    std::copy(x.begin(), x.end(), out.begin());
    return out;
}

std::vector<double> even_samples(std::span<const double> x) { return downsample(x, 2, 0); }

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t lane) {
    return splitmix64(splitmix64(master_seed) ^ splitmix64(lane * 0xd1b54a32d192ed03ULL));
}

ReceivedSignal simulate_link(const LinkRunConfig& cfg, std::span<const Bit> bits, std::uint64_t noise_seed) {
    cfg.validate();
    const auto& g = cfg.geometry;
    const int sps = g.samples_per_symbol();

    const SampledSignal drive = transmit_drive(cfg, bits);
    ComplexField field = eam_modulate(drive, cfg.eam, 1.0);
    field = cd_apply(field, beta2_from_dispersion(g.dispersion_ps_per_nm_km, g.wavelength_nm), g.fiber_length_km);
    SampledSignal y = square_law_detect(field);
    y = awgn_add(y, NoiseSpec{cfg.snr_db, noise_seed});
    y = normalize(y);
    y = clock_offset(y, cfg.clock.ppm, cfg.clock.phase_ui, sps);
    y = quantize_converter(y, g.adc_bits, cfg.adc_full_scale);

    ReceivedSignal rx;
    std::size_t begin = 0, end = y.size();
    if (cfg.clock.recover) {
        RecoveryResult rec = recover(y, cfg.clock.recovery);
        rx.drift_ppm = rec.drift_ppm;
        begin = rec.corrected.valid_begin;
        end = rec.corrected.valid_end;
        y = std::move(rec.corrected.signal);
    }
    begin += begin % 2;
    if (end <= begin + 2) throw Error("link", "no valid samples after clock recovery");
    end -= (end - begin) % 2;

    rx.trimmed_samples = begin;
    rx.analog.assign(y.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                     y.samples.begin() + static_cast<std::ptrdiff_t>(end));
    rx.codes = converter_codes(rx.analog, g.adc_bits, cfg.adc_full_scale);
    const double scale = std::ldexp(1.0, -(g.adc_bits - 1));
    rx.input.reserve(rx.codes.size());
    for (auto c : rx.codes) rx.input.push_back(c * scale);
    return rx;
}

BitSequence training_bits(const LinkRunConfig& cfg, std::size_t n, std::uint64_t lane) {
    if (cfg.training_source == TrainingSource::prbs15)
        return prbs_generate(kTrainPrbsDegree, prbs_all_ones(kTrainPrbsDegree), n);
    std::mt19937_64 rng(derive_seed(cfg.master_seed, lane));
    BitSequence bits(n);
    for (std::size_t i = 0; i < n; i += 64) {
        const std::uint64_t word = rng();
        for (std::size_t j = 0; j < 64 && i + j < n; ++j) bits[i + j] = static_cast<Bit>((word >> j) & 1u);
    }
    return bits;
}

namespace {

SymbolLag lag_on_even(std::span<const double> input, std::span<const double> symbols, long long max_lag) {
    const long long n_in = static_cast<long long>(input.size() / 2);
    const long long n_sym = static_cast<long long>(symbols.size());
    const long long window = std::min<long long>(16384, n_in);
    double in_mean = 0.0, in_sq = 0.0;
    for (long long k = 0; k < window; ++k) {
        in_mean += input[2 * k];
        in_sq += input[2 * k] * input[2 * k];
    }
    in_mean /= static_cast<double>(std::max<long long>(window, 1));
    in_sq /= static_cast<double>(std::max<long long>(window, 1));
    const double in_std = std::sqrt(std::max(in_sq - in_mean * in_mean, 1e-300));

    SymbolLag best;
    double best_abs = -1.0;
    for (long long lag = -max_lag; lag <= max_lag; ++lag) {
        double acc = 0.0;
        long long used = 0;
        for (long long k = 0; k < window; ++k) {
            const long long s = k + lag;
            if (s < 0 || s >= n_sym) continue;
            acc += (input[2 * k] - in_mean) * symbols[s];
            ++used;
        }
        if (used < window / 2) continue;
        const double v = std::abs(acc) / static_cast<double>(used);
        if (v > best_abs) {
            best_abs = v;
            best = {lag, acc < 0.0, 0, v / in_std};
        }
    }
    if (best_abs < 0.0) throw Error("link", "signal too short to resolve the symbol lag");
    return best;
}

}  // namespace

SymbolLag resolve_symbol_lag(std::span<const double> input, std::span<const double> symbols, long long max_lag) {
    if (input.size() < 4) throw Error("link", "signal too short to resolve the symbol lag");
    const SymbolLag even = lag_on_even(input, symbols, max_lag);
    SymbolLag odd = lag_on_even(input.subspan(1), symbols, max_lag);
    odd.phase = 1;
    return odd.correlation > even.correlation ? odd : even;
}

TrainingSet make_training_set(std::span<const double> input, std::span<const double> symbols, const SymbolLag& lag) {
    const long long n_in = static_cast<long long>(input.size() / 2);
    const long long n_sym = static_cast<long long>(symbols.size());
    const long long k0 = std::max<long long>(0, -lag.lag);
    const long long k1 = std::min<long long>(n_in, n_sym - lag.lag);
    if (k1 - k0 < 1024) throw Error("link", "too few aligned training symbols");
    TrainingSet set;
    set.samples.assign(input.begin() + 2 * k0, input.begin() + 2 * k1);
    set.labels.reserve(static_cast<std::size_t>(k1 - k0));
    const double sign = lag.inverted ? -1.0 : 1.0;
    for (long long k = k0; k < k1; ++k) set.labels.push_back(sign * symbols[k + lag.lag]);
    return set;
}

TrainedEqualizer train_equalizer(const LinkRunConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    TrainedEqualizer eq;
    eq.kind = cfg.equalizer.kind;
    if (eq.kind == EqualizerKind::none) return eq;

    const auto& ccfg = cfg.equalizer.cnn;
    // Calibration: the training input, when this run produced it.
    auto finish_cnn = [&](TrainedEqualizer& t, std::span<const double> calibration) {
        if (ccfg.inference != CnnInference::float_path && !t.quantized_model) {
            if (!t.float_model) throw Error("link", "no float model to quantize");
            QuantizationReport qr;
            t.quantized_model = quantize_model(*t.float_model, ccfg.weight_fmt, ccfg.act_fmt, ccfg.act_fmt, calibration, &qr);
            t.quantized_model->input_fmt = {cfg.geometry.adc_bits, cfg.geometry.adc_bits - 1};
            t.diagnostics["rescaled_channels"] = static_cast<double>(qr.rescaled_channels);
            t.diagnostics["calibrated_layers"] = static_cast<double>(qr.calibrated_layers);
            t.diagnostics["saturated_weights"] = static_cast<double>(qr.saturated_weights);
            t.diagnostics["saturated_biases"] = static_cast<double>(qr.saturated_biases);
        }
        if (ccfg.inference == CnnInference::float_path && !t.float_model)
            throw Error("link", "float inference needs a float model");
        t.diagnostics["macs_per_symbol"] = mac_count(ccfg.topology);
    };

    if (eq.kind == EqualizerKind::cnn && !ccfg.model_path.empty()) {
        ModelBundle bundle = load_model(ccfg.model_path);
        if (bundle.float_model) {
            if (!(bundle.float_model->config == ccfg.topology))
                throw Error("link", "model file topology differs from the configured topology");
            eq.float_model = bundle.float_model->has_batch_norm() ? bn_fold(*bundle.float_model) : *bundle.float_model;
        }
        if (bundle.quantized_model && ccfg.inference != CnnInference::float_path)
            eq.quantized_model = std::move(bundle.quantized_model);
        finish_cnn(eq, {});
        return eq;
    }

    const BitSequence bits = training_bits(cfg, cfg.n_symbols_train, seed_lane::training_bits);
    const SymbolSequence symbols = pam2_map(bits);
    const ReceivedSignal rx = simulate_link(cfg, bits, derive_seed(cfg.master_seed, seed_lane::train_noise));
    const SymbolLag lag = resolve_symbol_lag(rx.input, symbols);
    const TrainingSet set = make_training_set(rx.input, symbols, lag);

    if (eq.kind == EqualizerKind::ffe) {
        const FfeConfig fcfg = cfg.resolved_ffe();
        const FfeResult r = ffe_equalize(fcfg, SampledSignal{set.samples, cfg.geometry.converter_rate_hz}, set.labels);
        eq.ffe_taps = r.taps;
        eq.diagnostics["ffe_taps"] = fcfg.num_taps;
        eq.diagnostics["ffe_mse"] = r.converged_mse;
        return eq;
    }

    TrainingHyper hyper = cfg.training;
    hyper.seed = derive_seed(cfg.master_seed, seed_lane::training);
    const CnnModel init = CnnModel::he_init(ccfg.topology, hyper.seed);
    TrainResult tr = train(init, set, hyper, on_epoch);
    eq.loss_curve = tr.loss_curve;
    eq.float_model = bn_fold(tr.model);
    if (!tr.loss_curve.empty()) eq.diagnostics["train_mse"] = tr.loss_curve.back();

    // Held-out validation on a fresh noise realization.
    {
        const std::size_t n_val = std::max<std::size_t>(cfg.n_symbols_train / 2, 4096);
        const BitSequence vbits = training_bits(cfg, n_val, seed_lane::validation_bits);
        const SymbolSequence vsym = pam2_map(vbits);
        const ReceivedSignal vrx = simulate_link(cfg, vbits, derive_seed(cfg.master_seed, seed_lane::validation_noise));
        const TrainingSet vset = make_training_set(vrx.input, vsym, resolve_symbol_lag(vrx.input, vsym));
        const auto stride = static_cast<std::size_t>(ccfg.topology.total_stride());
        const auto x = pad_to_stride(vset.samples, stride, static_cast<std::size_t>(ccfg.topology.receptive_margin()));
        const SampledSignal y = cnn_forward(*eq.float_model, SampledSignal{x, cfg.geometry.converter_rate_hz});
        double se = 0.0;
        for (std::size_t k = 0; k < vset.labels.size(); ++k) {
            const double e = y.samples[2 * k] - vset.labels[k];
            se += e * e;
        }
        eq.diagnostics["validation_mse"] = se / static_cast<double>(vset.labels.size());
    }
    finish_cnn(eq, set.samples);
    return eq;
}

EqualizerOutput apply_equalizer(const LinkRunConfig& cfg, const TrainedEqualizer& eq, const ReceivedSignal& rx) {
    EqualizerOutput out;
    const std::size_t n = rx.input.size();
    switch (eq.kind) {
        case EqualizerKind::none:
            out.samples = rx.input;
            return out;
        case EqualizerKind::ffe:
            out.samples = ffe_apply(eq.ffe_taps, SampledSignal{rx.input, cfg.geometry.converter_rate_hz}).samples;
            return out;
        case EqualizerKind::cnn:
            break;
    }
    const auto& ccfg = cfg.equalizer.cnn;
    const auto stride = static_cast<std::size_t>(ccfg.topology.total_stride());
    const auto margin = static_cast<std::size_t>(ccfg.topology.receptive_margin());
    if (ccfg.inference == CnnInference::float_path) {
        const auto x = pad_to_stride(rx.input, stride, margin);
        out.samples = cnn_forward(*eq.float_model, SampledSignal{x, cfg.geometry.converter_rate_hz}).samples;
        out.samples.resize(n);
        return out;
    }
    const QuantizedModel& q = *eq.quantized_model;
    const auto codes = pad_codes(rx.codes, stride, margin);
    std::vector<std::int32_t> raw;
    if (ccfg.inference == CnnInference::quantized) {
        QuantizedStats stats;
        raw = quantized_forward(q, codes, &stats);
        out.saturations = stats.saturations;
    } else {
        const StageGraph graph = build(std::make_shared<const QuantizedModel>(q), ccfg.instances, ccfg.queue_depth);
        const auto chunks = make_chunks(codes, ccfg.chunk_samples);
        StreamResult sr = run_stream(graph, chunks);
        raw = concatenate(sr.output);
        out.saturations = sr.stats.saturations;
        out.stream_stats = std::move(sr.stats);
    }
    raw.resize(n);
    out.samples = dequantize_output(q, raw);
    return out;
}

LinkEvaluation evaluate_link(const LinkRunConfig& cfg, const TrainedEqualizer& eq) {
    const BitSequence bits = prbs_generate(kEvalPrbsDegree, eval_prbs_seed(cfg.master_seed), cfg.n_symbols_eval);
    const SymbolSequence symbols = pam2_map(bits);
    const ReceivedSignal rx = simulate_link(cfg, bits, derive_seed(cfg.master_seed, seed_lane::eval_noise));
    const SymbolLag lag = resolve_symbol_lag(rx.input, symbols);

    EqualizerOutput eo = apply_equalizer(cfg, eq, rx);
    const std::size_t n_sym = eo.samples.size() / 2;
    if (n_sym <= 2 * kEdgeSymbols) throw Error("link", "evaluation stream too short");

    LinkEvaluation ev;
    ev.stream_stats = std::move(eo.stream_stats);
    const auto post_all = even_samples(eo.samples);
    ev.post_samples.assign(post_all.begin() + kEdgeSymbols, post_all.end() - kEdgeSymbols);
    ev.decisions = downsample_decide(eo.samples);
    const BitSequence received(ev.decisions.begin() + kEdgeSymbols, ev.decisions.end() - kEdgeSymbols);

    const long long guard =
        std::clamp<long long>(static_cast<long long>(kEdgeSymbols) + lag.lag + kGuardSymbols, 0,
                              static_cast<long long>(bits.size()));
    const std::span<const Bit> reference = std::span<const Bit>(bits).subspan(static_cast<std::size_t>(guard));

    const std::string tag = eq.kind == EqualizerKind::cnn && cfg.equalizer.cnn.inference != CnnInference::float_path
                                ? "cnn-" + to_string(cfg.equalizer.cnn.inference)
                                : to_string(eq.kind);
    try {
        ev.report = align_and_count(reference, received, cfg.max_delay);
        ev.report.equalizer = tag;
    } catch (const NoSyncError&) {
        ev.report = no_sync_report(tag);
    }

    const int phase = lag.phase;
    const auto pre_analog = downsample(rx.analog, 2, phase);
    const std::span<const double> pre(pre_analog.data() + kEdgeSymbols, pre_analog.size() - 2 * kEdgeSymbols);
    ev.report.pre_histogram = make_histogram(pre);
    ev.report.post_histogram = make_histogram(ev.post_samples);
    ev.report.pre_center_mass = center_mass(pre);
    ev.report.post_center_mass = center_mass(ev.post_samples);
    ev.report.eye = make_eye(std::span<const double>(rx.analog).subspan(2 * kEdgeSymbols,
                                                                        rx.analog.size() - 4 * kEdgeSymbols));
    ev.report.diagnostics = eq.diagnostics;
    ev.report.diagnostics["symbol_lag"] = static_cast<double>(lag.lag);
    ev.report.diagnostics["pre_decision_phase"] = phase;
    if (cfg.clock.recover) ev.report.diagnostics["drift_ppm"] = rx.drift_ppm;
    if (eo.saturations) ev.report.diagnostics["inference_saturations"] = static_cast<double>(eo.saturations);
    return ev;
}

BerReport run_link(const LinkRunConfig& cfg) { return evaluate_link(cfg, train_equalizer(cfg)).report; }

ModelBundle to_bundle(const TrainedEqualizer& eq) {
    if (eq.kind != EqualizerKind::cnn) throw Error("link", "only CNN equalizers can be saved as a model");
    ModelBundle b;
    b.float_model = eq.float_model;
    b.quantized_model = eq.quantized_model;
    return b;
}

}  // namespace imdd
