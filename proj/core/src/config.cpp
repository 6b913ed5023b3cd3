#include "imdd/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace imdd {

using nlohmann::ordered_json;

namespace {

ordered_json format_json(const FixedPointFormat& f) { return {{"word_bits", f.word_bits}, {"frac_bits", f.frac_bits}}; }

FixedPointFormat format_from(const ordered_json& j) {
    return {j.at("word_bits").get<int>(), j.at("frac_bits").get<int>()};
}

ordered_json to_doc(const LinkRunConfig& c) {
    ordered_json j;
    j["version"] = c.version;
    j["geometry"] = {{"fiber_length_km", c.geometry.fiber_length_km},
                     {"wavelength_nm", c.geometry.wavelength_nm},
                     {"dispersion_ps_per_nm_km", c.geometry.dispersion_ps_per_nm_km},
                     {"symbol_rate_baud", c.geometry.symbol_rate_baud},
                     {"converter_rate_hz", c.geometry.converter_rate_hz},
                     {"adc_bits", c.geometry.adc_bits},
                     {"dac_bits", c.geometry.dac_bits}};
    j["tx"] = {{"pulse", c.tx.pulse == PulseShape::nrz ? "nrz" : "rrc"},
               {"rrc_rolloff", c.tx.rrc_rolloff},
               {"rrc_span_symbols", c.tx.rrc_span_symbols},
               {"dac_full_scale", c.tx.dac_full_scale}};
    j["eam"] = {{"mode", c.eam.mode == EamMode::linear ? "linear" : "tanh"},
                {"saturation_scale", c.eam.saturation_scale},
                {"extinction_floor", c.eam.extinction_floor}};
    j["noise"] = {{"snr_db", std::isinf(c.snr_db) ? ordered_json(nullptr) : ordered_json(c.snr_db)}};
    j["clock"] = {{"ppm", c.clock.ppm},
                  {"phase_ui", c.clock.phase_ui},
                  {"recover", c.clock.recover},
                  {"block_len_symbols", c.clock.recovery.block_len_symbols},
                  {"internal_oversampling", c.clock.recovery.internal_oversampling},
                  {"interpolator", std::string(to_string(c.clock.recovery.interpolator))},
                  {"estimator_lowpass", c.clock.recovery.estimator_lowpass}};
    j["adc_full_scale"] = c.adc_full_scale;

    ordered_json topo = ordered_json::array();
    for (const auto& l : c.equalizer.cnn.topology.layers)
        topo.push_back({{"in_ch", l.in_ch}, {"out_ch", l.out_ch}, {"kernel", l.kernel}, {"stride", l.stride},
                        {"bn_relu", l.bn_relu}});
    j["equalizer"] = {
        {"kind", to_string(c.equalizer.kind)},
        {"cnn",
         {{"topology", topo},
          {"weight_format", format_json(c.equalizer.cnn.weight_fmt)},
          {"activation_format", format_json(c.equalizer.cnn.act_fmt)},
          {"inference", to_string(c.equalizer.cnn.inference)},
          {"instances", c.equalizer.cnn.instances},
          {"queue_depth", c.equalizer.cnn.queue_depth},
          {"chunk_samples", c.equalizer.cnn.chunk_samples},
          {"model_path", c.equalizer.cnn.model_path}}},
        {"ffe",
         {{"num_taps", c.equalizer.ffe.num_taps},
          {"step_size", c.equalizer.ffe.step_size},
          {"reference_delay", c.equalizer.ffe.reference_delay},
          {"passes", c.equalizer.ffe.passes}}}};
    j["training"] = {{"learning_rate", c.training.learning_rate}, {"batch_windows", c.training.batch_windows},
                     {"window_symbols", c.training.window_symbols}, {"epochs", c.training.epochs},
                     {"bn_momentum", c.training.bn_momentum},     {"cosine_decay", c.training.cosine_decay},
                     {"source", c.training_source == TrainingSource::random ? "random" : "prbs15"}};
    j["n_symbols_train"] = c.n_symbols_train;
    j["n_symbols_eval"] = c.n_symbols_eval;
    j["master_seed"] = c.master_seed;
    j["max_delay"] = c.max_delay;
    return j;
}

LinkRunConfig from_doc(const ordered_json& j) {
    LinkRunConfig c;
    c.version = j.at("version").get<int>();
    const auto& g = j.at("geometry");
    c.geometry.fiber_length_km = g.at("fiber_length_km").get<double>();
    c.geometry.wavelength_nm = g.at("wavelength_nm").get<double>();
    c.geometry.dispersion_ps_per_nm_km = g.at("dispersion_ps_per_nm_km").get<double>();
    c.geometry.symbol_rate_baud = g.at("symbol_rate_baud").get<double>();
    c.geometry.converter_rate_hz = g.at("converter_rate_hz").get<double>();
    c.geometry.adc_bits = g.at("adc_bits").get<int>();
    c.geometry.dac_bits = g.at("dac_bits").get<int>();

    const auto& tx = j.at("tx");
    const auto pulse = tx.at("pulse").get<std::string>();
    if (pulse == "nrz") c.tx.pulse = PulseShape::nrz;
    else if (pulse == "rrc") c.tx.pulse = PulseShape::rrc;
    else throw Error("config", "tx.pulse must be 'nrz' or 'rrc'");
    c.tx.rrc_rolloff = tx.at("rrc_rolloff").get<double>();
    c.tx.rrc_span_symbols = tx.at("rrc_span_symbols").get<int>();
    c.tx.dac_full_scale = tx.at("dac_full_scale").get<double>();

    const auto& eam = j.at("eam");
    const auto mode = eam.at("mode").get<std::string>();
    if (mode == "linear") c.eam.mode = EamMode::linear;
    else if (mode == "tanh") c.eam.mode = EamMode::tanh;
    else throw Error("config", "eam.mode must be 'linear' or 'tanh'");
    c.eam.saturation_scale = eam.at("saturation_scale").get<double>();
    c.eam.extinction_floor = eam.at("extinction_floor").get<double>();

    // A null snr_db is removed by the merge patch; absent means noiseless.
    const auto& noise = j.at("noise");
    c.snr_db = !noise.contains("snr_db") || noise.at("snr_db").is_null() ? std::numeric_limits<double>::infinity()
                                                                          : noise.at("snr_db").get<double>();

    const auto& clk = j.at("clock");
    c.clock.ppm = clk.at("ppm").get<double>();
    c.clock.phase_ui = clk.at("phase_ui").get<double>();
    c.clock.recover = clk.at("recover").get<bool>();
    c.clock.recovery.block_len_symbols = clk.at("block_len_symbols").get<int>();
    c.clock.recovery.internal_oversampling = clk.at("internal_oversampling").get<int>();
    c.clock.recovery.interpolator = parse_interpolator(clk.at("interpolator").get<std::string>());
    c.clock.recovery.estimator_lowpass = clk.at("estimator_lowpass").get<double>();
    c.adc_full_scale = j.at("adc_full_scale").get<double>();

    const auto& eq = j.at("equalizer");
    c.equalizer.kind = parse_equalizer_kind(eq.at("kind").get<std::string>());
    const auto& cnn = eq.at("cnn");
    c.equalizer.cnn.topology.layers.clear();
    for (const auto& l : cnn.at("topology"))
        c.equalizer.cnn.topology.layers.push_back({l.at("in_ch").get<int>(), l.at("out_ch").get<int>(),
                                                   l.at("kernel").get<int>(), l.at("stride").get<int>(),
                                                   l.at("bn_relu").get<bool>()});
    c.equalizer.cnn.weight_fmt = format_from(cnn.at("weight_format"));
    c.equalizer.cnn.act_fmt = format_from(cnn.at("activation_format"));
    c.equalizer.cnn.inference = parse_inference(cnn.at("inference").get<std::string>());
    c.equalizer.cnn.instances = cnn.at("instances").get<int>();
    c.equalizer.cnn.queue_depth = cnn.at("queue_depth").get<std::size_t>();
    c.equalizer.cnn.chunk_samples = cnn.at("chunk_samples").get<std::size_t>();
    c.equalizer.cnn.model_path = cnn.at("model_path").get<std::string>();
    const auto& ffe = eq.at("ffe");
    c.equalizer.ffe.num_taps = ffe.at("num_taps").get<int>();
    c.equalizer.ffe.step_size = ffe.at("step_size").get<double>();
    c.equalizer.ffe.reference_delay = ffe.at("reference_delay").get<int>();
    c.equalizer.ffe.passes = ffe.at("passes").get<int>();

    const auto& tr = j.at("training");
    c.training.learning_rate = tr.at("learning_rate").get<double>();
    c.training.batch_windows = tr.at("batch_windows").get<int>();
    c.training.window_symbols = tr.at("window_symbols").get<int>();
    c.training.epochs = tr.at("epochs").get<int>();
    c.training.bn_momentum = tr.at("bn_momentum").get<double>();
    c.training.cosine_decay = tr.at("cosine_decay").get<bool>();
    const auto source = tr.at("source").get<std::string>();
    if (source == "random") c.training_source = TrainingSource::random;
    else if (source == "prbs15") c.training_source = TrainingSource::prbs15;
    else throw Error("config", "training.source must be 'random' or 'prbs15'");

    c.n_symbols_train = j.at("n_symbols_train").get<std::size_t>();
    c.n_symbols_eval = j.at("n_symbols_eval").get<std::size_t>();
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.max_delay = j.at("max_delay").get<std::size_t>();
    return c;
}

bool compatible(const ordered_json& schema, const ordered_json& value, const std::string& path) {
    if (path == "noise.snr_db") return value.is_null() || value.is_number();
    if (schema.is_number_float()) return value.is_number();
    if (schema.is_number_integer()) return value.is_number_integer();
    return schema.type() == value.type();
}

void check_schema(const ordered_json& schema, const ordered_json& doc, const std::string& prefix) {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!schema.contains(it.key())) throw Error("config", "unknown key '" + path + "'");
        const auto& s = schema.at(it.key());
        if (!compatible(s, it.value(), path)) throw Error("config", "type mismatch at '" + path + "'");
        if (s.is_object()) check_schema(s, it.value(), path);
    }
}

void set_path(ordered_json& doc, const ordered_json& schema, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw Error("config", "override must look like path=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    ordered_json value;
    try {
        value = ordered_json::parse(raw);
    } catch (const ordered_json::exception&) {
        value = raw;  // bare string
    }

    ordered_json* node = &doc;
    const ordered_json* snode = &schema;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!snode->is_object() || !snode->contains(key)) throw Error("config", "unknown key '" + path + "'");
        snode = &snode->at(key);
        if (dot == std::string::npos) {
            if (!compatible(*snode, value, path)) throw Error("config", "type mismatch at '" + path + "'");
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

LinkRunConfig parse_doc(ordered_json doc, const std::vector<std::string>& overrides) {
    if (!doc.is_object()) throw Error("config", "config must be a JSON object");
    if (!doc.contains("version")) throw Error("config", "missing mandatory 'version' field");
    const ordered_json schema = to_doc(LinkRunConfig{});
    check_schema(schema, doc, "");
    if (doc.at("version").get<int>() != kConfigVersion)
        throw Error("config", "unsupported config version " + doc.at("version").dump());
    ordered_json merged = schema;
    merged.merge_patch(doc);
    for (const auto& o : overrides) set_path(merged, schema, o);
    LinkRunConfig cfg;
    try {
        cfg = from_doc(merged);
    } catch (const ordered_json::exception& e) {
        throw Error("config", std::string("schema violation: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

}  // namespace

std::string to_string(EqualizerKind kind) {
    switch (kind) {
        case EqualizerKind::none: return "none";
        case EqualizerKind::ffe: return "ffe";
        case EqualizerKind::cnn: return "cnn";
    }
    return "?";
}

EqualizerKind parse_equalizer_kind(const std::string& name) {
    if (name == "none") return EqualizerKind::none;
    if (name == "ffe") return EqualizerKind::ffe;
    if (name == "cnn") return EqualizerKind::cnn;
    throw Error("config", "equalizer kind must be none, ffe or cnn (got '" + name + "')");
}

std::string to_string(CnnInference mode) {
    switch (mode) {
        case CnnInference::float_path: return "float";
        case CnnInference::quantized: return "quantized";
        case CnnInference::streamed: return "streamed";
    }
    return "?";
}

CnnInference parse_inference(const std::string& name) {
    if (name == "float") return CnnInference::float_path;
    if (name == "quantized") return CnnInference::quantized;
    if (name == "streamed") return CnnInference::streamed;
    throw Error("config", "inference must be float, quantized or streamed (got '" + name + "')");
}

void LinkRunConfig::validate() const {
    if (version != kConfigVersion) throw Error("config", "unsupported config version");
    geometry.validate();
    if (geometry.samples_per_symbol() != kRecoverySps)
        throw Error("config", "the receiver chain runs at 2 samples per symbol");
    eam.validate();
    if (tx.rrc_rolloff <= 0.0 || tx.rrc_rolloff > 1.0) throw Error("config", "tx.rrc_rolloff must be in (0, 1]");
    if (tx.rrc_span_symbols < 2) throw Error("config", "tx.rrc_span_symbols must be >= 2");
    if (!(tx.dac_full_scale > 0.0)) throw Error("config", "tx.dac_full_scale must be > 0");
    if (std::isnan(snr_db)) throw Error("config", "noise.snr_db must be a number or null");
    if (std::abs(clock.ppm) > 500.0) throw Error("config", "clock.ppm must be within +-500");
    if (!(clock.phase_ui >= 0.0 && clock.phase_ui < 1.0)) throw Error("config", "clock.phase_ui must be in [0, 1)");
    clock.recovery.validate();
    if (!(adc_full_scale > 0.0)) throw Error("config", "adc_full_scale must be > 0");
    equalizer.cnn.topology.validate();
    equalizer.cnn.weight_fmt.validate();
    equalizer.cnn.act_fmt.validate();
    if (equalizer.cnn.instances < 1) throw Error("config", "equalizer.cnn.instances must be >= 1");
    if (equalizer.cnn.queue_depth < 2) throw Error("config", "equalizer.cnn.queue_depth must be >= 2");
    if (equalizer.cnn.chunk_samples == 0 ||
        equalizer.cnn.chunk_samples % static_cast<std::size_t>(equalizer.cnn.topology.total_stride()) != 0)
        throw Error("config", "equalizer.cnn.chunk_samples must be a positive multiple of the total stride");
    resolved_ffe().validate();
    if (training.batch_windows < 1 || training.window_symbols < 8 || training.epochs < 1 ||
        !(training.learning_rate > 0.0))
        throw Error("config", "invalid training hyperparameters");
    if (n_symbols_train < 4096) throw Error("config", "n_symbols_train must be >= 4096");
    if (n_symbols_eval < 2 * max_delay + 4096) throw Error("config", "n_symbols_eval must exceed 2*max_delay + 4096");
}

FfeConfig LinkRunConfig::resolved_ffe() const {
    FfeConfig f = equalizer.ffe;
    if (f.num_taps == 0) f.num_taps = ffe_taps_for_complexity(mac_count(equalizer.cnn.topology));
    return f;
}

std::string config_to_json(const LinkRunConfig& cfg, int indent) { return to_doc(cfg).dump(indent); }

LinkRunConfig config_from_json(const std::string& text, const std::vector<std::string>& overrides) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const ordered_json::exception& e) {
        throw Error("config", std::string("malformed JSON: ") + e.what());
    }
    return parse_doc(std::move(doc), overrides);
}

LinkRunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("config", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str(), overrides);
}

LinkRunConfig apply_overrides(const LinkRunConfig& cfg, const std::vector<std::string>& overrides) {
    return parse_doc(to_doc(cfg), overrides);
}

}  // namespace imdd
