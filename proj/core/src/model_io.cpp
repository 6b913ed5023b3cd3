#include "imdd/model_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace imdd {

using nlohmann::json;

namespace {

constexpr const char* kFormatTag = "imdd-cnn-equalizer";

json format_json(const FixedPointFormat& f) { return {{"word_bits", f.word_bits}, {"frac_bits", f.frac_bits}}; }

FixedPointFormat format_from(const json& j) {
    FixedPointFormat f{j.at("word_bits").get<int>(), j.at("frac_bits").get<int>()};
    f.validate();
    return f;
}

json topology_json(const CnnConfig& cfg) {
    json layers = json::array();
    for (const auto& l : cfg.layers)
        layers.push_back({{"in_ch", l.in_ch}, {"out_ch", l.out_ch}, {"kernel", l.kernel}, {"stride", l.stride},
                          {"bn_relu", l.bn_relu}});
    return layers;
}

CnnConfig topology_from(const json& j) {
    CnnConfig cfg;
    for (const auto& l : j)
        cfg.layers.push_back({l.at("in_ch").get<int>(), l.at("out_ch").get<int>(), l.at("kernel").get<int>(),
                              l.at("stride").get<int>(), l.at("bn_relu").get<bool>()});
    cfg.validate();
    return cfg;
}

}  // namespace

std::string model_to_json(const ModelBundle& bundle) {
    const CnnConfig* cfg = bundle.float_model ? &bundle.float_model->config
                           : bundle.quantized_model ? &bundle.quantized_model->config
                                                    : nullptr;
    if (!cfg) throw Error("model_io", "bundle holds no model");
    if (bundle.float_model && bundle.quantized_model && !(bundle.float_model->config == bundle.quantized_model->config))
        throw Error("model_io", "float and quantized topologies differ");

    json doc;
    doc["format"] = kFormatTag;
    doc["version"] = kModelFormatVersion;
    doc["topology"] = topology_json(*cfg);
    if (bundle.float_model) {
        json layers = json::array();
        for (const auto& l : bundle.float_model->layers) {
            json jl{{"weights", l.weights}, {"bias", l.bias}};
            if (l.bn)
                jl["batch_norm"] = {{"gamma", l.bn->gamma},
                                    {"beta", l.bn->beta},
                                    {"running_mean", l.bn->running_mean},
                                    {"running_var", l.bn->running_var},
                                    {"eps", l.bn->eps}};
            else
                jl["batch_norm"] = nullptr;
            layers.push_back(std::move(jl));
        }
        doc["float_model"] = {{"layers", std::move(layers)}};
    }
    if (bundle.quantized_model) {
        const QuantizedModel& q = *bundle.quantized_model;
        json layers = json::array();
        for (const auto& l : q.layers)
            layers.push_back({{"weight_format", format_json(l.weight_fmt)},
                              {"bias_format", format_json(l.bias_fmt)},
                              {"activation_format", format_json(l.act_fmt)},
                              {"weights", l.weights},
                              {"bias", l.bias}});
        std::vector<int> shift = q.output_shift;
        if (shift.empty()) shift.assign(static_cast<std::size_t>(q.layers.back().spec.out_ch), 0);
        doc["quantized_model"] = {
            {"input_format", format_json(q.input_fmt)}, {"layers", std::move(layers)}, {"output_shift", shift}};
    }
    return doc.dump(1);
}

ModelBundle model_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error("model_io", std::string("malformed JSON: ") + e.what());
    }
    if (!doc.contains("version")) throw Error("model_io", "missing mandatory 'version' field");
    if (doc.value("format", std::string{}) != kFormatTag) throw Error("model_io", "not an equalizer model document");
    if (doc.at("version").get<int>() != kModelFormatVersion)
        throw Error("model_io", "unsupported model version " + doc.at("version").dump());

    ModelBundle bundle;
    try {
        const CnnConfig cfg = topology_from(doc.at("topology"));
        if (doc.contains("float_model")) {
            CnnModel m;
            m.config = cfg;
            const auto& layers = doc.at("float_model").at("layers");
            if (layers.size() != cfg.layers.size()) throw Error("model_io", "layer count mismatch");
            for (std::size_t i = 0; i < layers.size(); ++i) {
                ConvLayer l;
                l.spec = cfg.layers[i];
                l.weights = layers[i].at("weights").get<std::vector<double>>();
                l.bias = layers[i].at("bias").get<std::vector<double>>();
                const auto& bn = layers[i].at("batch_norm");
                if (!bn.is_null()) {
                    BatchNorm b;
                    b.gamma = bn.at("gamma").get<std::vector<double>>();
                    b.beta = bn.at("beta").get<std::vector<double>>();
                    b.running_mean = bn.at("running_mean").get<std::vector<double>>();
                    b.running_var = bn.at("running_var").get<std::vector<double>>();
                    b.eps = bn.at("eps").get<double>();
                    l.bn = std::move(b);
                }
                m.layers.push_back(std::move(l));
            }
            m.validate();
            bundle.float_model = std::move(m);
        }
        if (doc.contains("quantized_model")) {
            QuantizedModel q;
            q.config = cfg;
            const auto& jq = doc.at("quantized_model");
            q.input_fmt = format_from(jq.at("input_format"));
            const auto& layers = jq.at("layers");
            if (layers.size() != cfg.layers.size()) throw Error("model_io", "layer count mismatch");
            for (std::size_t i = 0; i < layers.size(); ++i) {
                QuantizedLayer l;
                l.spec = cfg.layers[i];
                l.weight_fmt = format_from(layers[i].at("weight_format"));
                l.bias_fmt = format_from(layers[i].at("bias_format"));
                l.act_fmt = format_from(layers[i].at("activation_format"));
                l.weights = layers[i].at("weights").get<std::vector<std::int32_t>>();
                l.bias = layers[i].at("bias").get<std::vector<std::int32_t>>();
                q.layers.push_back(std::move(l));
            }
            if (jq.contains("output_shift")) q.output_shift = jq.at("output_shift").get<std::vector<int>>();
            q.validate();
            bundle.quantized_model = std::move(q);
        }
    } catch (const json::exception& e) {
        throw Error("model_io", std::string("schema violation: ") + e.what());
    }
    if (!bundle.float_model && !bundle.quantized_model) throw Error("model_io", "document holds no model");
    return bundle;
}

void save_model(const std::string& path, const ModelBundle& bundle) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("model_io", "cannot open '" + path + "' for writing");
    out << model_to_json(bundle) << '\n';
    if (!out) throw Error("model_io", "write failed for '" + path + "'");
}

ModelBundle load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("model_io", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace imdd
