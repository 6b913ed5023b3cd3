#pragma once

#include <optional>
#include <string>

#include "imdd/cnn.hpp"
#include "imdd/quantized.hpp"

namespace imdd {

inline constexpr int kModelFormatVersion = 1;

struct ModelBundle {
    std::optional<CnnModel> float_model;
    std::optional<QuantizedModel> quantized_model;
};

/// Self-describing JSON document: format tag, mandatory version, topology,
/// and whichever of the float / integer models are present.
std::string model_to_json(const ModelBundle& bundle);
ModelBundle model_from_json(const std::string& text);

void save_model(const std::string& path, const ModelBundle& bundle);
ModelBundle load_model(const std::string& path);

}  // namespace imdd
