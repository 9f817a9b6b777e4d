#pragma once

#include <string>
#include <variant>

#include "threatlens/linear.hpp"
#include "threatlens/transformer.hpp"

namespace threatlens {

// Versioned single-file model container (see docs/model_format.md):
// magic "TLMODEL\n", u32 version, u32 type, a JSON config echo, the vocab in
// id order (transformer only) and named little-endian IEEE-754 float64
// tensors. Writing is byte-deterministic for identical model state.

enum class ModelType : std::uint32_t { linear = 1, transformer = 2 };

void save_model(const LinearModel& model, const std::string& path);
void save_model(const TinyTransformer& model, const std::string& path);

ModelType peek_model_type(const std::string& path);

LinearModel load_linear_model(const std::string& path);
TinyTransformer load_transformer_model(const std::string& path);

using AnyModel = std::variant<LinearModel, TinyTransformer>;
AnyModel load_any_model(const std::string& path);

}  // namespace threatlens
