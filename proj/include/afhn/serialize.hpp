#pragma once

#include <json.hpp>

#include "afhn/adam.hpp"
#include "afhn/models.hpp"
#include "afhn/tensor.hpp"

namespace afhn {

nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

nlohmann::json hyper_to_json(const HyperParams& hp);
HyperParams hyper_from_json(const nlohmann::json& j);

nlohmann::json adam_to_json(const AdamState& s);
AdamState adam_from_json(const nlohmann::json& j);

}  // namespace afhn
