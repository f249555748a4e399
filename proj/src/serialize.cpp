#include "afhn/serialize.hpp"

#include "afhn/errors.hpp"

namespace afhn {

nlohmann::json tensor_to_json(const Tensor& t) {
    nlohmann::json j;
    j["rows"] = t.rows();
    j["cols"] = t.cols();
    j["data"] = t.vec();
    return j;
}

Tensor tensor_from_json(const nlohmann::json& j) {
    const std::size_t rows = j.at("rows").get<std::size_t>();
    const std::size_t cols = j.at("cols").get<std::size_t>();
    auto data = j.at("data").get<std::vector<double>>();
    return Tensor::from(rows, cols, std::move(data));
}

nlohmann::json hyper_to_json(const HyperParams& hp) {
    return nlohmann::json{
        {"lambda_gp", hp.lambda_gp}, {"alpha_cr", hp.alpha_cr},
        {"beta_ar", hp.beta_ar},     {"d_s", hp.d_s},
        {"d_z", hp.d_z},             {"h", hp.h},
        {"leaky_slope", hp.leaky_slope}, {"k_prime", hp.k_prime},
        {"epsilon_ar", hp.epsilon_ar},
    };
}

HyperParams hyper_from_json(const nlohmann::json& j) {
    HyperParams hp;
    hp.lambda_gp = j.at("lambda_gp").get<double>();
    hp.alpha_cr = j.at("alpha_cr").get<double>();
    hp.beta_ar = j.at("beta_ar").get<double>();
    hp.d_s = j.at("d_s").get<std::size_t>();
    hp.d_z = j.at("d_z").get<std::size_t>();
    hp.h = j.at("h").get<std::size_t>();
    hp.leaky_slope = j.at("leaky_slope").get<double>();
    hp.k_prime = j.at("k_prime").get<std::size_t>();
    hp.epsilon_ar = j.at("epsilon_ar").get<double>();
    hp.validate();
    return hp;
}

nlohmann::json adam_to_json(const AdamState& s) {
    nlohmann::json j;
    j["step"] = s.step;
    j["beta1"] = s.beta1;
    j["beta2"] = s.beta2;
    j["epsilon"] = s.epsilon;
    j["m"] = nlohmann::json::array();
    j["v"] = nlohmann::json::array();
    for (const Tensor& t : s.m) j["m"].push_back(tensor_to_json(t));
    for (const Tensor& t : s.v) j["v"].push_back(tensor_to_json(t));
    return j;
}

AdamState adam_from_json(const nlohmann::json& j) {
    AdamState s;
    s.step = j.at("step").get<long>();
    s.beta1 = j.at("beta1").get<double>();
    s.beta2 = j.at("beta2").get<double>();
    s.epsilon = j.at("epsilon").get<double>();
    for (const auto& t : j.at("m")) s.m.push_back(tensor_from_json(t));
    for (const auto& t : j.at("v")) s.v.push_back(tensor_from_json(t));
    return s;
}

}  // namespace afhn
