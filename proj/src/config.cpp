#include "nex/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace nex {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw std::invalid_argument("unknown config key '" + where + "." + k + "'");
}

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void read_model(const json& j, ModelOptions& m) {
  check_keys(j, {"planes", "spacing", "sharing", "basis", "coeffs", "basis_a", "basis_b", "modes", "shape",
                 "alpha_bias_init", "margin"},
             "model");
  take(j, "planes", m.planes);
  if (j.contains("spacing")) {
    const std::string s = j.at("spacing");
    if (s == "inverse_depth") m.spacing = PlaneSpacing::inverse_depth;
    else if (s == "depth") m.spacing = PlaneSpacing::depth;
    else throw std::invalid_argument("model.spacing must be 'depth' or 'inverse_depth'");
  }
  take(j, "sharing", m.sharing);
  if (j.contains("basis") || j.contains("coeffs")) {
    const BasisFamily f = j.contains("basis") ? parse_basis_family(j.at("basis").get<std::string>()) : m.basis.family;
    m.basis = BasisConfig::make(f, j.contains("coeffs") ? j.at("coeffs").get<int>() : m.basis.count);
  }
  take(j, "basis_a", m.basis.a);
  take(j, "basis_b", m.basis.b);
  if (j.contains("modes")) m.modes = ModelModes::parse(j.at("modes").get<std::string>());
  if (j.contains("shape")) {
    const json& s = j.at("shape");
    check_keys(s, {"color_width", "color_layers", "basis_width", "basis_layers"}, "model.shape");
    take(s, "color_width", m.shape.color_width);
    take(s, "color_layers", m.shape.color_layers);
    take(s, "basis_width", m.shape.basis_width);
    take(s, "basis_layers", m.shape.basis_layers);
  }
  take(j, "alpha_bias_init", m.alpha_bias_init);
  take(j, "margin", m.margin);
}

}  // namespace

TrainConfig parse_train_config(const std::string& text, TrainConfig cfg) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    check_keys(j, {"epochs", "triplets", "omega", "gamma", "lr_base", "lr_nets", "decay_epochs", "model",
                   "stochastic_depth", "gradient_mask", "gradient_mask_threshold", "seed", "workers", "eval_every"},
               "config");
    take(j, "epochs", cfg.epochs);
    take(j, "triplets", cfg.triplets);
    take(j, "omega", cfg.omega);
    take(j, "gamma", cfg.gamma);
    take(j, "lr_base", cfg.lr_base);
    take(j, "lr_nets", cfg.lr_nets);
    take(j, "decay_epochs", cfg.decay_epochs);
    if (j.contains("model")) read_model(j.at("model"), cfg.model);
    take(j, "stochastic_depth", cfg.stochastic_depth);
    take(j, "gradient_mask", cfg.gradient_mask);
    take(j, "gradient_mask_threshold", cfg.gradient_mask_threshold);
    take(j, "seed", cfg.seed);
    take(j, "workers", cfg.workers);
    take(j, "eval_every", cfg.eval_every);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str(), std::move(base));
}

std::string train_config_json(const TrainConfig& c) {
  const ModelOptions& m = c.model;
  json model = {{"planes", m.planes},
                {"spacing", m.spacing == PlaneSpacing::depth ? "depth" : "inverse_depth"},
                {"sharing", m.sharing},
                {"basis", std::string(to_string(m.basis.family))},
                {"coeffs", m.basis.count},
                {"basis_a", m.basis.a},
                {"basis_b", m.basis.b},
                {"modes", m.modes.label()},
                {"shape",
                 {{"color_width", m.shape.color_width},
                  {"color_layers", m.shape.color_layers},
                  {"basis_width", m.shape.basis_width},
                  {"basis_layers", m.shape.basis_layers}}},
                {"alpha_bias_init", m.alpha_bias_init},
                {"margin", m.margin}};
  json j = {{"epochs", c.epochs},
            {"triplets", c.triplets},
            {"omega", c.omega},
            {"gamma", c.gamma},
            {"lr_base", c.lr_base},
            {"lr_nets", c.lr_nets},
            {"decay_epochs", c.decay_epochs},
            {"model", model},
            {"stochastic_depth", c.stochastic_depth},
            {"gradient_mask", c.gradient_mask},
            {"gradient_mask_threshold", c.gradient_mask_threshold},
            {"seed", c.seed},
            {"workers", c.workers},
            {"eval_every", c.eval_every}};
  return j.dump(2);
}

}  // namespace nex
