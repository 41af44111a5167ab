#pragma once

#include <filesystem>
#include <string>

#include "nex/train.hpp"

namespace nex {

/// Overlays the keys present in a JSON object onto `base`. Unknown keys are
/// rejected so that typos do not silently fall back to defaults.
TrainConfig parse_train_config(const std::string& json_text, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});
std::string train_config_json(const TrainConfig& cfg);

}  // namespace nex
