#pragma once

#include <filesystem>
#include <string>

#include "fbsc/config.hpp"
#include "fbsc/predictor.hpp"
#include "fbsc/synthgen.hpp"

namespace fbsc::testing {

// Fresh empty directory under the system temp dir, unique per process.
std::filesystem::path temp_dir(const std::string& name);

// 64x64, 60-frame, two-scene world with one appearance and one speed anomaly.
synthgen::ScenarioSpec tiny_spec();

// 16x16 crops, widths 4/8/8, stride 1: trains a handful of steps in seconds.
predictor::ModelConfig tiny_model();
pipeline::RunConfig tiny_config(const std::filesystem::path& data, const std::filesystem::path& out);

}  // namespace fbsc::testing
