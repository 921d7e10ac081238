#pragma once

// Run configuration: one TOML file drives train, score and eval.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fbsc/corpus.hpp"
#include "fbsc/losses.hpp"
#include "fbsc/predictor.hpp"
#include "fbsc/scoring.hpp"

namespace fbsc::pipeline {

struct OptimizerConfig {
    double learning_rate = 2e-4;
    int batch_size = 16;
    int steps = 2000;
    int checkpoint_every = 500;
    int log_every = 10;
    bool operator==(const OptimizerConfig&) const = default;
};

// Scene classifier pre-training on co-located background crops.
struct SceneEncoderConfig {
    int epochs = 6;
    int samples_per_scene = 256;
    int batch_size = 32;
    double learning_rate = 1e-3;
    bool operator==(const SceneEncoderConfig&) const = default;
};

struct DataConfig {
    int stride = 12;
    double margin = 1.2;
    int min_side = 0;
    bool operator==(const DataConfig&) const = default;
};

struct ScoringConfig {
    int patch = 16;
    int patch_stride = 8;
    int batch_size = 64;
    predictor::LatentMode latent_mode = predictor::LatentMode::Mean;
    bool minmax_normalize = false;  // per-video rescaling, ablation only
    bool operator==(const ScoringConfig&) const = default;
};

struct RunConfig {
    std::filesystem::path dataset_root;
    std::filesystem::path output_dir = "runs/default";
    std::uint64_t seed = 0;
    std::vector<int> alphas{1, 2, 3, 4, 5, 6};  // anticipation horizons in steps
    predictor::ModelConfig model;
    losses::LossWeights loss;
    OptimizerConfig optimizer;
    SceneEncoderConfig scene_encoder;
    DataConfig data;
    ScoringConfig scoring;
    predictor::LatentMode train_latent_mode = predictor::LatentMode::Stochastic;

    void validate() const;
    corpus::WindowGeometry geometry() const;
    scoring::ScoringOptions scoring_options() const;

    bool operator==(const RunConfig&) const = default;
};

// Unknown keys and wrongly typed values are errors. Relative paths are kept
// as written; load_config resolves them against the file's directory.
RunConfig parse_config(const std::string& toml_text);
RunConfig load_config(const std::filesystem::path& file);
std::string serialize_config(const RunConfig& config);

// Small-crop settings sized for the synthetic benchmarks.
RunConfig benchmark_preset(const std::string& benchmark_name);

std::string to_string(predictor::LatentMode mode);
predictor::LatentMode latent_mode_from(const std::string& name);

}  // namespace fbsc::pipeline
