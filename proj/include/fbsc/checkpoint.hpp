#pragma once

// Checkpoint archive: predictor and frozen scene-encoder weights, the run
// configuration (including the training stride), the scene index used by the
// classifier, the dataset mean colour and, optionally, optimizer state.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "fbsc/config.hpp"
#include "fbsc/predictor.hpp"

namespace fbsc::pipeline {

inline constexpr const char* kCheckpointFormat = "fbsc-v1";

struct CheckpointMeta {
    std::string format = kCheckpointFormat;
    RunConfig config;
    int step = 0;
    std::vector<std::string> scene_ids;  // classifier index -> scene id
    cv::Scalar mean_color;               // [0, 1] per channel, BGR
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                     predictor::ForwardBackwardModel& model, torch::optim::Optimizer* optimizer);

struct LoadedCheckpoint {
    CheckpointMeta meta;
    predictor::ForwardBackwardModel model{nullptr};  // scene encoder frozen
    std::string id;
};

// Throws naming both versions when the archive's format differs from
// kCheckpointFormat.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, torch::Device device);

// Optimizer state saved with the checkpoint, for resuming. The optimizer must
// be built over the loaded model's predictor parameters.
void restore_optimizer(const std::filesystem::path& path, torch::optim::Optimizer& optimizer,
                       torch::Device device);

// Format field alone, without building the model.
std::string checkpoint_format(const std::filesystem::path& path);

// FNV-1a 64 of the archive bytes, as 16 hex digits.
std::string checkpoint_id(const std::filesystem::path& path);

}  // namespace fbsc::pipeline
