#pragma once

// Two-stage training: the scene classifier first (then frozen), then the
// forward and backward predictors jointly on the total loss.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "fbsc/config.hpp"
#include "fbsc/corpus.hpp"
#include "fbsc/predictor.hpp"

namespace fbsc::pipeline {

// Independent seeds per named consumer ("init", "scene", "step:<k>", ...).
std::uint64_t derive_seed(std::uint64_t seed, const std::string& name);

struct WindowRef {
    int clip = 0;  // index into CropBank::clips()
    int track_id = 0;
    int t = 0;
};

// Object crops of every (track, frame) of a set of clips, computed once, plus
// the list of complete training windows. window_frames() is bit-identical to
// the crops extract_window would produce for the same window.
class CropBank {
public:
    CropBank(std::vector<corpus::Clip> clips, const std::map<std::string, corpus::SceneImage>& scenes,
             const cv::Scalar& mean_color, const corpus::WindowGeometry& geometry);

    const std::vector<corpus::Clip>& clips() const { return clips_; }
    const std::vector<WindowRef>& windows() const { return windows_; }
    const corpus::WindowGeometry& geometry() const { return geometry_; }

    // (n + horizon, 3, S, S): f_{t-n} .. f_{t+horizon-1}.
    torch::Tensor window_frames(const WindowRef& w) const;
    // (3, S, S) masked background crop at frame t.
    torch::Tensor scene_crop(const WindowRef& w) const;

private:
    std::vector<corpus::Clip> clips_;
    const std::map<std::string, corpus::SceneImage>& scenes_;
    cv::Scalar mean_color_;
    corpus::WindowGeometry geometry_;
    std::vector<std::map<std::pair<int, int>, torch::Tensor>> crops_;  // per clip: (track, frame)
    std::vector<cv::Size> resolution_;
    std::vector<WindowRef> windows_;
};

struct SceneEncoderReport {
    std::vector<double> epoch_losses;  // mean cross-entropy per epoch
    double heldout_accuracy = 0.0;
    int heldout_size = 0;
};

// Trains the classifier on (crops, labels), holding out every fifth sample
// for the accuracy estimate, then freezes it.
SceneEncoderReport train_scene_encoder(predictor::SceneEncoder& encoder, const torch::Tensor& crops,
                                       const torch::Tensor& labels, const SceneEncoderConfig& config,
                                       std::uint64_t seed, torch::Device device);

struct StepLoss {
    int step = 0;
    double forward_sum = 0.0;
    double backward = 0.0;
    double kl_sum = 0.0;
    double total = 0.0;
};

// One optimisation step worth of loss on a batch of windows.
//   frames:    (B, n + forward_out, 3, S, S)
//   embedding: (B, D)
// backward_step selects i in [1, forward_out - 1].
losses::LossSummary training_loss(predictor::ForwardBackwardModel& model, const torch::Tensor& frames,
                                  const torch::Tensor& embedding, int backward_step,
                                  const losses::LossWeights& weights, predictor::LatentMode mode);

struct TrainOptions {
    std::optional<std::filesystem::path> resume;
};

struct TrainReport {
    std::filesystem::path final_checkpoint;
    SceneEncoderReport scene_encoder;
    std::vector<StepLoss> losses;  // steps run by this call
};

// Writes <output_dir>/config.toml, train_log.csv, scene_encoder.csv,
// checkpoints/step_<k>.pt every checkpoint_every steps and final.pt.
TrainReport train(const RunConfig& config, torch::Device device, const TrainOptions& options = {});

// Cosine decay from the base rate to zero over total_steps; step is 1-based.
double cosine_learning_rate(double base, int step, int total_steps);

}  // namespace fbsc::pipeline
