#pragma once

// Per-frame anomaly scores from prediction errors.
//
// Detection scores frame t with the maximum local error between f_t and the
// first forward prediction. Anticipation over alpha steps takes, per object,
// the maximum backward reconstruction error over steps 1..alpha (backward
// inputs use predicted futures only). Objects reduce to a frame score by max;
// frames with no scored object score 0.

#include <map>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "fbsc/corpus.hpp"
#include "fbsc/predictor.hpp"
#include "fbsc/score_series.hpp"

namespace fbsc::scoring {

struct PatchGrid {
    int patch = 16;
    int stride = 8;
};

// Maximum over a sliding patch grid of the patch-mean per-pixel error
// (f - f_hat)^2 + lambda_l1 * |f - f_hat|, channels averaged per pixel.
// Inputs are (3, H, W) or (B, 3, H, W); the batched form returns (B).
torch::Tensor local_errors(const torch::Tensor& f, const torch::Tensor& f_hat,
                           const PatchGrid& grid, double lambda_l1);
double local_error(const torch::Tensor& f, const torch::Tensor& f_hat, const PatchGrid& grid,
                   double lambda_l1);

// Object scores at one frame -> frame score (0 when empty).
double vad_score(std::span<const double> object_scores);

// backward_errors[i-1] is the error of backward step i. Throws when alpha is
// outside [1, max_horizon] or exceeds the available steps.
double vaa_score(std::span<const double> backward_errors, int alpha, int max_horizon);

// Per-video min-max rescaling to [0, 1]; ablation only.
ScoreSeries minmax_normalized(const ScoreSeries& series);

enum class Scorer { ForwardBackward, ForwardOnly };

std::string to_string(Scorer scorer);

struct ScoringOptions {
    corpus::WindowGeometry geometry;
    PatchGrid grid;
    double lambda_l1 = 1.0;
    predictor::LatentMode latent_mode = predictor::LatentMode::Mean;
    int batch_size = 64;
};

// Everything score_video needs besides the clip itself.
struct ScoringContext {
    predictor::ForwardBackwardModel model{nullptr};
    const std::map<std::string, corpus::SceneImage>* scenes = nullptr;
    cv::Scalar mean_color;
    ScoringOptions options;
    torch::Device device = torch::kCPU;
};

struct VideoScores {
    // Keyed by alpha in steps; key 0 is detection. Series alpha is in frames.
    std::map<int, ScoreSeries> forward_backward;
    // Forward-only anticipation baseline: max error between predicted future
    // frames and the current frame. Key 0 repeats the detection series.
    std::map<int, ScoreSeries> forward_only;
    int windows_scored = 0;
};

// One forward sweep per window, reused by every horizon in alpha_steps.
VideoScores score_video(const corpus::Clip& clip, const corpus::VideoFrames& frames,
                        ScoringContext& context, const std::vector<int>& alpha_steps);

}  // namespace fbsc::scoring
