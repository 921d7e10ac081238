#pragma once

// Forward and backward U-Net frame predictors with scene-conditioned CVAEs
// at the two deepest levels, plus the frozen scene classifier that supplies
// the condition.
//
// Tensor layout conventions used throughout:
//   frame stacks   (B, T, 3, H, W), values in [0, 1]
//   single frames  (B, 3, H, W)
//   scene crops    (B, 3, H, W)
//   embeddings     (B, D)

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace fbsc::predictor {

enum class LatentMode { Stochastic, Mean };

struct ModelConfig {
    int input_frames = 8;
    int forward_out = 7;
    int backward_out = 1;
    int crop_size = 256;
    std::array<int, 3> widths{64, 128, 256};
    int latent_dim = 64;
    double gamma = 1.0;
    int scene_embedding_dim = 128;
    int scene_count = 1;

    // Throws fbsc::Error on out-of-range values.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

// Posterior of one CVAE. variance() is exp(log_variance), positive by construction.
struct LatentDistribution {
    torch::Tensor mean;
    torch::Tensor log_variance;

    torch::Tensor variance() const { return log_variance.exp(); }
};

struct CvaeOutput {
    torch::Tensor features;
    LatentDistribution latent;
};

// Residual block at constant resolution.
class ResBlockImpl : public torch::nn::Module {
public:
    explicit ResBlockImpl(int channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
};
TORCH_MODULE(ResBlock);

// Residual block that halves the resolution.
class ResDownImpl : public torch::nn::Module {
public:
    ResDownImpl(int in_channels, int out_channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, shortcut_{nullptr};
};
TORCH_MODULE(ResDown);

// Small convolutional scene classifier. Its penultimate activation is the
// scene embedding fed to every CVAE.
class SceneEncoderImpl : public torch::nn::Module {
public:
    SceneEncoderImpl(int embedding_dim, int scene_count);

    torch::Tensor embed(const torch::Tensor& scene_crops);
    torch::Tensor logits(const torch::Tensor& scene_crops);

    // Stops gradient flow into the encoder and switches it to eval mode.
    void freeze();
    bool frozen() const { return frozen_; }
    int embedding_dim() const { return embedding_dim_; }

private:
    torch::nn::Sequential features_{nullptr};
    torch::nn::Linear embedding_{nullptr}, classifier_{nullptr};
    int embedding_dim_;
    bool frozen_ = false;
};
TORCH_MODULE(SceneEncoder);

// Scene-conditioned VAE over one U-Net feature map. The latent is a single
// global vector; the decoder broadcasts [z, scene embedding, x, y] over the
// map and convolves it back into a feature map of the input's shape. The
// result is gated into the map: out = features + gamma * decoded.
class CvaeImpl : public torch::nn::Module {
public:
    CvaeImpl(int channels, int embedding_dim, int latent_dim, double gamma);

    CvaeOutput forward(const torch::Tensor& features, const torch::Tensor& embedding,
                       LatentMode mode);

    double gamma() const { return gamma_; }
    // Decoder weights only; the gamma=0 equivalence tests zero these.
    std::vector<torch::Tensor> decoder_parameters() const;

private:
    torch::nn::Conv2d enc_conv_{nullptr};
    torch::nn::Linear enc_head_{nullptr};
    torch::nn::Conv2d dec_conv1_{nullptr}, dec_conv2_{nullptr};
    int channels_;
    int embedding_dim_;
    int latent_dim_;
    double gamma_;
};
TORCH_MODULE(Cvae);

struct UNetOutput {
    torch::Tensor frames;                     // (B, out_frames, 3, H, W)
    std::array<LatentDistribution, 2> latents;  // level 2, level 3
};

// Three-level U-Net: residual encoder, CVAEs on levels 2 and 3, plain
// upsampling decoder, sigmoid output.
class UNetPredictorImpl : public torch::nn::Module {
public:
    UNetPredictorImpl(const ModelConfig& config, int in_frames, int out_frames);

    // frames: (B, in_frames, 3, H, W) packed to (B, 3*in_frames, H, W) internally.
    UNetOutput forward(const torch::Tensor& frames, const torch::Tensor& embedding,
                       LatentMode mode);

    Cvae& cvae(int level) { return level == 2 ? cvae2_ : cvae3_; }
    int in_frames() const { return in_frames_; }
    int out_frames() const { return out_frames_; }

private:
    int in_frames_;
    int out_frames_;
    torch::nn::Conv2d stem_{nullptr};
    ResBlock level1_{nullptr};
    ResDown down2_{nullptr};
    ResDown down3_{nullptr};
    ResBlock level3_{nullptr};
    Cvae cvae2_{nullptr}, cvae3_{nullptr};
    torch::nn::Conv2d up2a_{nullptr}, up2b_{nullptr}, up1a_{nullptr}, up1b_{nullptr};
    torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(UNetPredictor);

// Forward predictions for a batch of windows.
struct PredictionBundle {
    torch::Tensor forward_frames;                // (B, forward_out, 3, H, W): f_t .. f_{t+6}
    std::array<LatentDistribution, 2> forward_latents;
    torch::Tensor backward_frame;                // (B, 3, H, W) when a backward pass ran
    std::vector<LatentDistribution> backward_latents;
};

// The full model: forward network, backward network and the frozen scene encoder.
class ForwardBackwardModelImpl : public torch::nn::Module {
public:
    explicit ForwardBackwardModelImpl(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    UNetPredictor& forward_net() { return forward_net_; }
    UNetPredictor& backward_net() { return backward_net_; }
    SceneEncoder& scene_encoder() { return scene_encoder_; }

    // Parameters trained jointly by the total loss (scene encoder excluded).
    std::vector<torch::Tensor> predictor_parameters() const;

private:
    ModelConfig config_;
    UNetPredictor forward_net_{nullptr};
    UNetPredictor backward_net_{nullptr};
    SceneEncoder scene_encoder_{nullptr};
};
TORCH_MODULE(ForwardBackwardModel);

// Embedding of scene crops through the frozen encoder. Throws if the encoder
// has not been trained and frozen.
torch::Tensor encode_scene(ForwardBackwardModel& model, const torch::Tensor& scene_crops);

// Scene-conditioned feature map for one CVAE.
CvaeOutput cvae_transform(Cvae& cvae, const torch::Tensor& features,
                          const torch::Tensor& embedding, LatentMode mode);

// inputs: (B, n, 3, H, W) covering f_{t-n} .. f_{t-1}.
PredictionBundle forward_predict(ForwardBackwardModel& model, const torch::Tensor& inputs,
                                 const torch::Tensor& embedding, LatentMode mode);

// Reverse-time input for backward step i: [f_{t+i} .. f_{t+1}, f_t .. f_{t+i+1-n}].
// future: (B, >=i, 3, H, W) holding f_{t+1}, f_{t+2}, ... in time order.
// observed: (B, n+1, 3, H, W) holding f_{t-n} .. f_t in time order.
// The ground truth of the step is observed[:, i] == f_{t+i-n}.
torch::Tensor pack_backward_input(const torch::Tensor& future, const torch::Tensor& observed,
                                  int step, int input_frames);

struct BackwardResult {
    torch::Tensor frame;  // (B, 3, H, W): prediction of f_{t+i-n}
    std::array<LatentDistribution, 2> latents;
};

// future_reversed: (B, i, 3, H, W) = f_{t+i} .. f_{t+1};
// observed_reversed: (B, n-i, 3, H, W) = f_t .. f_{t+i+1-n}.
BackwardResult backward_predict(ForwardBackwardModel& model, const torch::Tensor& future_reversed,
                                const torch::Tensor& observed_reversed,
                                const torch::Tensor& embedding, int step, LatentMode mode);

// Parameter count of a module, counting every registered tensor.
std::int64_t parameter_count(const torch::nn::Module& module);

}  // namespace fbsc::predictor
