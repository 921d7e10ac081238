#include "fbsc/predictor.hpp"

#include <sstream>

#include "fbsc/error.hpp"

namespace fbsc::predictor {

namespace nn = torch::nn;

namespace {

nn::Conv2d conv(int in, int out, int kernel, int stride = 1) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2));
}

// (B, T, 3, H, W) -> (B, 3T, H, W): time merged into channels.
torch::Tensor merge_time(const torch::Tensor& frames) {
    const auto s = frames.sizes();
    return frames.reshape({s[0], s[1] * s[2], s[3], s[4]});
}

// Two coordinate planes in [-1, 1], shape (B, 2, h, w).
torch::Tensor coordinate_planes(std::int64_t batch, std::int64_t h, std::int64_t w,
                                const torch::TensorOptions& opts) {
    auto ys = torch::linspace(-1.0, 1.0, h, opts).view({1, 1, h, 1}).expand({batch, 1, h, w});
    auto xs = torch::linspace(-1.0, 1.0, w, opts).view({1, 1, 1, w}).expand({batch, 1, h, w});
    return torch::cat({ys, xs}, 1);
}

}  // namespace

void ModelConfig::validate() const {
    std::ostringstream bad;
    if (input_frames < 2) bad << "input_frames must be >= 2; ";
    if (forward_out < 2) bad << "forward_out must be >= 2; ";
    if (backward_out != 1) bad << "backward_out must be 1; ";
    if (forward_out - 1 > input_frames) bad << "forward_out - 1 must not exceed input_frames; ";
    if (crop_size < 4 || crop_size % 4 != 0) bad << "crop_size must be a positive multiple of 4; ";
    for (int w : widths)
        if (w <= 0) bad << "channel widths must be positive; ";
    if (latent_dim <= 0) bad << "latent_dim must be positive; ";
    if (scene_embedding_dim <= 0) bad << "scene_embedding_dim must be positive; ";
    if (scene_count <= 0) bad << "scene_count must be positive; ";
    if (!(gamma >= 0.0 && gamma <= 1.0)) bad << "gamma must lie in [0, 1]; ";
    if (const auto msg = bad.str(); !msg.empty()) throw Error("invalid model config: " + msg);
}

// ---------------------------------------------------------------------------
// Blocks

ResBlockImpl::ResBlockImpl(int channels)
    : conv1_(register_module("conv1", conv(channels, channels, 3))),
      conv2_(register_module("conv2", conv(channels, channels, 3))) {}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) {
    return torch::silu(x + conv2_(torch::silu(conv1_(x))));
}

ResDownImpl::ResDownImpl(int in_channels, int out_channels)
    : conv1_(register_module("conv1", conv(in_channels, out_channels, 3, 2))),
      conv2_(register_module("conv2", conv(out_channels, out_channels, 3))),
      shortcut_(register_module("shortcut", conv(in_channels, out_channels, 1, 2))) {}

torch::Tensor ResDownImpl::forward(const torch::Tensor& x) {
    return torch::silu(conv2_(torch::silu(conv1_(x))) + shortcut_(x));
}

// ---------------------------------------------------------------------------
// Scene encoder

SceneEncoderImpl::SceneEncoderImpl(int embedding_dim, int scene_count)
    : embedding_dim_(embedding_dim) {
    features_ = register_module(
        "features", nn::Sequential(conv(3, 16, 3, 2), nn::SiLU(), conv(16, 32, 3, 2), nn::SiLU(),
                                   conv(32, 64, 3, 2), nn::SiLU(),
                                   nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(1)),
                                   nn::Flatten()));
    embedding_ = register_module("embedding", nn::Linear(64, embedding_dim));
    classifier_ = register_module("classifier", nn::Linear(embedding_dim, scene_count));
}

torch::Tensor SceneEncoderImpl::embed(const torch::Tensor& scene_crops) {
    return torch::silu(embedding_(features_->forward(scene_crops)));
}

torch::Tensor SceneEncoderImpl::logits(const torch::Tensor& scene_crops) {
    return classifier_(embed(scene_crops));
}

void SceneEncoderImpl::freeze() {
    for (auto& p : parameters()) p.set_requires_grad(false);
    eval();
    frozen_ = true;
}

// ---------------------------------------------------------------------------
// CVAE

CvaeImpl::CvaeImpl(int channels, int embedding_dim, int latent_dim, double gamma)
    : channels_(channels),
      embedding_dim_(embedding_dim),
      latent_dim_(latent_dim),
      gamma_(gamma) {
    enc_conv_ = register_module("enc_conv", conv(channels + embedding_dim, channels, 3));
    enc_head_ = register_module("enc_head", nn::Linear(channels, 2 * latent_dim));
    dec_conv1_ = register_module("dec_conv1", conv(latent_dim + embedding_dim + 2, channels, 1));
    dec_conv2_ = register_module("dec_conv2", conv(channels, channels, 3));
}

std::vector<torch::Tensor> CvaeImpl::decoder_parameters() const {
    std::vector<torch::Tensor> out;
    for (const auto& p : dec_conv1_->parameters()) out.push_back(p);
    for (const auto& p : dec_conv2_->parameters()) out.push_back(p);
    return out;
}

CvaeOutput CvaeImpl::forward(const torch::Tensor& features, const torch::Tensor& embedding,
                             LatentMode mode) {
    if (features.dim() != 4 || features.size(1) != channels_)
        throw Error("cvae: expected feature map with " + std::to_string(channels_) + " channels");
    if (embedding.dim() != 2 || embedding.size(0) != features.size(0) ||
        embedding.size(1) != embedding_dim_)
        throw Error("cvae: scene embedding of shape (" + std::to_string(features.size(0)) + ", " +
                    std::to_string(embedding_dim_) + ") required to broadcast over the feature map");

    const auto b = features.size(0), h = features.size(2), w = features.size(3);
    auto cond = embedding.view({b, embedding_dim_, 1, 1}).expand({b, embedding_dim_, h, w});

    auto hidden = torch::silu(enc_conv_(torch::cat({features, cond}, 1)));
    auto stats = enc_head_(hidden.mean({2, 3}));
    auto mean = stats.slice(1, 0, latent_dim_);
    auto log_variance = stats.slice(1, latent_dim_, 2 * latent_dim_);

    torch::Tensor z = mean;
    if (mode == LatentMode::Stochastic)
        z = mean + torch::exp(0.5 * log_variance) * torch::randn_like(mean);

    auto zmap = z.view({b, latent_dim_, 1, 1}).expand({b, latent_dim_, h, w});
    auto dec_in = torch::cat({zmap, cond, coordinate_planes(b, h, w, features.options())}, 1);
    auto decoded = dec_conv2_(torch::silu(dec_conv1_(dec_in)));

    return {features + gamma_ * decoded, {mean, log_variance}};
}

// ---------------------------------------------------------------------------
// U-Net

UNetPredictorImpl::UNetPredictorImpl(const ModelConfig& config, int in_frames, int out_frames)
    : in_frames_(in_frames), out_frames_(out_frames) {
    const auto [c1, c2, c3] = config.widths;
    stem_ = register_module("stem", conv(3 * in_frames, c1, 3));
    level1_ = register_module("level1", ResBlock(c1));
    down2_ = register_module("down2", ResDown(c1, c2));
    down3_ = register_module("down3", ResDown(c2, c3));
    level3_ = register_module("level3", ResBlock(c3));
    cvae2_ = register_module(
        "cvae2", Cvae(c2, config.scene_embedding_dim, config.latent_dim, config.gamma));
    cvae3_ = register_module(
        "cvae3", Cvae(c3, config.scene_embedding_dim, config.latent_dim, config.gamma));
    up2a_ = register_module("up2a", conv(c3 + c2, c2, 3));
    up2b_ = register_module("up2b", conv(c2, c2, 3));
    up1a_ = register_module("up1a", conv(c2 + c1, c1, 3));
    up1b_ = register_module("up1b", conv(c1, c1, 3));
    head_ = register_module("head", conv(c1, 3 * out_frames, 1));
}

UNetOutput UNetPredictorImpl::forward(const torch::Tensor& frames, const torch::Tensor& embedding,
                                      LatentMode mode) {
    if (frames.dim() != 5 || frames.size(1) != in_frames_ || frames.size(2) != 3)
        throw Error("unet: expected (B, " + std::to_string(in_frames_) + ", 3, H, W) input");

    auto u1 = level1_(torch::silu(stem_(merge_time(frames))));
    auto u2 = down2_(u1);
    auto c2 = cvae2_(u2, embedding, mode);
    auto u3 = level3_(down3_(c2.features));
    auto c3 = cvae3_(u3, embedding, mode);

    namespace F = torch::nn::functional;
    const auto up = F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(
        torch::kNearest);
    auto d2 = F::interpolate(c3.features, up);
    d2 = torch::silu(up2b_(torch::silu(up2a_(torch::cat({d2, c2.features}, 1)))));
    auto d1 = F::interpolate(d2, up);
    d1 = torch::silu(up1b_(torch::silu(up1a_(torch::cat({d1, u1}, 1)))));
    auto out = torch::sigmoid(head_(d1));

    const auto b = frames.size(0), h = frames.size(3), w = frames.size(4);
    return {out.view({b, out_frames_, 3, h, w}), {c2.latent, c3.latent}};
}

// ---------------------------------------------------------------------------
// Full model

ForwardBackwardModelImpl::ForwardBackwardModelImpl(const ModelConfig& config) : config_(config) {
    config_.validate();
    forward_net_ = register_module(
        "forward_net", UNetPredictor(config_, config_.input_frames, config_.forward_out));
    backward_net_ = register_module(
        "backward_net", UNetPredictor(config_, config_.input_frames, config_.backward_out));
    scene_encoder_ = register_module(
        "scene_encoder", SceneEncoder(config_.scene_embedding_dim, config_.scene_count));
}

std::vector<torch::Tensor> ForwardBackwardModelImpl::predictor_parameters() const {
    auto params = forward_net_->parameters();
    auto back = backward_net_->parameters();
    params.insert(params.end(), back.begin(), back.end());
    return params;
}

torch::Tensor encode_scene(ForwardBackwardModel& model, const torch::Tensor& scene_crops) {
    auto& encoder = model->scene_encoder();
    if (!encoder->frozen()) throw Error("scene encoder has not been trained and frozen");
    torch::NoGradGuard no_grad;
    return encoder->embed(scene_crops);
}

CvaeOutput cvae_transform(Cvae& cvae, const torch::Tensor& features,
                          const torch::Tensor& embedding, LatentMode mode) {
    return cvae->forward(features, embedding, mode);
}

PredictionBundle forward_predict(ForwardBackwardModel& model, const torch::Tensor& inputs,
                                 const torch::Tensor& embedding, LatentMode mode) {
    const int n = model->config().input_frames;
    if (inputs.dim() != 5 || inputs.size(1) != n)
        throw Error("forward_predict: expected " + std::to_string(n) + " input frames, got " +
                    (inputs.dim() == 5 ? std::to_string(inputs.size(1)) : std::string("bad rank")));
    auto out = model->forward_net()->forward(inputs, embedding, mode);
    PredictionBundle bundle;
    bundle.forward_frames = out.frames;
    bundle.forward_latents = out.latents;
    return bundle;
}

torch::Tensor pack_backward_input(const torch::Tensor& future, const torch::Tensor& observed,
                                  int step, int input_frames) {
    if (step < 1 || step > future.size(1))
        throw Error("pack_backward_input: step " + std::to_string(step) + " out of range");
    if (observed.size(1) != input_frames + 1)
        throw Error("pack_backward_input: observed must hold n+1 frames f_{t-n} .. f_t");
    // f_{t+i} .. f_{t+1}
    auto fut = future.slice(1, 0, step).flip({1});
    // f_t .. f_{t+i+1-n}: observed indices n down to i+1
    auto obs = observed.slice(1, step + 1, input_frames + 1).flip({1});
    return torch::cat({fut, obs}, 1);
}

BackwardResult backward_predict(ForwardBackwardModel& model, const torch::Tensor& future_reversed,
                                const torch::Tensor& observed_reversed,
                                const torch::Tensor& embedding, int step, LatentMode mode) {
    const auto& cfg = model->config();
    const int max_step = cfg.forward_out - 1;
    if (step < 1 || step > max_step)
        throw Error("backward_predict: step " + std::to_string(step) + " outside [1, " +
                    std::to_string(max_step) + "]");
    if (future_reversed.size(1) != step || observed_reversed.size(1) != cfg.input_frames - step)
        throw Error("backward_predict: step " + std::to_string(step) + " needs " +
                    std::to_string(step) + " future and " +
                    std::to_string(cfg.input_frames - step) + " observed frames");
    auto input = torch::cat({future_reversed, observed_reversed}, 1);
    auto out = model->backward_net()->forward(input, embedding, mode);
    return {out.frames.select(1, 0), out.latents};
}

std::int64_t parameter_count(const torch::nn::Module& module) {
    std::int64_t n = 0;
    for (const auto& p : module.parameters()) n += p.numel();
    return n;
}

}  // namespace fbsc::predictor
