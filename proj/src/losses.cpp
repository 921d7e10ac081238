#include "fbsc/losses.hpp"

#include "fbsc/error.hpp"

namespace fbsc::losses {

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.sizes() != b.sizes()) throw Error(std::string(what) + ": shape mismatch");
}

}  // namespace

void LossWeights::validate() const {
    if (!(lambda_l1 >= 0.0) || !(lambda_kl >= 0.0))
        throw Error("loss weights must be non-negative");
}

torch::Tensor frame_loss(const torch::Tensor& f, const torch::Tensor& f_hat, double lambda_l1) {
    require_same_shape(f, f_hat, "frame_loss");
    auto diff = f - f_hat;
    return diff.square().mean() + lambda_l1 * diff.abs().mean();
}

torch::Tensor backward_loss(const torch::Tensor& from_predicted, const torch::Tensor& from_real,
                            const torch::Tensor& ground_truth, double lambda_l1) {
    require_same_shape(from_predicted, ground_truth, "backward_loss");
    require_same_shape(from_real, ground_truth, "backward_loss");
    return 0.5 * (frame_loss(from_predicted, ground_truth, lambda_l1) +
                  frame_loss(from_real, ground_truth, lambda_l1));
}

torch::Tensor kl_loss(const predictor::LatentDistribution& dist) {
    require_same_shape(dist.mean, dist.log_variance, "kl_loss");
    if (!torch::isfinite(dist.mean).all().item<bool>() ||
        !torch::isfinite(dist.log_variance).all().item<bool>())
        throw Error("kl_loss: non-finite posterior parameters");
    auto per_dim =
        -0.5 * (dist.log_variance - dist.mean.square() - dist.log_variance.exp() + 1.0);
    if (per_dim.dim() <= 1) return per_dim.sum();
    return per_dim.sum(-1).mean();
}

LossSummary total_loss(const LossComponents& parts, const LossWeights& weights) {
    auto opts = parts.backward.defined() ? parts.backward.options()
                                         : torch::TensorOptions().dtype(torch::kFloat32);
    auto forward_sum = torch::zeros({}, opts);
    for (const auto& l : parts.forward_frame_losses) forward_sum = forward_sum + l;
    auto kl_sum = torch::zeros({}, opts);
    for (const auto& l : parts.kl_terms) kl_sum = kl_sum + l;
    auto backward = parts.backward.defined() ? parts.backward : torch::zeros({}, opts);

    LossSummary out;
    out.total = forward_sum + backward + weights.lambda_kl * kl_sum;
    out.forward_sum = forward_sum.item<double>();
    out.backward = backward.item<double>();
    out.kl_sum = kl_sum.item<double>();
    return out;
}

}  // namespace fbsc::losses
