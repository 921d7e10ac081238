#pragma once

#include <vector>

#include <torch/torch.h>

#include "fbsc/predictor.hpp"

namespace fbsc::losses {

struct LossWeights {
    double lambda_l1 = 1.0;
    double lambda_kl = 0.1;

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

// Squared error plus lambda_l1 times absolute error, both averaged over every
// element, so the weights do not depend on the crop resolution.
torch::Tensor frame_loss(const torch::Tensor& f, const torch::Tensor& f_hat, double lambda_l1);

// Mean of the frame losses of the two backward reconstructions of one
// observed frame: from predicted futures and from real futures.
torch::Tensor backward_loss(const torch::Tensor& from_predicted, const torch::Tensor& from_real,
                            const torch::Tensor& ground_truth, double lambda_l1);

// KL(N(mean, exp(log_variance)) || N(0, 1)), summed over latent dimensions and
// averaged over the batch. Accepts (D) or (B, D).
torch::Tensor kl_loss(const predictor::LatentDistribution& dist);

struct LossComponents {
    std::vector<torch::Tensor> forward_frame_losses;  // one per predicted frame, i = 0..6
    torch::Tensor backward;
    std::vector<torch::Tensor> kl_terms;  // one per CVAE evaluation
};

struct LossSummary {
    torch::Tensor total;
    double forward_sum = 0.0;
    double backward = 0.0;
    double kl_sum = 0.0;
};

// sum_i L_f + L_b + lambda_kl * sum KL.
LossSummary total_loss(const LossComponents& parts, const LossWeights& weights);

}  // namespace fbsc::losses
