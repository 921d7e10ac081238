#pragma once

#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace fbsc {

// CV_32FC3 (H, W) -> float tensor (3, H, W). The result owns its memory.
torch::Tensor to_tensor(const cv::Mat& crop);

// Equal-size CV_32FC3 crops -> (N, 3, H, W).
torch::Tensor to_tensor(const std::vector<cv::Mat>& crops);

// (3, H, W) tensor in [0, 1] -> CV_8UC3 image.
cv::Mat to_image(const torch::Tensor& chw);

}  // namespace fbsc
