#include "fbsc/tensor_convert.hpp"

#include "fbsc/error.hpp"

namespace fbsc {

torch::Tensor to_tensor(const cv::Mat& crop) {
    if (crop.type() != CV_32FC3) throw Error("to_tensor expects a CV_32FC3 crop");
    cv::Mat contiguous = crop.isContinuous() ? crop : crop.clone();
    auto hwc = torch::from_blob(contiguous.data, {crop.rows, crop.cols, 3}, torch::kFloat32);
    return hwc.permute({2, 0, 1}).clone();
}

torch::Tensor to_tensor(const std::vector<cv::Mat>& crops) {
    std::vector<torch::Tensor> parts;
    parts.reserve(crops.size());
    for (const auto& c : crops) parts.push_back(to_tensor(c));
    return torch::stack(parts);
}

cv::Mat to_image(const torch::Tensor& chw) {
    auto hwc = (chw.detach().to(torch::kCPU, torch::kFloat32).clamp(0.0, 1.0) * 255.0)
                   .round()
                   .to(torch::kUInt8)
                   .permute({1, 2, 0})
                   .contiguous();
    cv::Mat view(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3,
                 hwc.data_ptr<std::uint8_t>());
    return view.clone();
}

}  // namespace fbsc
