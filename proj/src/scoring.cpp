#include "fbsc/scoring.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "fbsc/error.hpp"
#include "fbsc/tensor_convert.hpp"

namespace fbsc::scoring {

namespace F = torch::nn::functional;

torch::Tensor local_errors(const torch::Tensor& f, const torch::Tensor& f_hat,
                           const PatchGrid& grid, double lambda_l1) {
    if (f.sizes() != f_hat.sizes()) throw Error("local_error: shape mismatch");
    const bool batched = f.dim() == 4;
    if (!batched && f.dim() != 3) throw Error("local_error: expected (3, H, W) or (B, 3, H, W)");
    const auto h = f.size(-2), w = f.size(-1);
    if (grid.patch < 1 || grid.stride < 1) throw Error("local_error: patch and stride must be >= 1");
    if (grid.patch > h || grid.patch > w)
        throw Error("local_error: patch " + std::to_string(grid.patch) + " exceeds crop size");

    auto diff = batched ? f - f_hat : (f - f_hat).unsqueeze(0);
    auto per_pixel = (diff.square() + lambda_l1 * diff.abs()).mean(1, /*keepdim=*/true);
    auto patch_means = F::avg_pool2d(per_pixel, F::AvgPool2dFuncOptions(grid.patch).stride(grid.stride));
    auto best = patch_means.flatten(1).amax(1);
    return batched ? best : best.squeeze(0);
}

double local_error(const torch::Tensor& f, const torch::Tensor& f_hat, const PatchGrid& grid,
                   double lambda_l1) {
    return local_errors(f, f_hat, grid, lambda_l1).item<double>();
}

double vad_score(std::span<const double> object_scores) {
    if (object_scores.empty()) return 0.0;
    return *std::max_element(object_scores.begin(), object_scores.end());
}

double vaa_score(std::span<const double> backward_errors, int alpha, int max_horizon) {
    if (alpha < 1 || alpha > max_horizon)
        throw Error("anticipation horizon " + std::to_string(alpha) + " outside [1, " +
                    std::to_string(max_horizon) + "]");
    if (alpha > static_cast<int>(backward_errors.size()))
        throw Error("anticipation horizon " + std::to_string(alpha) + " needs " +
                    std::to_string(alpha) + " backward errors");
    return *std::max_element(backward_errors.begin(), backward_errors.begin() + alpha);
}

ScoreSeries minmax_normalized(const ScoreSeries& series) {
    ScoreSeries out = series;
    if (out.values.empty()) return out;
    const auto [lo, hi] = std::minmax_element(out.values.begin(), out.values.end());
    const double low = *lo, range = *hi - *lo;
    for (auto& v : out.values) v = range > 0 ? (v - low) / range : 0.0;
    return out;
}

std::string to_string(Scorer scorer) {
    return scorer == Scorer::ForwardBackward ? "f+b" : "f-only";
}

namespace {

struct PendingWindow {
    int t;
    torch::Tensor inputs;  // (n, 3, H, W)
    torch::Tensor current;  // (3, H, W): f_t
    torch::Tensor scene;    // (3, H, W)
};

}  // namespace

VideoScores score_video(const corpus::Clip& clip, const corpus::VideoFrames& frames,
                        ScoringContext& context, const std::vector<int>& alpha_steps) {
    auto& model = context.model;
    const auto& opts = context.options;
    const auto& cfg = model->config();
    const int max_horizon = cfg.forward_out - 1;
    for (int a : alpha_steps)
        if (a < 1 || a > max_horizon)
            throw Error("anticipation horizon " + std::to_string(a) + " outside [1, " +
                        std::to_string(max_horizon) + "]");
    const int max_alpha = alpha_steps.empty() ? 0
                                              : *std::max_element(alpha_steps.begin(), alpha_steps.end());

    const int T = clip.frame_count;
    const int n = cfg.input_frames;
    const int stride = opts.geometry.stride;
    const int warm_up = n * stride;

    VideoScores result;
    auto make_series = [&](int steps) {
        ScoreSeries s;
        s.video_id = clip.video_id;
        s.alpha = steps * stride;
        if (T <= warm_up) {
            s.start_offset = T;
        } else {
            s.start_offset = warm_up;
            s.values.assign(std::max(0, T - warm_up - s.alpha), 0.0);
        }
        return s;
    };
    result.forward_backward[0] = make_series(0);
    result.forward_only[0] = make_series(0);
    for (int a : alpha_steps) {
        result.forward_backward[a] = make_series(a);
        result.forward_only[a] = make_series(a);
    }
    if (T <= warm_up) {
        spdlog::info("video {} has {} frames, not more than the {}-frame warm-up; nothing scored",
                     clip.video_id, T, warm_up);
        return result;
    }

    auto geometry = opts.geometry;
    geometry.input_frames = n;
    geometry.horizon = 1;

    auto record = [&](std::map<int, ScoreSeries>& series, int steps, int t, double value) {
        auto& s = series.at(steps);
        const int k = t - s.start_offset;
        if (k >= 0 && k < static_cast<int>(s.values.size()))
            s.values[k] = std::max(s.values[k], value);
    };

    std::vector<PendingWindow> pending;
    auto flush = [&]() {
        if (pending.empty()) return;
        torch::NoGradGuard no_grad;
        std::vector<torch::Tensor> in, cur, scn;
        for (const auto& p : pending) {
            in.push_back(p.inputs);
            cur.push_back(p.current);
            scn.push_back(p.scene);
        }
        auto inputs = torch::stack(in).to(context.device);
        auto current = torch::stack(cur).to(context.device);
        auto embedding = predictor::encode_scene(model, torch::stack(scn).to(context.device));
        auto bundle = predictor::forward_predict(model, inputs, embedding, opts.latent_mode);
        const auto& pred = bundle.forward_frames;

        auto vad = local_errors(current, pred.select(1, 0), opts.grid, opts.lambda_l1).cpu();
        std::vector<torch::Tensor> fonly_steps, back_steps;
        if (max_alpha > 0) {
            auto observed = torch::cat({inputs, current.unsqueeze(1)}, 1);  // f_{t-n} .. f_t
            for (int i = 1; i <= max_alpha; ++i) {
                fonly_steps.push_back(
                    local_errors(current, pred.select(1, i), opts.grid, opts.lambda_l1).cpu());
                auto future_rev = pred.slice(1, 1, i + 1).flip({1});
                auto observed_rev = observed.slice(1, i + 1, n + 1).flip({1});
                auto back = predictor::backward_predict(model, future_rev, observed_rev, embedding,
                                                        i, opts.latent_mode);
                back_steps.push_back(
                    local_errors(observed.select(1, i), back.frame, opts.grid, opts.lambda_l1).cpu());
            }
        }

        for (std::size_t b = 0; b < pending.size(); ++b) {
            const int t = pending[b].t;
            const double v = vad[b].item<double>();
            record(result.forward_backward, 0, t, v);
            record(result.forward_only, 0, t, v);
            std::vector<double> back_errors, fonly_errors;
            for (int i = 0; i < max_alpha; ++i) {
                back_errors.push_back(back_steps[i][b].item<double>());
                fonly_errors.push_back(fonly_steps[i][b].item<double>());
            }
            for (int a : alpha_steps) {
                record(result.forward_backward, a, t, vaa_score(back_errors, a, max_horizon));
                record(result.forward_only, a, t, vaa_score(fonly_errors, a, max_horizon));
            }
        }
        result.windows_scored += static_cast<int>(pending.size());
        pending.clear();
    };

    for (int track : clip.tracks.track_ids()) {
        for (int t = warm_up; t < T; ++t) {
            auto window = corpus::extract_window(clip, frames, track, t, geometry);
            if (!window) continue;
            window->scene = corpus::scene_crop(*context.scenes, clip, *window, context.mean_color,
                                               geometry);
            pending.push_back({t, to_tensor(window->inputs), to_tensor(window->targets.front()),
                               to_tensor(window->scene)});
            if (static_cast<int>(pending.size()) >= opts.batch_size) flush();
        }
    }
    flush();
    return result;
}

}  // namespace fbsc::scoring
