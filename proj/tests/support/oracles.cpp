#include "support/oracles.hpp"

#include <cmath>
#include <numbers>

namespace fbsc::testing {

std::vector<int> window_max_oracle(const std::vector<int>& g, int alpha) {
    const int T = static_cast<int>(g.size());
    std::vector<int> out(T - alpha, 0);
    for (int t = 0; t < T - alpha; ++t)
        for (int k = 1; k <= alpha; ++k)
            if (g[t + k] == 1) out[t] = 1;
    return out;
}

double frame_loss_oracle(const torch::Tensor& a, const torch::Tensor& b, double lambda_l1) {
    auto x = a.to(torch::kDouble).contiguous().flatten();
    auto y = b.to(torch::kDouble).contiguous().flatten();
    const auto* px = x.data_ptr<double>();
    const auto* py = y.data_ptr<double>();
    const auto n = x.numel();
    double sq = 0, ab = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = px[i] - py[i];
        sq += d * d;
        ab += std::abs(d);
    }
    return sq / n + lambda_l1 * ab / n;
}

double kl_quadrature(double mu, double var) {
    const double sd = std::sqrt(var);
    const double lo = mu - 14 * sd, hi = mu + 14 * sd;
    const int steps = 40000;  // even
    const double h = (hi - lo) / steps;
    auto integrand = [&](double x) {
        const double log_p = -0.5 * std::log(2 * std::numbers::pi * var) - (x - mu) * (x - mu) / (2 * var);
        const double log_q = -0.5 * std::log(2 * std::numbers::pi) - x * x / 2;
        return std::exp(log_p) * (log_p - log_q);
    };
    double sum = integrand(lo) + integrand(hi);
    for (int i = 1; i < steps; ++i) sum += (i % 2 ? 4.0 : 2.0) * integrand(lo + i * h);
    return sum * h / 3.0;
}

double pair_count_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1;
            if (scores[i] > scores[j]) wins += 1;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

double local_error_oracle(const torch::Tensor& f, const torch::Tensor& f_hat, int patch, int stride,
                          double lambda_l1) {
    auto a = f.to(torch::kDouble).contiguous();
    auto b = f_hat.to(torch::kDouble).contiguous();
    const int H = static_cast<int>(a.size(1)), W = static_cast<int>(a.size(2));
    auto pa = a.accessor<double, 3>();
    auto pb = b.accessor<double, 3>();
    std::vector<double> err(H * W, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double e = 0;
            for (int c = 0; c < 3; ++c) {
                const double d = pa[c][y][x] - pb[c][y][x];
                e += d * d + lambda_l1 * std::abs(d);
            }
            err[y * W + x] = e / 3.0;
        }
    double best = -1;
    for (int y0 = 0; y0 + patch <= H; y0 += stride)
        for (int x0 = 0; x0 + patch <= W; x0 += stride) {
            double s = 0;
            for (int y = y0; y < y0 + patch; ++y)
                for (int x = x0; x < x0 + patch; ++x) s += err[y * W + x];
            best = std::max(best, s / (patch * patch));
        }
    return best;
}

}  // namespace fbsc::testing
