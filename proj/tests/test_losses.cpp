#include <doctest.h>

#include <random>

#include "fbsc/error.hpp"
#include "fbsc/losses.hpp"
#include "support/oracles.hpp"

using namespace fbsc;
using losses::frame_loss;
using losses::kl_loss;

namespace {

double value(const torch::Tensor& t) { return t.item<double>(); }

torch::Tensor rand_frames(std::int64_t seed, std::vector<std::int64_t> shape = {2, 3, 8, 8}) {
    torch::manual_seed(seed);
    return torch::rand(shape, torch::kDouble);
}

}  // namespace

TEST_CASE("frame_loss closed forms") {
    const auto f = rand_frames(1);
    CHECK(value(frame_loss(f, f, 1.0)) == 0.0);
    for (double c : {0.25, -0.1, 0.5}) {
        for (double lambda : {0.0, 1.0, 2.5}) {
            const double got = value(frame_loss(f, f + c, lambda));
            CHECK(got == doctest::Approx(c * c + lambda * std::abs(c)).epsilon(1e-12));
        }
    }
}

TEST_CASE("frame_loss matches the scalar loop reference") {
    for (int s = 0; s < 20; ++s) {
        const auto a = rand_frames(10 + s), b = rand_frames(100 + s);
        CHECK(std::abs(value(frame_loss(a, b, 1.0)) - testing::frame_loss_oracle(a, b, 1.0)) < 1e-10);
    }
}

TEST_CASE("frame_loss symmetry, scaling and non-negativity") {
    const auto a = rand_frames(3), b = rand_frames(4);
    CHECK(value(frame_loss(a, b, 1.0)) == doctest::Approx(value(frame_loss(b, a, 1.0))).epsilon(1e-14));
    CHECK(value(frame_loss(a, b, 1.0)) >= 0.0);
    for (double c : {0.5, 2.0, 3.0})
        CHECK(value(frame_loss(c * a, c * b, 0.0)) ==
              doctest::Approx(c * c * value(frame_loss(a, b, 0.0))).epsilon(1e-12));
    CHECK_THROWS_AS(frame_loss(a, b.slice(0, 0, 1), 1.0), Error);
}

TEST_CASE("backward_loss is the mean of its two frame losses") {
    const auto gt = rand_frames(5), p1 = rand_frames(6), p2 = rand_frames(7);
    CHECK(value(losses::backward_loss(gt, gt, gt, 1.0)) == 0.0);
    const double v = value(frame_loss(p2, gt, 1.0));
    CHECK(value(losses::backward_loss(gt, p2, gt, 1.0)) == doctest::Approx(v / 2).epsilon(1e-14));
    const double expected = 0.5 * (value(frame_loss(p1, gt, 1.0)) + value(frame_loss(p2, gt, 1.0)));
    CHECK(value(losses::backward_loss(p1, p2, gt, 1.0)) == expected);
    CHECK_THROWS_AS(losses::backward_loss(p1, p2.slice(1, 0, 2), gt, 1.0), Error);
}

TEST_CASE("kl_loss closed forms") {
    const auto zeros = torch::zeros({5}, torch::kDouble);
    const auto ones = torch::ones({5}, torch::kDouble);
    CHECK(value(kl_loss({zeros, zeros})) == 0.0);
    CHECK(value(kl_loss({ones, zeros})) == 2.5);  // 0.5 per dimension
    // batch mean of per-sample sums
    const auto mean = torch::tensor({{1.0, 0.0}, {0.0, 0.0}}, torch::kDouble);
    CHECK(value(kl_loss({mean, torch::zeros({2, 2}, torch::kDouble)})) == 0.25);
}

TEST_CASE("kl_loss matches numerical quadrature") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> mu_dist(-2.0, 2.0), lv_dist(-2.0, 1.5);
    for (int i = 0; i < 25; ++i) {
        const double mu = mu_dist(rng), lv = lv_dist(rng);
        const auto got = value(kl_loss({torch::tensor({mu}, torch::kDouble), torch::tensor({lv}, torch::kDouble)}));
        CHECK(std::abs(got - testing::kl_quadrature(mu, std::exp(lv))) < 1e-3);
    }
}

TEST_CASE("kl_loss is non-negative and convex in the mean") {
    std::mt19937 rng(4);
    std::normal_distribution<double> n01;
    for (int i = 0; i < 200; ++i) {
        const auto lv = torch::tensor({n01(rng), n01(rng)}, torch::kDouble);
        const auto m1 = torch::tensor({2 * n01(rng), 2 * n01(rng)}, torch::kDouble);
        const auto m2 = torch::tensor({2 * n01(rng), 2 * n01(rng)}, torch::kDouble);
        const double k1 = value(kl_loss({m1, lv})), k2 = value(kl_loss({m2, lv}));
        const double mid = value(kl_loss({0.5 * (m1 + m2), lv}));
        REQUIRE(k1 >= 0.0);
        REQUIRE(mid <= 0.5 * (k1 + k2) + 1e-12);
    }
}

TEST_CASE("kl_loss rejects non-finite parameters") {
    const auto nan = torch::tensor({std::nan("")}, torch::kDouble);
    const auto zero = torch::zeros({1}, torch::kDouble);
    CHECK_THROWS_AS(kl_loss({nan, zero}), Error);
    CHECK_THROWS_AS(kl_loss({zero, torch::tensor({INFINITY}, torch::kDouble)}), Error);
}

TEST_CASE("total_loss sums its components") {
    losses::LossComponents parts;
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    double forward = 0, kl = 0;
    for (int i = 0; i < 7; ++i) {
        const double v = u(rng);
        forward += v;
        parts.forward_frame_losses.push_back(torch::tensor(v, torch::kDouble));
    }
    const double back = u(rng);
    parts.backward = torch::tensor(back, torch::kDouble);
    for (int i = 0; i < 4; ++i) {
        const double v = u(rng);
        kl += v;
        parts.kl_terms.push_back(torch::tensor(v, torch::kDouble));
    }
    const auto s = losses::total_loss(parts, {1.0, 0.1});
    CHECK(value(s.total) == doctest::Approx(forward + back + 0.1 * kl).epsilon(1e-14));
    CHECK(s.forward_sum == doctest::Approx(forward).epsilon(1e-14));
    CHECK(value(losses::total_loss(parts, {1.0, 0.0}).total) == doctest::Approx(forward + back).epsilon(1e-14));

    losses::LossComponents zero;
    zero.backward = torch::zeros({}, torch::kDouble);
    zero.forward_frame_losses.assign(7, torch::zeros({}, torch::kDouble));
    CHECK(value(losses::total_loss(zero, {}).total) == 0.0);
}

TEST_CASE("loss weights validation") {
    CHECK_NOTHROW(losses::LossWeights{}.validate());
    CHECK_THROWS_AS((losses::LossWeights{-1.0, 0.1}.validate()), Error);
    CHECK_THROWS_AS((losses::LossWeights{1.0, -0.1}.validate()), Error);
}
