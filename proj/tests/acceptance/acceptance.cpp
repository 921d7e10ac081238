// Acceptance suite: one PASS/FAIL line per criterion on stdout, details on
// stderr. Long-running criteria (5-9) train on the synthetic benchmarks.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "fbsc/checkpoint.hpp"
#include "fbsc/commands.hpp"
#include "fbsc/evaluation.hpp"
#include "fbsc/labels.hpp"
#include "fbsc/losses.hpp"
#include "fbsc/scoring.hpp"
#include "fbsc/synthgen.hpp"
#include "fbsc/trainer.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace fbsc;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void note(const std::string& line) {
    std::cerr << line << std::endl;
}

fs::path g_work;
fs::path g_cli;
fs::path g_spy;

// ---------------------------------------------------------------------------
// 1: anticipation labels

Outcome label_oracle() {
    const auto start = Clock::now();
    std::mt19937_64 rng(1);
    int mismatches = 0;
    for (int k = 0; k < 1000; ++k) {
        const int T = std::uniform_int_distribution<int>(2, 500)(rng);
        const double p = std::uniform_real_distribution<double>(0.0, 0.3)(rng);
        std::vector<int> g(T);
        for (auto& v : g) v = std::bernoulli_distribution(p)(rng) ? 1 : 0;
        const int alpha = std::uniform_int_distribution<int>(1, std::min(20, T - 1))(rng);
        const auto got = labels::anticipation_labels({"v", 0, g}, alpha);
        if (got.values != testing::window_max_oracle(g, alpha) || got.alpha != alpha) ++mismatches;
    }
    const double secs = seconds_since(start);
    return {mismatches == 0 && secs < 10.0,
            fmt::format("{} of 1000 random sequences disagree with the window-max oracle, {:.2f} s (limit 10 s)",
                        mismatches, secs)};
}

// ---------------------------------------------------------------------------
// 2: loss closed forms

Outcome loss_closed_forms() {
    const auto start = Clock::now();
    torch::manual_seed(2);
    double worst_offset = 0.0;
    for (double c : {-0.3, -0.01, 0.0, 0.05, 0.2, 0.7}) {
        for (double lambda : {0.0, 0.5, 1.0, 2.0}) {
            const auto f = torch::rand({4, 3, 16, 16}, torch::kDouble);
            const double got = losses::frame_loss(f, f + c, lambda).item<double>();
            worst_offset = std::max(worst_offset, std::abs(got - (c * c + lambda * std::abs(c))));
        }
    }
    const int dims = 16;
    const auto zeros = torch::zeros({dims}, torch::kDouble);
    const double kl_standard = losses::kl_loss({zeros, zeros}).item<double>();
    const double kl_shift = losses::kl_loss({torch::ones({dims}, torch::kDouble), zeros}).item<double>() / dims;

    std::mt19937_64 rng(2);
    double worst_quad = 0.0;
    for (int k = 0; k < 100; ++k) {
        const double mu = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
        const double logvar = std::uniform_real_distribution<double>(-2.5, 1.5)(rng);
        const auto dist = predictor::LatentDistribution{torch::full({1}, mu, torch::kDouble),
                                                        torch::full({1}, logvar, torch::kDouble)};
        const double got = losses::kl_loss(dist).item<double>();
        worst_quad = std::max(worst_quad, std::abs(got - testing::kl_quadrature(mu, std::exp(logvar))));
    }
    const double secs = seconds_since(start);
    const bool pass = worst_offset <= 1e-10 && std::abs(kl_standard) <= 1e-12 &&
                      std::abs(kl_shift - 0.5) <= 1e-12 && worst_quad <= 1e-3 && secs < 30.0;
    return {pass, fmt::format("offset error {:.2e} (<=1e-10), KL(0,1) {:.1e}, KL(1,1)/dim {:.6f}, "
                              "quadrature error {:.2e} over 100 draws (<=1e-3), {:.2f} s",
                              worst_offset, kl_standard, kl_shift, worst_quad, secs)};
}

// ---------------------------------------------------------------------------
// 3: gradient check

Outcome gradient_check() {
    const auto start = Clock::now();
    predictor::ModelConfig cfg;
    cfg.crop_size = 8;
    cfg.widths = {4, 4, 4};
    cfg.latent_dim = 2;
    cfg.scene_embedding_dim = 4;
    cfg.scene_count = 2;
    torch::manual_seed(3);
    predictor::ForwardBackwardModel model(cfg);
    model->to(torch::kDouble);
    model->scene_encoder()->freeze();

    const int batch = 2;
    const auto frames = torch::rand({batch, cfg.input_frames + cfg.forward_out, 3, 8, 8}, torch::kDouble);
    const auto embedding = torch::randn({batch, cfg.scene_embedding_dim}, torch::kDouble);
    const losses::LossWeights weights;
    const int step = 3;
    auto loss = [&]() {
        torch::manual_seed(33);
        return pipeline::training_loss(model, frames, embedding, step, weights, predictor::LatentMode::Stochastic)
            .total;
    };

    auto params = model->predictor_parameters();
    for (auto& p : params)
        if (p.grad().defined()) p.grad().zero_();
    loss().backward();

    const double h = 1e-4;
    double worst = 0.0;
    std::int64_t count = 0;
    std::string where;
    torch::NoGradGuard no_grad;
    auto named = model->named_parameters();
    for (const auto& item : named) {
        if (item.key().rfind("scene_encoder", 0) == 0) continue;
        auto p = item.value();
        auto flat = p.view({-1});
        const auto grad = p.grad().view({-1});
        for (std::int64_t k = 0; k < flat.numel(); ++k) {
            const double orig = flat[k].item<double>();
            auto at = [&](double offset) {
                flat[k] = orig + offset;
                return loss().item<double>();
            };
            // fourth-order central difference
            const double numeric = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
            flat[k] = orig;
            const double analytic = grad[k].item<double>();
            const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6});
            if (rel > worst) {
                worst = rel;
                where = fmt::format("{}[{}]", item.key(), k);
            }
            ++count;
        }
    }
    const double secs = seconds_since(start);
    return {worst < 1e-4 && secs < 300.0,
            fmt::format("max relative error {:.2e} at {} over {} parameters (<1e-4), {:.1f} s (limit 300 s)", worst,
                        where, count, secs)};
}

// ---------------------------------------------------------------------------
// 4: AUC

Outcome auc_checks() {
    const auto start = Clock::now();
    std::mt19937_64 rng(4);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        const int n = std::uniform_int_distribution<int>(2, 300)(rng);
        const int levels = std::uniform_int_distribution<int>(2, 40)(rng);  // coarse levels force ties
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) {
            s[i] = std::uniform_int_distribution<int>(0, levels)(rng) / static_cast<double>(levels);
            y[i] = std::bernoulli_distribution(0.3)(rng) ? 1 : 0;
        }
        y[0] = 1;
        y[1] = 0;
        worst = std::max(worst, std::abs(evaluation::auc(s, y) - testing::pair_count_auc(s, y)));
    }
    std::vector<double> s(100000);
    std::vector<int> y(100000);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        y[i] = std::bernoulli_distribution(0.2)(rng) ? 1 : 0;
    }
    const double chance = evaluation::auc(s, y);
    const double secs = seconds_since(start);
    return {worst <= 1e-12 && std::abs(chance - 0.5) <= 0.02 && secs < 60.0,
            fmt::format("max deviation from pair counting {:.1e} on 200 fixtures (<=1e-12), random AUC {:.4f} "
                        "on 1e5 frames (0.5+-0.02), {:.2f} s",
                        worst, chance, secs)};
}

// ---------------------------------------------------------------------------
// Benchmark runs shared by 5-7

fs::path dataset(const std::string& name) {
    const auto dir = g_work / "data" / name;
    const auto stamp = dir / ".complete";
    if (!fs::exists(stamp)) {
        fs::remove_all(dir);
        synthgen::generate(synthgen::benchmark(name), dir);
        std::ofstream(stamp) << synthgen::directory_checksum(dir) << '\n';
    }
    return dir;
}

struct BenchmarkRun {
    std::map<int, double> fb;      // alpha steps -> AUC
    std::map<int, double> f_only;
    double train_seconds = 0.0;
    double score_seconds = 0.0;
};

BenchmarkRun run_benchmark(const std::string& name, const std::string& tag, std::uint64_t seed,
                           double gamma = 1.0) {
    const auto data = dataset(name);
    auto cfg = pipeline::benchmark_preset(name);
    cfg.dataset_root = data;
    cfg.output_dir = g_work / "runs" / tag;
    cfg.seed = seed;
    cfg.model.gamma = gamma;
    fs::remove_all(cfg.output_dir);

    BenchmarkRun run;
    auto start = Clock::now();
    const auto report = pipeline::cmd_train(cfg, torch::kCPU);
    run.train_seconds = seconds_since(start);

    start = Clock::now();
    auto ckpt = pipeline::load_checkpoint(report.final_checkpoint, torch::kCPU);
    const auto scenes = corpus::load_scenes(data);
    const auto clips = corpus::load_dataset(data, corpus::Split::Test);
    scoring::ScoringContext context;
    context.model = ckpt.model;
    context.scenes = &scenes;
    context.mean_color = ckpt.meta.mean_color;
    context.options = ckpt.meta.config.scoring_options();
    const std::vector<int> alphas = cfg.alphas;

    std::map<int, std::vector<labels::AlignedPair>> fb_pairs, f_pairs;
    for (const auto& clip : clips) {
        const corpus::VideoFrames frames(clip);
        const auto scores = scoring::score_video(clip, frames, context, alphas);
        const labels::LabelSeries g0{clip.video_id, 0, *clip.labels};
        for (const auto& [a, series] : scores.forward_backward) {
            const auto g = a == 0 ? g0 : labels::anticipation_labels(g0, series.alpha);
            fb_pairs[a].push_back(labels::align_series(series, g));
            f_pairs[a].push_back(labels::align_series(scores.forward_only.at(a), g));
        }
    }
    for (const auto& [a, pairs] : fb_pairs) run.fb[a] = evaluation::concat_auc(pairs, name, a).auc;
    for (const auto& [a, pairs] : f_pairs) run.f_only[a] = evaluation::concat_auc(pairs, name, a).auc;
    run.score_seconds = seconds_since(start);

    std::string line = fmt::format("  {} (seed {}, gamma {}): train {:.0f} s, score {:.0f} s\n    alpha", tag, seed,
                                   gamma, run.train_seconds, run.score_seconds);
    for (const auto& [a, _] : run.fb) line += fmt::format(" {:>7}", a);
    line += "\n    f+b  ";
    for (const auto& [_, v] : run.fb) line += fmt::format(" {:7.4f}", v);
    line += "\n    f    ";
    for (const auto& [_, v] : run.f_only) line += fmt::format(" {:7.4f}", v);
    note(line);
    return run;
}

// ---------------------------------------------------------------------------
// 5-7

Outcome basic_vad() {
    const auto run = run_benchmark("basic", "basic", 101);
    const double secs = run.train_seconds + run.score_seconds;
    const double auc = run.fb.at(0);
    return {auc >= 0.85 && secs <= 1200.0,
            fmt::format("VAD AUC {:.4f} on basic (>=0.85), train+score {:.0f} s (budget 1200 s)", auc, secs)};
}

Outcome scene_conditioning() {
    const auto with = run_benchmark("scenedep", "scenedep_gamma1", 202, 1.0);
    const auto without = run_benchmark("scenedep", "scenedep_gamma0", 202, 0.0);
    const double gain = with.fb.at(0) - without.fb.at(0);
    return {gain >= 0.10, fmt::format("VAD AUC gamma=1 {:.4f}, gamma=0 {:.4f}, gain {:+.4f} (>=0.10)", with.fb.at(0),
                                      without.fb.at(0), gain)};
}

Outcome anticipation_trends() {
    const std::vector<std::uint64_t> seeds{303, 304, 305};
    int held = 0;
    std::string detail;
    for (auto seed : seeds) {
        const auto run = run_benchmark("anticipate", fmt::format("anticipate_s{}", seed), seed);
        std::vector<int> alphas;
        for (const auto& [a, _] : run.fb)
            if (a >= 1) alphas.push_back(a);
        bool monotone = true;
        for (std::size_t k = 1; k < alphas.size(); ++k)
            monotone = monotone && run.fb.at(alphas[k]) <= run.fb.at(alphas[k - 1]) + 0.01;
        bool dominates = true;
        double gap_max_other = -1.0;
        const int largest = alphas.back();
        for (int a : alphas) {
            if (a < 2) continue;
            const double gap = run.fb.at(a) - run.f_only.at(a);
            dominates = dominates && gap >= 0.0;
            if (a != largest) gap_max_other = std::max(gap_max_other, gap);
        }
        const double gap_largest = run.fb.at(largest) - run.f_only.at(largest);
        const bool widening = gap_largest >= gap_max_other;
        const bool ok = monotone && dominates && widening;
        held += ok ? 1 : 0;
        detail += fmt::format("{}seed {}: {}{}{}", detail.empty() ? "" : "; ", seed,
                              monotone ? "monotone" : "NOT monotone", dominates ? ", f+b>=f" : ", f+b<f somewhere",
                              widening ? fmt::format(", gap {:+.3f} widest at alpha {}", gap_largest, largest)
                                       : fmt::format(", gap {:+.3f} at alpha {} not widest", gap_largest, largest));
    }
    return {held == static_cast<int>(seeds.size()), fmt::format("{} of 3 seeds hold ({})", held, detail)};
}

// ---------------------------------------------------------------------------
// 8-9: through the command-line tool

int run_cli(const std::string& args, const fs::path& log, const std::string& env = "") {
    const auto cmd = fmt::format("{} \"{}\" {} > \"{}\" 2>&1", env, g_cli.string(), args, log.string());
    const int rc = std::system(cmd.c_str());
    if (rc != 0) note(fmt::format("  command failed ({}): {}", rc, cmd));
    return rc;
}

fs::path write_config(const fs::path& data, const fs::path& out, const fs::path& file, int steps) {
    auto cfg = pipeline::benchmark_preset("basic");
    cfg.dataset_root = data;
    cfg.output_dir = out;
    cfg.optimizer.steps = steps;
    cfg.optimizer.checkpoint_every = steps;
    std::ofstream(file) << pipeline::serialize_config(cfg);
    return file;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
    std::vector<std::string> checksums, aucs, sweeps;
    for (int k = 0; k < 2; ++k) {
        const auto root = g_work / fmt::format("determinism_{}", k);
        fs::remove_all(root);
        fs::create_directories(root);
        const auto data = root / "data";
        if (run_cli(fmt::format("gen --benchmark basic --out \"{}\"", data.string()), root / "gen.log") != 0)
            return {false, "gen failed"};
        checksums.push_back(synthgen::directory_checksum(data));
        const auto cfg = write_config(data, root / "run", root / "run.toml", 60);
        if (run_cli(fmt::format("train --config \"{}\"", cfg.string()), root / "train.log") != 0)
            return {false, "train failed"};
        if (run_cli(fmt::format("score --ckpt \"{}\" --data \"{}\" --alphas 1,2,3,4,5,6 --out \"{}\"",
                                (root / "run" / "final.pt").string(), data.string(), (root / "dumps").string()),
                    root / "score.log") != 0)
            return {false, "score failed"};
        if (run_cli(fmt::format("eval --dumps \"{}\" --data \"{}\" --out \"{}\"", (root / "dumps").string(),
                                data.string(), (root / "eval").string()),
                    root / "eval.log") != 0)
            return {false, "eval failed"};
        std::ifstream in(root / "eval" / "dumps" / "alpha_0.json");
        const double auc = nlohmann::json::parse(in).at("auc").get<double>();
        aucs.push_back(fmt::format("{:a}", auc));
        sweeps.push_back(read_file(root / "eval" / "sweep.csv"));
    }
    const bool pass = checksums[0] == checksums[1] && aucs[0] == aucs[1] && sweeps[0] == sweeps[1];
    return {pass, fmt::format("two gen->train->score->eval runs: dataset {} / {}, final AUC {} / {}, sweep {}",
                              checksums[0], checksums[1], aucs[0], aucs[1],
                              sweeps[0] == sweeps[1] ? "identical" : "differs")};
}

Outcome no_label_reads() {
    const auto root = g_work / "label_spy";
    fs::remove_all(root);
    fs::create_directories(root);
    const auto data = dataset("basic");
    const auto train_log = root / "train_opens.txt";
    const auto cfg = write_config(data, root / "run", root / "run.toml", 3);
    const auto spy = fmt::format("FBSC_OPEN_LOG=\"{}\" LD_PRELOAD=\"{}\"", train_log.string(), g_spy.string());
    if (run_cli(fmt::format("train --config \"{}\"", cfg.string()), root / "train.log", spy) != 0)
        return {false, "instrumented train failed"};
    std::size_t opens = 0, frames = 0;
    std::vector<std::string> label_opens;
    {
        std::ifstream in(train_log);
        for (std::string line; std::getline(in, line);) {
            ++opens;
            if (line.find("/frames/") != std::string::npos) ++frames;
            if (line.find("labels") != std::string::npos) label_opens.push_back(line);
        }
    }
    // Positive control: the same spy sees eval read the test labels.
    const auto eval_log = root / "eval_opens.txt";
    const auto spy_eval = fmt::format("FBSC_OPEN_LOG=\"{}\" LD_PRELOAD=\"{}\"", eval_log.string(), g_spy.string());
    run_cli(fmt::format("score --ckpt \"{}\" --data \"{}\" --alphas 1 --out \"{}\"",
                        (root / "run" / "final.pt").string(), data.string(), (root / "dumps").string()),
            root / "score.log");
    run_cli(fmt::format("eval --dumps \"{}\" --data \"{}\"", (root / "dumps").string(), data.string()),
            root / "eval.log", spy_eval);
    std::size_t control = 0;
    {
        std::ifstream in(eval_log);
        for (std::string line; std::getline(in, line);)
            if (line.find("labels.txt") != std::string::npos) ++control;
    }
    const bool pass = label_opens.empty() && frames > 0 && control > 0;
    return {pass, fmt::format("train opened {} files ({} frames), {} label files{}; control: eval opened {} label files",
                              opens, frames, label_opens.size(),
                              label_opens.empty() ? "" : " (first " + label_opens.front() + ")", control)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fbsc acceptance suite"};
    std::string only;
    bool verbose = false;
    app.add_option("--work", g_work, "Scratch directory")->required();
    app.add_option("--cli", g_cli, "Path to the fbsc executable")->required();
    app.add_option("--spy", g_spy, "Path to the open() spy library")->required();
    app.add_option("--only", only, "Comma separated criterion numbers");
    app.add_flag("-v,--verbose", verbose, "Show training logs");
    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);
    torch::set_num_threads(1);
    g_work = fs::absolute(g_work);
    g_cli = fs::absolute(g_cli);
    g_spy = fs::absolute(g_spy);
    fs::create_directories(g_work);

    std::set<int> selected;
    {
        std::stringstream in(only);
        for (std::string item; std::getline(in, item, ',');)
            if (!item.empty()) selected.insert(std::stoi(item));
    }
    const std::vector<std::pair<std::string, Outcome (*)()>> criteria{
        {"label algebra matches the window-max oracle", label_oracle},
        {"loss closed forms", loss_closed_forms},
        {"gradient check", gradient_check},
        {"AUC against pair counting", auc_checks},
        {"VAD on basic", basic_vad},
        {"scene conditioning on scenedep", scene_conditioning},
        {"anticipation trends on anticipate", anticipation_trends},
        {"end-to-end determinism", determinism},
        {"training reads no labels", no_label_reads},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        note(fmt::format("[{}] {} ...", id, criteria[k].first));
        Outcome out;
        try {
            out = criteria[k].second();
        } catch (const std::exception& e) {
            out = {false, std::string("error: ") + e.what()};
        }
        failed += out.pass ? 0 : 1;
        std::cout << (out.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[k].first << ": " << out.detail
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
