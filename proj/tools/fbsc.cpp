// fbsc: train, score, eval and gen subcommands.

#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "fbsc/commands.hpp"
#include "fbsc/error.hpp"

namespace fs = std::filesystem;
using namespace fbsc::pipeline;

namespace {

std::vector<int> parse_alphas(const std::string& text) {
    std::vector<int> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw fbsc::Error("--alphas: \"" + item + "\" is not an integer");
        out.push_back(v);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forward-backward scene-conditioned auto-encoder for video anomaly detection and anticipation"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    auto* train = app.add_subcommand("train", "Train the scene encoder, then the predictors");
    fs::path config_path;
    std::string resume;
    train->add_option("--config", config_path, "Run configuration (TOML)")->required()->check(CLI::ExistingFile);
    train->add_option("--resume", resume, "Checkpoint to continue from");

    auto* score = app.add_subcommand("score", "Write per-frame score dumps for the test split");
    ScoreOptions score_opts;
    std::string alphas_text = "1,2,3,4,5,6";
    bool f_only = false;
    score->add_option("--ckpt", score_opts.checkpoint, "Checkpoint archive")->required();
    score->add_option("--data", score_opts.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
    score->add_option("--alphas", alphas_text, "Anticipation horizons in steps, comma separated");
    score->add_option("--out", score_opts.out, "Dump directory (default <ckpt dir>/dumps)");
    score->add_flag("--f-only", f_only, "Forward-only anticipation scores");

    auto* eval = app.add_subcommand("eval", "Frame-level AUC reports and horizon sweeps");
    EvalOptions eval_opts;
    std::string eval_alphas;
    eval->add_option("--dumps", eval_opts.dumps, "Dump directories (one sweep column each)")->required();
    eval->add_option("--names", eval_opts.names, "Column names, one per dump directory");
    eval->add_option("--data", eval_opts.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--out", eval_opts.out, "Report directory (default <first dumps>/eval)");
    eval->add_option("--alphas", eval_alphas, "Horizons to report, comma separated");

    auto* gen = app.add_subcommand("gen", "Generate a synthetic benchmark");
    std::string benchmark;
    fs::path gen_out;
    std::optional<std::uint64_t> seed;
    gen->add_option("--benchmark", benchmark, "basic, scenedep or anticipate")->required();
    gen->add_option("--out", gen_out, "Output dataset root")->required();
    gen->add_option("--seed", seed, "Override the benchmark seed");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*train) {
            TrainOptions opts;
            if (!resume.empty()) opts.resume = fs::path(resume);
            const auto report = cmd_train(load_config(config_path), device_from_env(), opts);
            std::cout << report.final_checkpoint.string() << '\n';
        } else if (*score) {
            score_opts.alphas = parse_alphas(alphas_text);
            score_opts.scorer = f_only ? fbsc::scoring::Scorer::ForwardOnly : fbsc::scoring::Scorer::ForwardBackward;
            if (score_opts.out.empty()) score_opts.out = score_opts.checkpoint.parent_path() / "dumps";
            cmd_score(score_opts, device_from_env());
            std::cout << score_opts.out.string() << '\n';
        } else if (*eval) {
            if (!eval_alphas.empty()) eval_opts.alphas = parse_alphas(eval_alphas);
            if (eval_opts.out.empty()) eval_opts.out = eval_opts.dumps.front() / "eval";
            const auto result = cmd_eval(eval_opts);
            std::cout << "dataset " << result.dataset << '\n' << result.table;
        } else if (*gen) {
            std::cout << cmd_gen(benchmark, gen_out, seed) << '\n';
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
