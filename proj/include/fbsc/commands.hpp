#pragma once

// The four CLI commands as library calls.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "fbsc/config.hpp"
#include "fbsc/evaluation.hpp"
#include "fbsc/scoring.hpp"
#include "fbsc/trainer.hpp"

namespace fbsc::pipeline {

// FBSC_DEVICE ("cpu", "cuda", "cuda:1", ...); cpu when unset.
torch::Device device_from_env();

// Refuses a dataset whose training split carries label files.
TrainReport cmd_train(const RunConfig& config, torch::Device device, const TrainOptions& options = {});

struct ScoreOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path data;
    std::filesystem::path out;
    std::vector<int> alphas{1, 2, 3, 4, 5, 6};
    scoring::Scorer scorer = scoring::Scorer::ForwardBackward;
};

// Writes <out>/<video>_a<alpha>.txt ("frame_index score" per line) for alpha 0
// and every requested alpha, plus <out>/manifest.json.
void cmd_score(const ScoreOptions& options, torch::Device device);

struct DumpSet {
    std::string checkpoint_id;
    std::string scorer;
    int stride = 0;
    std::map<int, std::vector<scoring::ScoreSeries>> series;  // alpha in steps -> per video
};

DumpSet read_dumps(const std::filesystem::path& dir);

struct EvalOptions {
    std::vector<std::filesystem::path> dumps;
    std::vector<std::string> names;  // column names; defaults to the dump directory names
    std::filesystem::path data;
    std::filesystem::path out;       // reports and plots; empty to skip writing
    std::optional<std::vector<int>> alphas;  // default: every alpha in the first dump set
};

struct EvalResult {
    std::string dataset;
    std::vector<std::pair<std::string, std::vector<evaluation::SweepRow>>> sweeps;
    std::map<std::string, std::map<int, evaluation::EvalReport>> reports;  // name -> alpha -> report
    std::string table;
};

EvalResult cmd_eval(const EvalOptions& options);

// Generates a standard benchmark; returns the directory checksum.
std::string cmd_gen(const std::string& benchmark, const std::filesystem::path& out,
                    std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace fbsc::pipeline
