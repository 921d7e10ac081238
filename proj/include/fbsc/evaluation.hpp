#pragma once

// Frame-level ROC/AUC after concatenating every video of a dataset.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbsc/labels.hpp"

namespace fbsc::evaluation {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

// Mann-Whitney AUC with average ranks for ties. Throws "AUC undefined" when
// the labels hold a single class.
double auc(std::span<const double> scores, std::span<const int> labels);

// ROC points from (0,0) to (1,1), one per distinct score threshold.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

struct VideoAuc {
    std::string video_id;
    std::optional<double> auc;  // empty when the video holds one class
};

struct EvalReport {
    std::string dataset;
    std::string scorer;
    int alpha = 0;         // in steps
    int alpha_frames = 0;  // in frames
    double auc = 0.0;
    int n_pos = 0;
    int n_neg = 0;
    int scored_frames = 0;
    int excluded_frames = 0;
    std::vector<VideoAuc> per_video;
    std::vector<RocPoint> roc;
};

// pairs: one aligned (scores, labels) pair per video, all with one horizon.
EvalReport concat_auc(const std::vector<labels::AlignedPair>& pairs, const std::string& dataset,
                      int alpha_steps);

struct SweepRow {
    int alpha = 0;  // in steps
    std::optional<double> auc;
};

// One AUC per requested horizon; horizons without data are reported absent.
std::vector<SweepRow> horizon_sweep(
    const std::map<int, std::vector<labels::AlignedPair>>& pairs_by_alpha,
    const std::vector<int>& alphas, const std::string& dataset);

nlohmann::json to_json(const EvalReport& report);

// Side-by-side sweep table, one column per named sweep. Text form for the
// terminal, CSV form for files.
std::string format_sweep_table(const std::vector<std::pair<std::string, std::vector<SweepRow>>>& sweeps);
std::string sweep_csv(const std::vector<std::pair<std::string, std::vector<SweepRow>>>& sweeps);

// Writes <stem>.json and <stem>_roc.png under dir.
void emit_plots(const EvalReport& report, const std::filesystem::path& dir, const std::string& stem);

// AUC-vs-horizon line plot, one line per sweep.
void emit_sweep_plot(const std::vector<std::pair<std::string, std::vector<SweepRow>>>& sweeps,
                     const std::filesystem::path& path);

}  // namespace fbsc::evaluation
