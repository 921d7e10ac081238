#include "fbsc/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "fbsc/error.hpp"

namespace fbsc::evaluation {

namespace fs = std::filesystem;

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("AUC: scores and labels differ in length");
    for (int g : labels)
        if (g != 0 && g != 1) throw Error("AUC: labels must be 0 or 1");
}

// Order of indices by ascending score; ties keep index order.
std::vector<std::size_t> ascending_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    return order;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const auto n_neg = static_cast<double>(labels.size()) - n_pos;
    if (n_pos == 0 || n_neg == 0) throw Error("AUC undefined: labels hold a single class");

    const auto order = ascending_order(scores);
    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        // ranks i+1 .. j+1 share their average
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) positive_rank_sum += avg_rank;
        i = j + 1;
    }
    return (positive_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const auto n_neg = static_cast<double>(labels.size()) - n_pos;
    if (n_pos == 0 || n_neg == 0) throw Error("AUC undefined: labels hold a single class");

    auto order = ascending_order(scores);
    std::reverse(order.begin(), order.end());
    std::vector<RocPoint> curve{{0.0, 0.0}};
    double tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            (labels[order[i]] == 1 ? tp : fp) += 1.0;
            ++i;
        }
        curve.push_back({fp / n_neg, tp / n_pos});
    }
    return curve;
}

EvalReport concat_auc(const std::vector<labels::AlignedPair>& pairs, const std::string& dataset,
                      int alpha_steps) {
    EvalReport report;
    report.dataset = dataset;
    report.alpha = alpha_steps;
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& p : pairs) {
        if (!pairs.empty() && p.alpha != pairs.front().alpha)
            throw Error("concat_auc: pairs mix anticipation horizons");
        report.alpha_frames = p.alpha;
        scores.insert(scores.end(), p.scores.begin(), p.scores.end());
        labels.insert(labels.end(), p.labels.begin(), p.labels.end());
        report.excluded_frames += p.dropped_head + p.dropped_tail + p.alpha;

        VideoAuc video{p.video_id, std::nullopt};
        const auto pos = std::count(p.labels.begin(), p.labels.end(), 1);
        if (pos > 0 && pos < static_cast<long>(p.labels.size())) video.auc = auc(p.scores, p.labels);
        report.per_video.push_back(video);
    }
    report.scored_frames = static_cast<int>(scores.size());
    report.n_pos = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
    report.n_neg = report.scored_frames - report.n_pos;
    report.auc = auc(scores, labels);
    report.roc = roc_curve(scores, labels);
    return report;
}

std::vector<SweepRow> horizon_sweep(
    const std::map<int, std::vector<labels::AlignedPair>>& pairs_by_alpha,
    const std::vector<int>& alphas, const std::string& dataset) {
    std::vector<SweepRow> rows;
    for (int a : alphas) {
        SweepRow row{a, std::nullopt};
        if (const auto it = pairs_by_alpha.find(a); it != pairs_by_alpha.end() && !it->second.empty())
            row.auc = concat_auc(it->second, dataset, a).auc;
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json roc = nlohmann::json::array();
    for (const auto& p : report.roc) roc.push_back({p.fpr, p.tpr});
    nlohmann::json per_video = nlohmann::json::array();
    for (const auto& v : report.per_video)
        per_video.push_back({{"video_id", v.video_id},
                             {"auc", v.auc ? nlohmann::json(*v.auc) : nlohmann::json(nullptr)}});
    return {{"dataset", report.dataset},
            {"scorer", report.scorer},
            {"alpha", report.alpha},
            {"alpha_frames", report.alpha_frames},
            {"auc", report.auc},
            {"n_pos", report.n_pos},
            {"n_neg", report.n_neg},
            {"scored_frames", report.scored_frames},
            {"excluded_frames", report.excluded_frames},
            {"per_video", per_video},
            {"roc", roc}};
}

std::string format_sweep_table(
    const std::vector<std::pair<std::string, std::vector<SweepRow>>>& sweeps) {
    std::ostringstream out;
    out << std::left << std::setw(8) << "alpha";
    for (const auto& [name, rows] : sweeps) out << std::setw(12) << name;
    out << '\n';
    if (sweeps.empty()) return out.str();
    for (std::size_t r = 0; r < sweeps.front().second.size(); ++r) {
        out << std::setw(8) << sweeps.front().second[r].alpha;
        for (const auto& [name, rows] : sweeps) {
            const auto& cell = rows.at(r).auc;
            out << std::setw(12) << (cell ? fmt::format("{:.4f}", *cell) : std::string("absent"));
        }
        out << '\n';
    }
    return out.str();
}

std::string sweep_csv(const std::vector<std::pair<std::string, std::vector<SweepRow>>>& sweeps) {
    std::ostringstream out;
    out << "alpha";
    for (const auto& [name, rows] : sweeps) out << ',' << name;
    out << '\n';
    if (sweeps.empty()) return out.str();
    for (std::size_t r = 0; r < sweeps.front().second.size(); ++r) {
        out << sweeps.front().second[r].alpha;
        for (const auto& [name, rows] : sweeps) {
            const auto& cell = rows.at(r).auc;
            out << ',' << (cell ? fmt::format("{}", *cell) : std::string());
        }
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Plots

namespace {

constexpr int kCanvas = 400;
constexpr int kMargin = 40;

cv::Point to_pixel(double x, double y, double x_lo, double x_hi, double y_lo, double y_hi) {
    const double span = kCanvas - 2 * kMargin;
    const double px = kMargin + (x - x_lo) / (x_hi - x_lo) * span;
    const double py = kCanvas - kMargin - (y - y_lo) / (y_hi - y_lo) * span;
    return {static_cast<int>(std::lround(px)), static_cast<int>(std::lround(py))};
}

cv::Mat blank_axes(const std::string& x_label, const std::string& y_label) {
    cv::Mat img(kCanvas, kCanvas, CV_8UC3, cv::Scalar(255, 255, 255));
    const cv::Scalar black(0, 0, 0);
    cv::line(img, {kMargin, kCanvas - kMargin}, {kCanvas - kMargin, kCanvas - kMargin}, black, 1);
    cv::line(img, {kMargin, kMargin}, {kMargin, kCanvas - kMargin}, black, 1);
    cv::putText(img, x_label, {kCanvas / 2 - 20, kCanvas - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                black, 1, cv::LINE_8);
    cv::putText(img, y_label, {4, kMargin - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.45, black, 1,
                cv::LINE_8);
    return img;
}

void write_image(const fs::path& path, const cv::Mat& img) {
    if (!cv::imwrite(path.string(), img)) throw Error("cannot write " + path.string());
}

const std::vector<cv::Scalar>& palette() {
    static const std::vector<cv::Scalar> colors{
        {200, 80, 20}, {30, 30, 200}, {40, 150, 40}, {150, 40, 150}, {20, 150, 200}};
    return colors;
}

}  // namespace

void emit_plots(const EvalReport& report, const fs::path& dir, const std::string& stem) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory " + dir.string());

    const auto json_path = dir / (stem + ".json");
    std::ofstream out(json_path);
    if (!out) throw Error("cannot write " + json_path.string());
    out << to_json(report).dump(2) << '\n';
    if (!out) throw Error("cannot write " + json_path.string());

    cv::Mat img = blank_axes("FPR", "TPR");
    cv::line(img, to_pixel(0, 0, 0, 1, 0, 1), to_pixel(1, 1, 0, 1, 0, 1), {180, 180, 180}, 1);
    std::vector<cv::Point> pts;
    for (const auto& p : report.roc) pts.push_back(to_pixel(p.fpr, p.tpr, 0, 1, 0, 1));
    cv::polylines(img, pts, false, palette()[0], 2, cv::LINE_8);
    cv::putText(img, fmt::format("AUC {:.4f}", report.auc), {kCanvas - 150, kCanvas - 60},
                cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0}, 1, cv::LINE_8);
    write_image(dir / (stem + "_roc.png"), img);
}

void emit_sweep_plot(const std::vector<std::pair<std::string, std::vector<SweepRow>>>& sweeps,
                     const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    double x_lo = 0, x_hi = 1, y_lo = 1, y_hi = 0;
    bool any = false;
    for (const auto& [name, rows] : sweeps)
        for (const auto& r : rows) {
            x_hi = std::max(x_hi, static_cast<double>(r.alpha));
            if (r.auc) {
                y_lo = std::min(y_lo, *r.auc);
                y_hi = std::max(y_hi, *r.auc);
                any = true;
            }
        }
    if (!any) y_lo = 0, y_hi = 1;
    const double pad = std::max(0.01, 0.1 * (y_hi - y_lo));
    y_lo -= pad;
    y_hi += pad;

    cv::Mat img = blank_axes("alpha", "AUC");
    for (std::size_t s = 0; s < sweeps.size(); ++s) {
        const auto color = palette()[s % palette().size()];
        std::vector<cv::Point> pts;
        for (const auto& r : sweeps[s].second)
            if (r.auc) pts.push_back(to_pixel(r.alpha, *r.auc, x_lo, x_hi, y_lo, y_hi));
        if (pts.size() > 1) cv::polylines(img, pts, false, color, 1, cv::LINE_8);
        for (const auto& p : pts) cv::circle(img, p, 4, color, cv::FILLED, cv::LINE_8);
        cv::putText(img, sweeps[s].first, {kCanvas - 120, kMargin + 16 * static_cast<int>(s)},
                    cv::FONT_HERSHEY_SIMPLEX, 0.45, color, 1, cv::LINE_8);
    }
    write_image(path, img);
}

}  // namespace fbsc::evaluation
