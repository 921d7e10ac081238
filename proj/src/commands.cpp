#include "fbsc/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "fbsc/checkpoint.hpp"
#include "fbsc/error.hpp"
#include "fbsc/labels.hpp"
#include "fbsc/synthgen.hpp"

namespace fbsc::pipeline {

namespace fs = std::filesystem;

torch::Device device_from_env() {
    const char* env = std::getenv("FBSC_DEVICE");
    const std::string name = env && *env ? env : "cpu";
    torch::Device device(torch::kCPU);
    try {
        device = torch::Device(name);
    } catch (const c10::Error&) {
        throw Error("FBSC_DEVICE: unrecognised device \"" + name + "\"");
    }
    if (device.is_cuda() && !torch::cuda::is_available())
        throw Error("FBSC_DEVICE=" + name + " but CUDA is not available in this build");
    return device;
}

// ---------------------------------------------------------------------------
// train

TrainReport cmd_train(const RunConfig& config, torch::Device device, const TrainOptions& options) {
    // Semi-supervised guard: presence is checked by name only, the files are never opened.
    const auto train_dir = config.dataset_root / "train";
    if (fs::is_directory(train_dir))
        for (const auto& entry : fs::directory_iterator(train_dir))
            if (entry.is_directory() && fs::exists(entry.path() / "labels.txt"))
                throw Error("refusing to train: " + (entry.path() / "labels.txt").string() +
                            " exists; the training split must be unlabelled");
    return train(config, device, options);
}

// ---------------------------------------------------------------------------
// score

namespace {

std::string dump_name(const std::string& video_id, int alpha) {
    return fmt::format("{}_a{}.txt", video_id, alpha);
}

void write_series(const fs::path& path, const scoring::ScoreSeries& s) {
    std::ofstream out(path);
    for (std::size_t k = 0; k < s.values.size(); ++k)
        out << fmt::format("{} {}\n", s.start_offset + static_cast<int>(k), s.values[k]);
    if (!out) throw Error("cannot write " + path.string());
}

scoring::ScoreSeries read_series(const fs::path& path, const std::string& video_id, int alpha_frames,
                                 int start_offset) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open score dump " + path.string());
    scoring::ScoreSeries s{video_id, alpha_frames, start_offset, {}};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        int frame = 0;
        std::string value;
        if (!(fields >> frame >> value)) throw Error(fmt::format("{}:{}: malformed score line", path.string(), line_no));
        double v = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc() || ptr != value.data() + value.size())
            throw Error(fmt::format("{}:{}: malformed score value", path.string(), line_no));
        if (frame != start_offset + static_cast<int>(s.values.size()))
            throw Error(fmt::format("{}:{}: frame index {} out of sequence", path.string(), line_no, frame));
        s.values.push_back(v);
    }
    return s;
}

}  // namespace

void cmd_score(const ScoreOptions& options, torch::Device device) {
    torch::set_num_threads(1);
    auto ckpt = load_checkpoint(options.checkpoint, device);
    const auto& config = ckpt.meta.config;
    for (int a : options.alphas)
        if (a < 1 || a > config.model.forward_out - 1)
            throw Error(fmt::format("alpha {} outside [1, {}]", a, config.model.forward_out - 1));

    const auto scenes = corpus::load_scenes(options.data);
    const auto clips = corpus::load_dataset(options.data, corpus::Split::Test);
    scoring::ScoringContext context;
    context.model = ckpt.model;
    context.scenes = &scenes;
    context.mean_color = ckpt.meta.mean_color;
    context.options = config.scoring_options();
    context.device = device;

    fs::create_directories(options.out);
    nlohmann::json entries = nlohmann::json::array();
    const bool fb = options.scorer == scoring::Scorer::ForwardBackward;
    for (const auto& clip : clips) {
        const corpus::VideoFrames frames(clip);
        auto scores = scoring::score_video(clip, frames, context, options.alphas);
        const auto& chosen = fb ? scores.forward_backward : scores.forward_only;
        for (const auto& [alpha, series] : chosen) {
            const auto out_series = config.scoring.minmax_normalize ? scoring::minmax_normalized(series) : series;
            const auto file = dump_name(clip.video_id, alpha);
            write_series(options.out / file, out_series);
            entries.push_back({{"video_id", clip.video_id},
                               {"alpha", alpha},
                               {"alpha_frames", series.alpha},
                               {"start_offset", series.start_offset},
                               {"file", file}});
        }
        spdlog::info("scored {}: {} windows", clip.video_id, scores.windows_scored);
    }
    nlohmann::json manifest{{"checkpoint", options.checkpoint.string()},
                            {"checkpoint_id", ckpt.id},
                            {"format", ckpt.meta.format},
                            {"stride", config.data.stride},
                            {"scorer", scoring::to_string(options.scorer)},
                            {"alphas", options.alphas},
                            {"entries", entries}};
    std::ofstream out(options.out / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw Error("cannot write " + (options.out / "manifest.json").string());
}

DumpSet read_dumps(const fs::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw Error("no manifest.json in " + dir.string());
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("cannot parse " + manifest_path.string() + ": " + e.what());
    }
    DumpSet set;
    set.checkpoint_id = m.at("checkpoint_id").get<std::string>();
    set.scorer = m.at("scorer").get<std::string>();
    set.stride = m.at("stride").get<int>();
    for (const auto& e : m.at("entries")) {
        const auto video = e.at("video_id").get<std::string>();
        set.series[e.at("alpha").get<int>()].push_back(
            read_series(dir / e.at("file").get<std::string>(), video, e.at("alpha_frames").get<int>(),
                        e.at("start_offset").get<int>()));
    }
    return set;
}

// ---------------------------------------------------------------------------
// eval

EvalResult cmd_eval(const EvalOptions& options) {
    if (options.dumps.empty()) throw Error("eval: at least one dump directory is required");
    if (!options.names.empty() && options.names.size() != options.dumps.size())
        throw Error("eval: one name per dump directory");

    const auto clips = corpus::load_dataset(options.data, corpus::Split::Test);
    std::map<std::string, labels::LabelSeries> g0;
    for (const auto& clip : clips) {
        if (!clip.labels) throw Error("eval: test clip " + clip.video_id + " has no labels");
        g0[clip.video_id] = {clip.video_id, 0, *clip.labels};
    }

    EvalResult result;
    result.dataset = fs::path(options.data).lexically_normal().filename().string();
    if (result.dataset.empty()) result.dataset = fs::path(options.data).lexically_normal().parent_path().filename().string();
    if (const auto spec = options.data / "spec.json"; fs::exists(spec)) {
        std::ifstream in(spec);
        result.dataset = nlohmann::json::parse(in).value("name", result.dataset);
    }

    std::vector<int> alphas;
    for (std::size_t d = 0; d < options.dumps.size(); ++d) {
        const auto dumps = read_dumps(options.dumps[d]);
        auto name = options.names.empty() ? options.dumps[d].lexically_normal().filename().string()
                                          : options.names[d];
        if (name.empty()) name = options.dumps[d].lexically_normal().parent_path().filename().string();
        if (d == 0) {
            if (options.alphas) {
                alphas = *options.alphas;
                if (std::find(alphas.begin(), alphas.end(), 0) == alphas.end()) alphas.insert(alphas.begin(), 0);
            } else {
                for (const auto& [a, _] : dumps.series) alphas.push_back(a);
            }
            std::sort(alphas.begin(), alphas.end());
        }

        std::map<int, std::vector<labels::AlignedPair>> pairs;
        for (const auto& [alpha, per_video] : dumps.series) {
            if (std::find(alphas.begin(), alphas.end(), alpha) == alphas.end()) continue;
            for (const auto& series : per_video) {
                const auto it = g0.find(series.video_id);
                if (it == g0.end()) throw Error("eval: no labels for video " + series.video_id);
                const auto labels = alpha == 0 ? it->second : labels::anticipation_labels(it->second, series.alpha);
                pairs[alpha].push_back(labels::align_series(series, labels));
            }
            auto report = evaluation::concat_auc(pairs[alpha], result.dataset, alpha);
            report.scorer = dumps.scorer;
            if (!options.out.empty())
                evaluation::emit_plots(report, options.out / name, fmt::format("alpha_{}", alpha));
            result.reports[name][alpha] = std::move(report);
        }
        result.sweeps.emplace_back(name, evaluation::horizon_sweep(pairs, alphas, result.dataset));
    }

    result.table = evaluation::format_sweep_table(result.sweeps);
    if (!options.out.empty()) {
        fs::create_directories(options.out);
        std::ofstream(options.out / "sweep.csv") << evaluation::sweep_csv(result.sweeps);
        std::ofstream(options.out / "sweep.txt") << result.table;
        evaluation::emit_sweep_plot(result.sweeps, options.out / "sweep.png");
    }
    return result;
}

// ---------------------------------------------------------------------------
// gen

std::string cmd_gen(const std::string& benchmark, const fs::path& out, std::optional<std::uint64_t> seed) {
    if (fs::exists(out) && !fs::is_empty(out))
        throw Error("output directory " + out.string() + " is not empty");
    const auto spec = synthgen::benchmark(benchmark, seed);
    synthgen::generate(spec, out);
    return synthgen::directory_checksum(out);
}

}  // namespace fbsc::pipeline
