#include "fbsc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fbsc/checkpoint.hpp"
#include "fbsc/error.hpp"
#include "fbsc/losses.hpp"
#include "fbsc/tensor_convert.hpp"

namespace fbsc::pipeline {

namespace fs = std::filesystem;

std::uint64_t derive_seed(std::uint64_t seed, const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::uint64_t x = seed ^ h;
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return (x ^ (x >> 31)) & 0x7fffffffffffffffULL;
}

double cosine_learning_rate(double base, int step, int total_steps) {
    if (total_steps <= 0) return base;
    const double progress = std::clamp(static_cast<double>(step - 1) / total_steps, 0.0, 1.0);
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// ---------------------------------------------------------------------------
// CropBank

CropBank::CropBank(std::vector<corpus::Clip> clips,
                   const std::map<std::string, corpus::SceneImage>& scenes,
                   const cv::Scalar& mean_color, const corpus::WindowGeometry& geometry)
    : clips_(std::move(clips)), scenes_(scenes), mean_color_(mean_color), geometry_(geometry) {
    const int n = geometry_.input_frames;
    for (std::size_t c = 0; c < clips_.size(); ++c) {
        const auto& clip = clips_[c];
        const corpus::VideoFrames frames(clip);
        resolution_.push_back(frames.resolution());
        auto& bank = crops_.emplace_back();
        for (const auto& row : clip.tracks.rows())
            bank[{row.track_id, row.frame_index}] =
                to_tensor(corpus::object_crop(frames.at(row.frame_index), row.box, geometry_));

        for (int track : clip.tracks.track_ids()) {
            for (int t = 0; t < clip.frame_count; ++t) {
                bool complete = true;
                for (int k = -n; k < geometry_.horizon && complete; ++k) {
                    const int f = geometry_.frame_at(t, k);
                    complete = f >= 0 && f < clip.frame_count && bank.contains({track, f});
                }
                if (complete) windows_.push_back({static_cast<int>(c), track, t});
            }
        }
    }
}

torch::Tensor CropBank::window_frames(const WindowRef& w) const {
    const auto& bank = crops_.at(w.clip);
    std::vector<torch::Tensor> frames;
    for (int k = -geometry_.input_frames; k < geometry_.horizon; ++k)
        frames.push_back(bank.at({w.track_id, geometry_.frame_at(w.t, k)}));
    return torch::stack(frames);
}

torch::Tensor CropBank::scene_crop(const WindowRef& w) const {
    const auto& clip = clips_.at(w.clip);
    corpus::WindowSample sample;
    sample.track_id = w.track_id;
    sample.t = w.t;
    const auto box = clip.tracks.box(w.track_id, w.t);
    if (!box) throw Error("scene_crop: track has no box at frame t");
    sample.scene_region = corpus::crop_region(*box, resolution_.at(w.clip), geometry_);
    return to_tensor(corpus::scene_crop(scenes_, clip, sample, mean_color_, geometry_));
}

// ---------------------------------------------------------------------------
// Scene encoder stage

SceneEncoderReport train_scene_encoder(predictor::SceneEncoder& encoder, const torch::Tensor& crops,
                                       const torch::Tensor& labels, const SceneEncoderConfig& config,
                                       std::uint64_t seed, torch::Device device) {
    if (encoder->frozen()) throw Error("scene encoder is already frozen");
    const auto count = crops.size(0);
    if (count != labels.size(0)) throw Error("scene encoder: crops and labels differ in count");
    if (std::get<0>(at::_unique(labels)).numel() < 2)
        spdlog::warn("scene encoder trained on a single scene; classification is trivial");

    std::vector<std::int64_t> train_idx, held_idx;
    for (std::int64_t i = 0; i < count; ++i) (i % 5 == 4 ? held_idx : train_idx).push_back(i);

    std::mt19937_64 rng(seed);
    encoder->to(device);
    encoder->train();
    torch::optim::Adam optimizer(encoder->parameters(),
                                 torch::optim::AdamOptions(config.learning_rate));
    SceneEncoderReport report;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += config.batch_size) {
            const auto end = std::min(train_idx.size(), start + config.batch_size);
            const auto idx = torch::tensor(
                std::vector<std::int64_t>(train_idx.begin() + start, train_idx.begin() + end));
            auto x = crops.index_select(0, idx).to(device);
            auto y = labels.index_select(0, idx).to(device);
            optimizer.zero_grad();
            auto loss = torch::nn::functional::cross_entropy(encoder->logits(x), y);
            loss.backward();
            optimizer.step();
            loss_sum += loss.item<double>();
            ++batches;
        }
        report.epoch_losses.push_back(batches ? loss_sum / batches : 0.0);
        spdlog::info("scene encoder epoch {}: loss {:.4f}", epoch + 1, report.epoch_losses.back());
    }

    encoder->freeze();
    if (!held_idx.empty()) {
        torch::NoGradGuard no_grad;
        const auto idx = torch::tensor(held_idx);
        auto pred = encoder->logits(crops.index_select(0, idx).to(device)).argmax(1).cpu();
        report.heldout_accuracy = pred.eq(labels.index_select(0, idx)).to(torch::kDouble).mean().item<double>();
        report.heldout_size = static_cast<int>(held_idx.size());
        spdlog::info("scene encoder held-out accuracy {:.4f} on {} crops", report.heldout_accuracy,
                     report.heldout_size);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Loss of one batch

losses::LossSummary training_loss(predictor::ForwardBackwardModel& model, const torch::Tensor& frames,
                                  const torch::Tensor& embedding, int backward_step,
                                  const losses::LossWeights& weights, predictor::LatentMode mode) {
    const auto& cfg = model->config();
    const int n = cfg.input_frames;
    const int i = backward_step;
    auto inputs = frames.slice(1, 0, n);
    auto targets = frames.slice(1, n, n + cfg.forward_out);

    auto bundle = predictor::forward_predict(model, inputs, embedding, mode);
    losses::LossComponents parts;
    for (int k = 0; k < cfg.forward_out; ++k)
        parts.forward_frame_losses.push_back(
            losses::frame_loss(targets.select(1, k), bundle.forward_frames.select(1, k), weights.lambda_l1));
    for (const auto& latent : bundle.forward_latents) parts.kl_terms.push_back(losses::kl_loss(latent));

    auto observed = frames.slice(1, 0, n + 1);  // f_{t-n} .. f_t
    auto observed_rev = observed.slice(1, i + 1, n + 1).flip({1});
    auto predicted_rev = bundle.forward_frames.slice(1, 1, i + 1).flip({1});
    auto real_rev = targets.slice(1, 1, i + 1).flip({1});
    auto from_predicted = predictor::backward_predict(model, predicted_rev, observed_rev, embedding, i, mode);
    auto from_real = predictor::backward_predict(model, real_rev, observed_rev, embedding, i, mode);
    parts.backward = losses::backward_loss(from_predicted.frame, from_real.frame, observed.select(1, i),
                                           weights.lambda_l1);
    for (int level = 0; level < 2; ++level)
        parts.kl_terms.push_back(0.5 * (losses::kl_loss(from_predicted.latents[level]) +
                                        losses::kl_loss(from_real.latents[level])));
    return losses::total_loss(parts, weights);
}

// ---------------------------------------------------------------------------
// Main loop

namespace {

std::vector<std::string> scene_index(const std::map<std::string, corpus::SceneImage>& scenes) {
    std::vector<std::string> ids;
    for (const auto& [id, _] : scenes) ids.push_back(id);
    return ids;
}

int scene_label(const std::vector<std::string>& ids, const std::string& scene_id) {
    const auto it = std::find(ids.begin(), ids.end(), scene_id);
    if (it == ids.end()) throw Error("unknown scene id " + scene_id);
    return static_cast<int>(it - ids.begin());
}

// Balanced sample of scene crops, samples_per_scene per scene where available.
std::pair<torch::Tensor, torch::Tensor> scene_training_set(const CropBank& bank,
                                                           const std::vector<std::string>& ids,
                                                           int samples_per_scene, std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> by_scene;
    for (std::size_t w = 0; w < bank.windows().size(); ++w)
        by_scene[scene_label(ids, bank.clips()[bank.windows()[w].clip].scene_id)].push_back(w);
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::size_t, int>> picked;
    for (auto& [label, windows] : by_scene) {
        std::shuffle(windows.begin(), windows.end(), rng);
        const auto take = std::min<std::size_t>(windows.size(), samples_per_scene);
        for (std::size_t k = 0; k < take; ++k) picked.emplace_back(windows[k], label);
    }
    // Interleave scenes so the held-out fifth covers every scene.
    std::shuffle(picked.begin(), picked.end(), rng);
    std::vector<torch::Tensor> crops;
    std::vector<std::int64_t> labels;
    for (const auto& [w, label] : picked) {
        crops.push_back(bank.scene_crop(bank.windows()[w]));
        labels.push_back(label);
    }
    if (crops.empty()) throw Error("no complete training windows for the scene encoder");
    return {torch::stack(crops), torch::tensor(labels)};
}

torch::Tensor window_embeddings(predictor::ForwardBackwardModel& model, const CropBank& bank,
                                torch::Device device) {
    std::vector<torch::Tensor> out;
    constexpr std::size_t kBatch = 256;
    const auto& windows = bank.windows();
    for (std::size_t start = 0; start < windows.size(); start += kBatch) {
        std::vector<torch::Tensor> crops;
        for (std::size_t w = start; w < std::min(windows.size(), start + kBatch); ++w)
            crops.push_back(bank.scene_crop(windows[w]));
        out.push_back(predictor::encode_scene(model, torch::stack(crops).to(device)).cpu());
    }
    return torch::cat(out);
}

void write_scene_log(const fs::path& path, const SceneEncoderReport& report) {
    std::ofstream out(path);
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < report.epoch_losses.size(); ++e)
        out << fmt::format("{},{}\n", e + 1, report.epoch_losses[e]);
    out << fmt::format("heldout_accuracy,{}\n", report.heldout_accuracy);
    if (!out) throw Error("cannot write " + path.string());
}

// Keeps rows with step <= last_step from an earlier run's log.
void truncate_log(const fs::path& path, int last_step) {
    std::ifstream in(path);
    std::vector<std::string> kept;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (!line.empty() && std::stoi(line.substr(0, line.find(','))) <= last_step) kept.push_back(line);
    }
    in.close();
    std::ofstream out(path, std::ios::trunc);
    out << "step,L_f_sum,L_b,L_KL_sum,total\n";
    for (const auto& l : kept) out << l << '\n';
}

}  // namespace

TrainReport train(const RunConfig& config_in, torch::Device device, const TrainOptions& options) {
    torch::set_num_threads(1);
    RunConfig config = config_in;
    config.validate();
    if (config.dataset_root.empty()) throw Error("config: dataset_root is not set");

    const auto scenes = corpus::load_scenes(config.dataset_root);
    const auto scene_ids = scene_index(scenes);
    const auto mean_color = corpus::dataset_mean_color(scenes);

    predictor::ForwardBackwardModel model{nullptr};
    int start_step = 0;
    std::optional<LoadedCheckpoint> resumed;
    if (options.resume) {
        resumed = load_checkpoint(*options.resume, device);
        if (resumed->meta.scene_ids != scene_ids)
            throw Error("resume: checkpoint scenes differ from the dataset's scenes");
        auto ckpt_cfg = resumed->meta.config;
        ckpt_cfg.optimizer.steps = config.optimizer.steps;
        ckpt_cfg.output_dir = config.output_dir;
        ckpt_cfg.dataset_root = config.dataset_root;
        config.model.scene_count = static_cast<int>(scene_ids.size());
        if (!(ckpt_cfg == config))
            spdlog::warn("resume: configuration differs from the checkpoint's; continuing with the checkpoint's model");
        model = resumed->model;
        start_step = resumed->meta.step;
        spdlog::info("resuming from {} at step {}", options.resume->string(), start_step);
    } else {
        config.model.scene_count = static_cast<int>(scene_ids.size());
        torch::manual_seed(derive_seed(config.seed, "init"));
        model = predictor::ForwardBackwardModel(config.model);
        model->to(device);
    }

    fs::create_directories(config.output_dir / "checkpoints");
    {
        std::ofstream cfg_out(config.output_dir / "config.toml");
        cfg_out << serialize_config(config);
    }

    auto clips = corpus::load_dataset(config.dataset_root, corpus::Split::Train);
    if (clips.empty()) throw Error("training split of " + config.dataset_root.string() + " is empty");
    CropBank bank(std::move(clips), scenes, mean_color, config.geometry());
    if (bank.windows().empty()) throw Error("training split holds no complete window");
    spdlog::info("{} training windows from {} clips", bank.windows().size(), bank.clips().size());

    TrainReport report;
    if (!resumed) {
        auto [crops, labels] = scene_training_set(bank, scene_ids, config.scene_encoder.samples_per_scene,
                                                  derive_seed(config.seed, "scene-data"));
        torch::manual_seed(derive_seed(config.seed, "scene-train"));
        report.scene_encoder = train_scene_encoder(model->scene_encoder(), crops, labels, config.scene_encoder,
                                                   derive_seed(config.seed, "scene-order"), device);
        write_scene_log(config.output_dir / "scene_encoder.csv", report.scene_encoder);
    }
    const auto embeddings = window_embeddings(model, bank, device);

    model->forward_net()->train();
    model->backward_net()->train();
    torch::optim::Adam optimizer(model->predictor_parameters(),
                                 torch::optim::AdamOptions(config.optimizer.learning_rate));
    if (resumed) restore_optimizer(*options.resume, optimizer, device);

    const auto log_path = config.output_dir / "train_log.csv";
    if (resumed && fs::exists(log_path)) {
        truncate_log(log_path, start_step);
    } else {
        std::ofstream(log_path, std::ios::trunc) << "step,L_f_sum,L_b,L_KL_sum,total\n";
    }
    std::ofstream log(log_path, std::ios::app);

    CheckpointMeta meta;
    meta.config = config;
    meta.scene_ids = scene_ids;
    meta.mean_color = mean_color;
    auto save = [&](const fs::path& path, int step) {
        meta.step = step;
        save_checkpoint(path, meta, model, &optimizer);
    };

    const int total_steps = config.optimizer.steps;
    const int batch = config.optimizer.batch_size;
    const int max_step = model->config().forward_out - 1;
    for (int step = start_step + 1; step <= total_steps; ++step) {
        std::mt19937_64 rng(derive_seed(config.seed, "step:" + std::to_string(step)));
        torch::manual_seed(derive_seed(config.seed, "noise:" + std::to_string(step)));
        std::uniform_int_distribution<std::size_t> pick(0, bank.windows().size() - 1);
        std::vector<torch::Tensor> frames;
        std::vector<std::int64_t> idx;
        for (int b = 0; b < batch; ++b) {
            const auto w = pick(rng);
            frames.push_back(bank.window_frames(bank.windows()[w]));
            idx.push_back(static_cast<std::int64_t>(w));
        }
        const int backward_step = std::uniform_int_distribution<int>(1, max_step)(rng);

        const double lr = cosine_learning_rate(config.optimizer.learning_rate, step, total_steps);
        for (auto& group : optimizer.param_groups())
            static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);

        auto x = torch::stack(frames).to(device);
        auto emb = embeddings.index_select(0, torch::tensor(idx)).to(device);
        optimizer.zero_grad();
        auto loss = training_loss(model, x, emb, backward_step, config.loss, config.train_latent_mode);
        if (!std::isfinite(loss.total.item<double>()))
            throw Error(fmt::format("training diverged at step {} (non-finite loss)", step));
        loss.total.backward();
        optimizer.step();

        const StepLoss row{step, loss.forward_sum, loss.backward, loss.kl_sum, loss.total.item<double>()};
        report.losses.push_back(row);
        log << fmt::format("{},{},{},{},{}\n", row.step, row.forward_sum, row.backward, row.kl_sum, row.total);
        if (step % config.optimizer.log_every == 0 || step == total_steps)
            spdlog::info("step {}/{}: total {:.5f} (L_f {:.5f}, L_b {:.5f}, KL {:.4f}) lr {:.2e}", step,
                         total_steps, row.total, row.forward_sum, row.backward, row.kl_sum, lr);
        if (step % config.optimizer.checkpoint_every == 0)
            save(config.output_dir / "checkpoints" / fmt::format("step_{:06d}.pt", step), step);
    }
    log.flush();

    report.final_checkpoint = config.output_dir / "final.pt";
    save(report.final_checkpoint, std::max(start_step, total_steps));
    spdlog::info("wrote {}", report.final_checkpoint.string());
    return report;
}

}  // namespace fbsc::pipeline
