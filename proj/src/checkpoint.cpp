#include "fbsc/checkpoint.hpp"

#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fbsc/error.hpp"

namespace fbsc::pipeline {

namespace fs = std::filesystem;

namespace {

std::string meta_json(const CheckpointMeta& meta) {
    nlohmann::json j{{"config", serialize_config(meta.config)},
                     {"step", meta.step},
                     {"stride", meta.config.data.stride},
                     {"scene_ids", meta.scene_ids},
                     {"mean_color", {meta.mean_color[0], meta.mean_color[1], meta.mean_color[2]}}};
    return j.dump();
}

torch::serialize::InputArchive open_archive(const fs::path& path, torch::Device device) {
    if (!fs::is_regular_file(path)) throw Error("checkpoint not found: " + path.string());
    torch::serialize::InputArchive archive;
    try {
        archive.load_from(path.string(), device);
    } catch (const c10::Error& e) {
        throw Error("cannot read checkpoint " + path.string() + ": not a checkpoint archive");
    }
    return archive;
}

std::string read_format(torch::serialize::InputArchive& archive, const fs::path& path) {
    c10::IValue format;
    if (!archive.try_read("format", format) || !format.isString())
        throw Error("checkpoint " + path.string() + " has no format header (expected " +
                    kCheckpointFormat + ")");
    return format.toStringRef();
}

}  // namespace

void save_checkpoint(const fs::path& path, const CheckpointMeta& meta,
                     predictor::ForwardBackwardModel& model, torch::optim::Optimizer* optimizer) {
    torch::serialize::OutputArchive archive;
    archive.write("format", c10::IValue(meta.format));
    archive.write("meta", c10::IValue(meta_json(meta)));
    torch::serialize::OutputArchive weights;
    model->save(weights);
    archive.write("model", weights);
    if (optimizer) {
        torch::serialize::OutputArchive state;
        optimizer->save(state);
        archive.write("optimizer", state);
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    // Write beside the target and rename, so a crash never leaves half a file.
    const auto tmp = fs::path(path.string() + ".tmp");
    archive.save_to(tmp.string());
    fs::rename(tmp, path);
}

std::string checkpoint_format(const fs::path& path) {
    auto archive = open_archive(path, torch::kCPU);
    return read_format(archive, path);
}

LoadedCheckpoint load_checkpoint(const fs::path& path, torch::Device device) {
    auto archive = open_archive(path, device);
    const auto format = read_format(archive, path);
    if (format != kCheckpointFormat)
        throw Error(fmt::format("checkpoint {} has format {}, this build reads {}", path.string(),
                                format, kCheckpointFormat));

    c10::IValue meta_value;
    archive.read("meta", meta_value);
    const auto j = nlohmann::json::parse(meta_value.toStringRef());

    LoadedCheckpoint out;
    out.meta.format = format;
    out.meta.config = parse_config(j.at("config").get<std::string>());
    out.meta.step = j.at("step").get<int>();
    out.meta.scene_ids = j.at("scene_ids").get<std::vector<std::string>>();
    const auto mc = j.at("mean_color").get<std::vector<double>>();
    out.meta.mean_color = cv::Scalar(mc.at(0), mc.at(1), mc.at(2));

    out.model = predictor::ForwardBackwardModel(out.meta.config.model);
    torch::serialize::InputArchive weights;
    archive.read("model", weights);
    out.model->load(weights);
    out.model->to(device);
    out.model->scene_encoder()->freeze();
    out.model->eval();
    out.id = checkpoint_id(path);
    return out;
}

void restore_optimizer(const fs::path& path, torch::optim::Optimizer& optimizer,
                       torch::Device device) {
    auto archive = open_archive(path, device);
    torch::serialize::InputArchive state;
    if (!archive.try_read("optimizer", state))
        throw Error("checkpoint " + path.string() + " holds no optimizer state");
    optimizer.load(state);
}

std::string checkpoint_id(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint " + path.string());
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return fmt::format("{:016x}", h);
}

}  // namespace fbsc::pipeline
