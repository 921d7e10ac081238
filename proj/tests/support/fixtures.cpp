#include "support/fixtures.hpp"

#include <unistd.h>

namespace fbsc::testing {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("fbsc_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

synthgen::ScenarioSpec tiny_spec() {
    synthgen::ScenarioSpec s;
    s.name = "tiny";
    s.seed = 7;
    s.width = 64;
    s.height = 64;
    s.frames_per_video = 60;
    s.max_objects = 2;
    s.min_lifetime = 20;
    s.max_lifetime = 50;
    s.pre_roll = 10;
    s.precursor_frames = 8;
    s.sprites = {{"disc", synthgen::Shape::Circle, {40, 40, 225}, 8},
                 {"box", synthgen::Shape::Square, {225, 90, 30}, 8},
                 {"cross", synthgen::Shape::Cross, {230, 40, 230}, 8}};
    s.scenes = {{"a", {"disc"}, 1.0, 2.0, synthgen::Axis::Any, std::nullopt},
                {"b", {"box"}, 1.0, 2.0, synthgen::Axis::Any, std::nullopt}};
    s.videos = {{"train_a", corpus::Split::Train, "a"},
                {"train_b", corpus::Split::Train, "b"},
                {"test_a", corpus::Split::Test, "a"},
                {"test_b", corpus::Split::Test, "b"}};
    s.anomalies = {{"test_a", 25, 34, synthgen::AnomalyType::Appearance, "cross"},
                   {"test_b", 30, 37, synthgen::AnomalyType::Speed, ""}};
    return s;
}

predictor::ModelConfig tiny_model() {
    predictor::ModelConfig m;
    m.crop_size = 16;
    m.widths = {4, 8, 8};
    m.latent_dim = 4;
    m.scene_embedding_dim = 8;
    m.scene_count = 2;
    return m;
}

pipeline::RunConfig tiny_config(const fs::path& data, const fs::path& out) {
    pipeline::RunConfig c;
    c.dataset_root = data;
    c.output_dir = out;
    c.seed = 3;
    c.model = tiny_model();
    c.data.stride = 1;
    c.data.min_side = 20;
    c.scoring.patch = 4;
    c.scoring.patch_stride = 2;
    c.optimizer.batch_size = 4;
    c.optimizer.steps = 6;
    c.optimizer.checkpoint_every = 3;
    c.optimizer.learning_rate = 1e-3;
    c.scene_encoder.epochs = 2;
    c.scene_encoder.samples_per_scene = 20;
    return c;
}

}  // namespace fbsc::testing
