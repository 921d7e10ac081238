#pragma once

// Deterministic sprite-world video generator. Scenes are textured static
// backgrounds; sprites move on straight lines at scene-specific speeds and
// the anomaly schedule injects appearance, speed, scene-dependent and
// trajectory violations. Output follows the corpus on-disk layout.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include "fbsc/corpus.hpp"

namespace fbsc::synthgen {

enum class Shape { Circle, Square, Triangle, Diamond, Cross, Ring };

struct SpriteType {
    std::string name;
    Shape shape = Shape::Circle;
    std::array<int, 3> color_bgr{0, 0, 0};
    int size = 12;
};

enum class Axis { Horizontal, Vertical, Any };

struct Region {
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;  // half-open pixel rectangle

    bool contains(double x, double y) const { return x > x1 && x < x2 && y > y1 && y < y2; }
};

struct SceneRule {
    std::string scene_id;
    std::vector<std::string> normal_types;
    double min_speed = 1.0;  // px/frame, inclusive normal range
    double max_speed = 2.0;
    Axis axis = Axis::Any;
    std::optional<Region> forbidden;
};

enum class AnomalyType { Appearance, Speed, SceneDependent, Trajectory };

std::string to_string(AnomalyType type);

struct ScheduledAnomaly {
    std::string video_id;
    int start_frame = 0;  // inclusive
    int end_frame = 0;    // inclusive
    AnomalyType type = AnomalyType::Appearance;
    std::string sprite_type;  // appearance/scene-dependent: the violating type
};

struct VideoSpec {
    std::string video_id;
    corpus::Split split = corpus::Split::Train;
    std::string scene_id;
};

struct ScenarioSpec {
    std::string name;
    int width = 128;
    int height = 128;
    int frames_per_video = 240;
    int max_objects = 3;
    int min_lifetime = 40;
    int max_lifetime = 120;
    double sample_speed_lo = 1.2;  // normal speeds are drawn from this range,
    double sample_speed_hi = 1.8;  // inside every scene's rule range
    double anomalous_speed = 4.0;
    int pre_roll = 24;         // frames an anomalous sprite is tracked before onset
    int precursor_frames = 24; // trajectory anomalies: turn length before entry
    std::vector<SpriteType> sprites;
    std::vector<SceneRule> scenes;
    std::vector<VideoSpec> videos;
    std::vector<ScheduledAnomaly> anomalies;
    std::uint64_t seed = 0;

    // Throws fbsc::Error naming the first violated constraint.
    void validate() const;

    const SpriteType& sprite(const std::string& name) const;
    const SceneRule& scene(const std::string& scene_id) const;
    const VideoSpec& video(const std::string& video_id) const;
};

struct SpriteState {
    int track_id = 0;
    std::string type;
    double cx = 0, cy = 0;  // continuous centre
    corpus::Box box;        // tight bounds of the rendered mask
};

struct GeneratedVideo {
    VideoSpec spec;
    std::vector<cv::Mat> frames;  // CV_8UC3
    corpus::TrackTable tracks;
    std::vector<int> labels;      // 1 exactly on scheduled spans
    std::vector<std::vector<SpriteState>> states;  // per frame
};

cv::Mat render_background(const ScenarioSpec& spec, const SceneRule& scene);

// Mask (CV_8UC1, 255 inside) of one sprite rendered at the rounded centre.
cv::Mat render_sprite_mask(const SpriteType& sprite, double cx, double cy, cv::Size frame_size);

GeneratedVideo generate_video(const ScenarioSpec& spec, const VideoSpec& video);

// Labels recomputed from sprite trajectories against the scene rules: a frame
// is anomalous when any sprite has a type that is not normal in the scene,
// moves outside the normal speed range, or sits inside the forbidden region.
std::vector<int> rule_labels(const ScenarioSpec& spec, const SceneRule& scene,
                             const std::vector<std::vector<SpriteState>>& states);

// Writes the full dataset plus spec.json under root.
void generate(const ScenarioSpec& spec, const std::filesystem::path& root);

// "basic", "scenedep" and "anticipate" with fixed seeds.
std::vector<ScenarioSpec> standard_benchmarks();
ScenarioSpec benchmark(const std::string& name, std::optional<std::uint64_t> seed = std::nullopt);

nlohmann::json to_json(const ScenarioSpec& spec);
ScenarioSpec spec_from_json(const nlohmann::json& j);

// FNV-1a 64 over every file under root (relative paths and bytes, sorted by
// path), as 16 hex digits.
std::string directory_checksum(const std::filesystem::path& root);

}  // namespace fbsc::synthgen
