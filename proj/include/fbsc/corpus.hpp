#pragma once

// Dataset ingestion and object-centric clip windows.
//
// On-disk layout (one dataset root):
//   <root>/{train,test}/<video_id>/frames/%06d.png
//   <root>/<split>/<video_id>/labels.txt      one 0/1 per line, test split only
//   <root>/<split>/<video_id>/tracks.csv      frame_index,track_id,x1,y1,x2,y2
//   <root>/scenes/<scene_id>.png
//   <root>/scene_map.csv                      video_id,scene_id

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>

namespace fbsc::corpus {

enum class Split { Train, Test };

std::string to_string(Split split);

struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double center_x() const { return 0.5 * (x1 + x2); }
    double center_y() const { return 0.5 * (y1 + y2); }
    bool operator==(const Box&) const = default;
};

struct TrackRow {
    int frame_index = 0;
    int track_id = 0;
    Box box;
    bool operator==(const TrackRow&) const = default;
};

// Per-frame object boxes keyed by (track_id, frame_index). Rows keep their
// insertion order; lookups go through an index.
class TrackTable {
public:
    TrackTable() = default;
    // Throws on degenerate boxes or duplicate (frame_index, track_id) pairs.
    explicit TrackTable(std::vector<TrackRow> rows);

    const std::vector<TrackRow>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }

    std::optional<Box> box(int track_id, int frame_index) const;
    std::vector<int> track_ids() const;
    std::vector<TrackRow> rows_at(int frame_index) const;

private:
    std::vector<TrackRow> rows_;
    std::map<std::pair<int, int>, std::size_t> by_track_frame_;
    std::map<int, std::vector<std::size_t>> by_frame_;
};

struct Clip {
    std::string video_id;
    std::string scene_id;
    int frame_count = 0;
    std::optional<std::vector<int>> labels;  // G_0, absent for the training split
    TrackTable tracks;
    std::filesystem::path frames_dir;
};

struct SceneImage {
    std::string scene_id;
    cv::Mat background;  // CV_8UC3
};

// Clips of one split sorted by video_id. Training clips never carry labels:
// a labels file there is ignored (and never opened) with a warning.
std::vector<Clip> load_dataset(const std::filesystem::path& root, Split split);

std::map<std::string, SceneImage> load_scenes(const std::filesystem::path& root);

// Per-channel mean over all scene backgrounds, scaled to [0, 1].
cv::Scalar dataset_mean_color(const std::map<std::string, SceneImage>& scenes);

// All decoded frames of one clip (CV_8UC3, shared resolution).
class VideoFrames {
public:
    VideoFrames() = default;
    explicit VideoFrames(const Clip& clip);
    explicit VideoFrames(std::vector<cv::Mat> frames);

    const cv::Mat& at(int frame_index) const;
    int size() const { return static_cast<int>(frames_.size()); }
    cv::Size resolution() const;

private:
    std::vector<cv::Mat> frames_;
};

struct WindowGeometry {
    int input_frames = 8;
    int horizon = 7;  // target frames f_t .. f_{t+horizon-1}
    int stride = 12;  // raw frames per temporal step
    int crop_size = 256;
    double margin = 1.2;
    int min_side = 0;  // lower bound on the crop side in frame pixels

    // Raw frame index of window offset k, where k=0 is f_t.
    int frame_at(int t, int k) const { return t + k * stride; }
};

struct WindowSample {
    int track_id = 0;
    int t = 0;
    std::vector<int> input_frames;   // f_{t-n} .. f_{t-1}
    std::vector<int> target_frames;  // f_t .. f_{t+horizon-1}
    std::vector<cv::Mat> inputs;     // CV_32FC3, crop_size x crop_size, values in [0, 1]
    std::vector<cv::Mat> targets;
    cv::Rect scene_region;           // crop region at frame t, in frame pixels
    cv::Mat scene;                   // filled by scene_crop when requested
};

struct SkippedWindow {
    std::string video_id;
    int track_id = 0;
    int t = 0;
    int missing_frame = 0;
};

struct CoverageLog {
    std::vector<SkippedWindow> skipped;
};

// Square region of side max(max(w, h) * margin, min_side) centred on the box,
// shifted to lie inside the frame (and intersected with it when larger).
cv::Rect crop_region(const Box& box, cv::Size frame_size, const WindowGeometry& geometry);

// Region cut from an 8-bit frame and resized to crop_size, as CV_32FC3 in [0, 1].
cv::Mat resize_region(const cv::Mat& frame, const cv::Rect& region, int crop_size);

cv::Mat object_crop(const cv::Mat& frame, const Box& box, const WindowGeometry& geometry);

// Window of track_id around t, or nullopt (logged to coverage) when the track
// lacks a box at one of the required strided frames or the frames fall
// outside the video.
std::optional<WindowSample> extract_window(const Clip& clip, const VideoFrames& frames,
                                           int track_id, int t, const WindowGeometry& geometry,
                                           CoverageLog* coverage = nullptr);

// Background crop co-located with the window's crop at frame t, every track
// box of that frame that intersects the region filled with mean_color.
cv::Mat scene_crop(const std::map<std::string, SceneImage>& scenes, const Clip& clip,
                   const WindowSample& window, const cv::Scalar& mean_color,
                   const WindowGeometry& geometry);

// Writers for the on-disk layout, used by the generator and by tests.
void write_video(const std::filesystem::path& root, Split split, const std::string& video_id,
                 const std::vector<cv::Mat>& frames, const TrackTable& tracks,
                 const std::optional<std::vector<int>>& labels);
void write_scene(const std::filesystem::path& root, const std::string& scene_id,
                 const cv::Mat& background);
void write_scene_map(const std::filesystem::path& root,
                     const std::vector<std::pair<std::string, std::string>>& video_to_scene);

}  // namespace fbsc::corpus
