#include "fbsc/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fbsc/error.hpp"

namespace fbsc::corpus {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
    const auto s = trim(text);
    if (s.empty()) return false;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

TrackTable read_tracks(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open track file " + path.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != "frame_index,track_id,x1,y1,x2,y2")
        throw Error(path.string() + ": missing header frame_index,track_id,x1,y1,x2,y2");
    std::vector<TrackRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split_csv(line);
        TrackRow row;
        if (f.size() != 6 || !parse_number(f[0], row.frame_index) ||
            !parse_number(f[1], row.track_id) || !parse_number(f[2], row.box.x1) ||
            !parse_number(f[3], row.box.y1) || !parse_number(f[4], row.box.x2) ||
            !parse_number(f[5], row.box.y2) || row.frame_index < 0)
            throw Error(path.string() + ": malformed track row at line " + std::to_string(line_no));
        rows.push_back(row);
    }
    try {
        return TrackTable(std::move(rows));
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

std::vector<int> read_labels(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open label file " + path.string());
    std::vector<int> labels;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto s = trim(line);
        if (s.empty()) continue;
        if (s != "0" && s != "1")
            throw Error(path.string() + ": label at line " + std::to_string(line_no) +
                        " is not 0 or 1");
        labels.push_back(s == "1" ? 1 : 0);
    }
    return labels;
}

std::map<std::string, std::string> read_scene_map(const fs::path& root) {
    const auto path = root / "scene_map.csv";
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != "video_id,scene_id")
        throw Error(path.string() + ": missing header video_id,scene_id");
    std::map<std::string, std::string> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 2 || trim(f[0]).empty() || trim(f[1]).empty())
            throw Error(path.string() + ": malformed row at line " + std::to_string(line_no));
        out[trim(f[0])] = trim(f[1]);
    }
    return out;
}

int count_frames(const fs::path& frames_dir) {
    if (!fs::is_directory(frames_dir)) throw Error("missing frame directory " + frames_dir.string());
    int count = 0;
    for (const auto& entry : fs::directory_iterator(frames_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".png") ++count;
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%06d.png", i);
        if (!fs::exists(frames_dir / name))
            throw Error(frames_dir.string() + ": frame files are not numbered 0.." +
                        std::to_string(count - 1));
    }
    return count;
}

fs::path frame_path(const fs::path& frames_dir, int index) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.png", index);
    return frames_dir / name;
}

void write_png(const fs::path& path, const cv::Mat& image) {
    if (!cv::imwrite(path.string(), image)) throw Error("cannot write " + path.string());
}

}  // namespace

std::string to_string(Split split) { return split == Split::Train ? "train" : "test"; }

// ---------------------------------------------------------------------------
// TrackTable

TrackTable::TrackTable(std::vector<TrackRow> rows) : rows_(std::move(rows)) {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& r = rows_[i];
        if (!(r.box.x1 < r.box.x2) || !(r.box.y1 < r.box.y2))
            throw Error("degenerate box for track " + std::to_string(r.track_id) + " at frame " +
                        std::to_string(r.frame_index));
        if (!by_track_frame_.emplace(std::pair{r.track_id, r.frame_index}, i).second)
            throw Error("duplicate row for track " + std::to_string(r.track_id) + " at frame " +
                        std::to_string(r.frame_index));
        by_frame_[r.frame_index].push_back(i);
    }
}

std::optional<Box> TrackTable::box(int track_id, int frame_index) const {
    const auto it = by_track_frame_.find({track_id, frame_index});
    if (it == by_track_frame_.end()) return std::nullopt;
    return rows_[it->second].box;
}

std::vector<int> TrackTable::track_ids() const {
    std::set<int> ids;
    for (const auto& r : rows_) ids.insert(r.track_id);
    return {ids.begin(), ids.end()};
}

std::vector<TrackRow> TrackTable::rows_at(int frame_index) const {
    std::vector<TrackRow> out;
    if (const auto it = by_frame_.find(frame_index); it != by_frame_.end())
        for (auto i : it->second) out.push_back(rows_[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Loading

std::vector<Clip> load_dataset(const fs::path& root, Split split) {
    const auto split_dir = root / to_string(split);
    if (!fs::is_directory(split_dir)) throw Error("missing split directory " + split_dir.string());
    const auto scene_map = read_scene_map(root);

    std::vector<fs::path> video_dirs;
    for (const auto& entry : fs::directory_iterator(split_dir))
        if (entry.is_directory()) video_dirs.push_back(entry.path());
    std::sort(video_dirs.begin(), video_dirs.end());

    std::vector<Clip> clips;
    for (const auto& dir : video_dirs) {
        Clip clip;
        clip.video_id = dir.filename().string();
        const auto scene = scene_map.find(clip.video_id);
        if (scene == scene_map.end())
            throw Error("video " + clip.video_id + " has no entry in scene_map.csv");
        clip.scene_id = scene->second;
        clip.frames_dir = dir / "frames";
        clip.frame_count = count_frames(clip.frames_dir);
        clip.tracks = read_tracks(dir / "tracks.csv");

        const auto label_path = dir / "labels.txt";
        if (split == Split::Train) {
            if (fs::exists(label_path))
                spdlog::warn("ignoring labels file of training video {}", clip.video_id);
        } else {
            if (!fs::exists(label_path))
                throw Error("test video " + clip.video_id + " has no labels.txt");
            auto labels = read_labels(label_path);
            if (static_cast<int>(labels.size()) != clip.frame_count)
                throw Error("video " + clip.video_id + ": " + std::to_string(labels.size()) +
                            " labels for " + std::to_string(clip.frame_count) + " frames");
            clip.labels = std::move(labels);
        }
        clips.push_back(std::move(clip));
    }
    return clips;
}

std::map<std::string, SceneImage> load_scenes(const fs::path& root) {
    const auto dir = root / "scenes";
    if (!fs::is_directory(dir)) throw Error("missing scene directory " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::map<std::string, SceneImage> scenes;
    for (const auto& path : files) {
        cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
        if (img.empty()) throw Error("cannot decode scene image " + path.string());
        const auto id = path.stem().string();
        scenes[id] = SceneImage{id, img};
    }
    return scenes;
}

cv::Scalar dataset_mean_color(const std::map<std::string, SceneImage>& scenes) {
    if (scenes.empty()) throw Error("dataset has no scene images");
    cv::Scalar sum(0, 0, 0);
    for (const auto& [id, scene] : scenes) sum += cv::mean(scene.background);
    return sum * (1.0 / (255.0 * static_cast<double>(scenes.size())));
}

// ---------------------------------------------------------------------------
// Frames

VideoFrames::VideoFrames(const Clip& clip) {
    frames_.reserve(clip.frame_count);
    for (int i = 0; i < clip.frame_count; ++i) {
        const auto path = frame_path(clip.frames_dir, i);
        cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
        if (img.empty()) throw Error("cannot decode frame " + path.string());
        if (!frames_.empty() && img.size() != frames_.front().size())
            throw Error("video " + clip.video_id + ": frame " + std::to_string(i) +
                        " changes resolution");
        frames_.push_back(std::move(img));
    }
}

VideoFrames::VideoFrames(std::vector<cv::Mat> frames) : frames_(std::move(frames)) {}

const cv::Mat& VideoFrames::at(int frame_index) const {
    if (frame_index < 0 || frame_index >= size())
        throw Error("frame index " + std::to_string(frame_index) + " out of range");
    return frames_[frame_index];
}

cv::Size VideoFrames::resolution() const {
    return frames_.empty() ? cv::Size() : frames_.front().size();
}

// ---------------------------------------------------------------------------
// Crops

cv::Rect crop_region(const Box& box, cv::Size frame_size, const WindowGeometry& geometry) {
    const double side_f =
        std::max(std::max(box.width(), box.height()) * geometry.margin,
                 static_cast<double>(geometry.min_side));
    const int side = std::max(1, static_cast<int>(std::lround(side_f)));
    int x = static_cast<int>(std::lround(box.center_x() - 0.5 * side));
    int y = static_cast<int>(std::lround(box.center_y() - 0.5 * side));
    const auto place = [side](int pos, int limit) {
        if (side >= limit) return 0;
        return std::clamp(pos, 0, limit - side);
    };
    x = place(x, frame_size.width);
    y = place(y, frame_size.height);
    return cv::Rect(x, y, std::min(side, frame_size.width), std::min(side, frame_size.height));
}

cv::Mat resize_region(const cv::Mat& frame, const cv::Rect& region, int crop_size) {
    cv::Mat sub = frame(region);
    cv::Mat resized;
    if (region.width == crop_size && region.height == crop_size) {
        resized = sub.clone();
    } else {
        const int interp = region.width > crop_size ? cv::INTER_AREA : cv::INTER_LINEAR;
        cv::resize(sub, resized, cv::Size(crop_size, crop_size), 0, 0, interp);
    }
    cv::Mat out;
    resized.convertTo(out, CV_32FC3, 1.0 / 255.0);
    return out;
}

cv::Mat object_crop(const cv::Mat& frame, const Box& box, const WindowGeometry& geometry) {
    return resize_region(frame, crop_region(box, frame.size(), geometry), geometry.crop_size);
}

std::optional<WindowSample> extract_window(const Clip& clip, const VideoFrames& frames,
                                           int track_id, int t, const WindowGeometry& geometry,
                                           CoverageLog* coverage) {
    const int n = geometry.input_frames;
    WindowSample w;
    w.track_id = track_id;
    w.t = t;
    for (int k = -n; k < geometry.horizon; ++k) {
        const int f = geometry.frame_at(t, k);
        (k < 0 ? w.input_frames : w.target_frames).push_back(f);
    }

    std::vector<Box> boxes;
    for (int k = -n; k < geometry.horizon; ++k) {
        const int f = geometry.frame_at(t, k);
        std::optional<Box> box;
        if (f >= 0 && f < clip.frame_count && f < frames.size()) box = clip.tracks.box(track_id, f);
        if (!box) {
            if (coverage) coverage->skipped.push_back({clip.video_id, track_id, t, f});
            return std::nullopt;
        }
        boxes.push_back(*box);
    }

    for (int k = 0; k < n + geometry.horizon; ++k) {
        const int f = geometry.frame_at(t, k - n);
        auto crop = object_crop(frames.at(f), boxes[k], geometry);
        (k < n ? w.inputs : w.targets).push_back(std::move(crop));
    }
    w.scene_region = crop_region(boxes[n], frames.resolution(), geometry);
    return w;
}

cv::Mat scene_crop(const std::map<std::string, SceneImage>& scenes, const Clip& clip,
                   const WindowSample& window, const cv::Scalar& mean_color,
                   const WindowGeometry& geometry) {
    const auto it = scenes.find(clip.scene_id);
    if (it == scenes.end()) throw Error("unknown scene id " + clip.scene_id);
    const cv::Mat& background = it->second.background;
    const cv::Rect region = window.scene_region;
    if ((region & cv::Rect(0, 0, background.cols, background.rows)) != region)
        throw Error("scene " + clip.scene_id + " resolution does not match its videos");

    cv::Mat patch = background(region).clone();
    const cv::Scalar fill(mean_color[0] * 255.0, mean_color[1] * 255.0, mean_color[2] * 255.0);
    for (const auto& row : clip.tracks.rows_at(window.t)) {
        const int x1 = static_cast<int>(std::floor(row.box.x1));
        const int y1 = static_cast<int>(std::floor(row.box.y1));
        const int x2 = static_cast<int>(std::ceil(row.box.x2));
        const int y2 = static_cast<int>(std::ceil(row.box.y2));
        const cv::Rect masked = cv::Rect(x1, y1, x2 - x1, y2 - y1) & region;
        if (masked.area() == 0) continue;
        patch(masked - region.tl()).setTo(fill);
    }
    return resize_region(patch, cv::Rect(0, 0, patch.cols, patch.rows), geometry.crop_size);
}

// ---------------------------------------------------------------------------
// Writers

void write_video(const fs::path& root, Split split, const std::string& video_id,
                 const std::vector<cv::Mat>& frames, const TrackTable& tracks,
                 const std::optional<std::vector<int>>& labels) {
    const auto dir = root / to_string(split) / video_id;
    fs::create_directories(dir / "frames");
    for (std::size_t i = 0; i < frames.size(); ++i)
        write_png(frame_path(dir / "frames", static_cast<int>(i)), frames[i]);

    std::ofstream tracks_out(dir / "tracks.csv");
    tracks_out << "frame_index,track_id,x1,y1,x2,y2\n";
    for (const auto& r : tracks.rows())
        tracks_out << fmt::format("{},{},{},{},{},{}\n", r.frame_index, r.track_id, r.box.x1,
                                  r.box.y1, r.box.x2, r.box.y2);
    if (!tracks_out) throw Error("cannot write " + (dir / "tracks.csv").string());

    if (labels) {
        std::ofstream labels_out(dir / "labels.txt");
        for (int g : *labels) labels_out << g << '\n';
        if (!labels_out) throw Error("cannot write " + (dir / "labels.txt").string());
    }
}

void write_scene(const fs::path& root, const std::string& scene_id, const cv::Mat& background) {
    fs::create_directories(root / "scenes");
    write_png(root / "scenes" / (scene_id + ".png"), background);
}

void write_scene_map(const fs::path& root,
                     const std::vector<std::pair<std::string, std::string>>& video_to_scene) {
    fs::create_directories(root);
    std::ofstream out(root / "scene_map.csv");
    out << "video_id,scene_id\n";
    for (const auto& [video, scene] : video_to_scene) out << video << ',' << scene << '\n';
    if (!out) throw Error("cannot write scene_map.csv");
}

}  // namespace fbsc::corpus
