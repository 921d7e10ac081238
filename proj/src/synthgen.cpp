#include "fbsc/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include <fmt/format.h>
#include <opencv2/imgproc.hpp>

#include "fbsc/error.hpp"

namespace fbsc::synthgen {

namespace fs = std::filesystem;

namespace {

constexpr double kSpeedTolerance = 1e-9;
constexpr int kGap = 3;  // minimum pixel gap between sprite boxes

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Portable draws on top of mt19937_64 (the standard distributions are not
// specified bit-for-bit across library implementations).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }
    int integer(int lo, int hi) {  // inclusive
        const int v = lo + static_cast<int>(uniform(0.0, 1.0) * (hi - lo + 1));
        return std::min(v, hi);
    }
    bool chance(double p) { return uniform(0.0, 1.0) < p; }

private:
    std::mt19937_64 engine_;
};

struct Vec {
    double x = 0, y = 0;
    Vec operator+(Vec o) const { return {x + o.x, y + o.y}; }
    Vec operator-(Vec o) const { return {x - o.x, y - o.y}; }
    Vec operator*(double s) const { return {x * s, y * s}; }
};

// One sprite track: centres and types per frame starting at first_frame.
struct Plan {
    int first_frame = 0;
    std::vector<Vec> centers;
    std::vector<std::string> types;

    int last_frame() const { return first_frame + static_cast<int>(centers.size()) - 1; }
};

std::vector<Vec> directions(Axis axis) {
    const double d = std::numbers::sqrt2 / 2.0;
    switch (axis) {
        case Axis::Horizontal: return {{1, 0}, {-1, 0}};
        case Axis::Vertical: return {{0, 1}, {0, -1}};
        case Axis::Any: break;
    }
    return {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {d, d}, {d, -d}, {-d, d}, {-d, -d}};
}

class Planner {
public:
    Planner(const ScenarioSpec& spec, const SceneRule& scene, Rng& rng)
        : spec_(spec), scene_(scene), rng_(rng) {}

    int half(const std::string& type) const { return spec_.sprite(type).size / 2; }

    bool in_frame(Vec c, const std::string& type) const {
        const int h = half(type);
        return c.x >= h + 1 && c.x <= spec_.width - h - 2 && c.y >= h + 1 &&
               c.y <= spec_.height - h - 2;
    }

    // True when the sprite box touches the forbidden region (with a margin).
    bool near_forbidden(Vec c, const std::string& type) const {
        if (!scene_.forbidden) return false;
        const auto& r = *scene_.forbidden;
        const int h = half(type) + 2;
        return c.x + h > r.x1 && c.x - h < r.x2 && c.y + h > r.y1 && c.y - h < r.y2;
    }

    bool conflicts(const Plan& p) const {
        for (const auto& q : plans_) {
            const int lo = std::max(p.first_frame, q.first_frame);
            const int hi = std::min(p.last_frame(), q.last_frame());
            for (int f = lo; f <= hi; ++f) {
                const auto a = p.centers[f - p.first_frame];
                const auto b = q.centers[f - q.first_frame];
                const double reach = half(p.types[f - p.first_frame]) +
                                     half(q.types[f - q.first_frame]) + kGap + 1;
                if (std::abs(a.x - b.x) < reach && std::abs(a.y - b.y) < reach) return true;
            }
        }
        return false;
    }

    int active_at(int frame) const {
        int n = 0;
        for (const auto& p : plans_)
            if (frame >= p.first_frame && frame <= p.last_frame()) ++n;
        return n;
    }

    void add(Plan p) { plans_.push_back(std::move(p)); }
    const std::vector<Plan>& plans() const { return plans_; }

    Vec random_position(const std::string& type) {
        const int h = half(type);
        return {static_cast<double>(rng_.integer(h + 1, spec_.width - h - 2)),
                static_cast<double>(rng_.integer(h + 1, spec_.height - h - 2))};
    }

    Vec random_direction(Axis axis) {
        const auto dirs = directions(axis);
        return dirs[rng_.integer(0, static_cast<int>(dirs.size()) - 1)];
    }

    double normal_speed() { return rng_.uniform(spec_.sample_speed_lo, spec_.sample_speed_hi); }

    // Straight normal track starting at frame `first`; truncated where it
    // would leave the frame or approach the forbidden region.
    std::optional<Plan> normal_track(int first, const std::string& type) {
        Plan p;
        p.first_frame = first;
        const Vec start = random_position(type);
        const Vec dir = random_direction(scene_.axis);
        const double v = normal_speed();
        const int life = rng_.integer(spec_.min_lifetime, spec_.max_lifetime);
        for (int k = 0; k < life && first + k < spec_.frames_per_video; ++k) {
            const Vec c = start + dir * (v * k);
            if (!in_frame(c, type) || near_forbidden(c, type)) break;
            p.centers.push_back(c);
            p.types.push_back(type);
        }
        const int min_len = std::min(spec_.min_lifetime, spec_.frames_per_video - first);
        if (static_cast<int>(p.centers.size()) < std::max(2, min_len)) return std::nullopt;
        return p;
    }

    const ScenarioSpec& spec() const { return spec_; }
    const SceneRule& scene() const { return scene_; }
    Rng& rng() { return rng_; }

private:
    const ScenarioSpec& spec_;
    const SceneRule& scene_;
    Rng& rng_;
    std::vector<Plan> plans_;
};

std::string pick(Rng& rng, const std::vector<std::string>& names) {
    return names[rng.integer(0, static_cast<int>(names.size()) - 1)];
}

// Normal motion for pre_roll frames, then the violation until end_frame.
std::optional<Plan> plan_anomaly_attempt(Planner& planner, const ScheduledAnomaly& a) {
    const auto& spec = planner.spec();
    const auto& scene = planner.scene();
    auto& rng = planner.rng();
    const int span = a.end_frame - a.start_frame + 1;

    Plan p;
    switch (a.type) {
        case AnomalyType::Appearance:
        case AnomalyType::Speed: {
            const std::string base = pick(rng, scene.normal_types);
            p.first_frame = a.start_frame - spec.pre_roll;
            Vec c = planner.random_position(base);
            const Vec dir = planner.random_direction(scene.axis);
            const double v = planner.normal_speed();
            for (int k = 0; k < spec.pre_roll + span; ++k) {
                const bool violating = k >= spec.pre_roll;
                if (k > 0) c = c + dir * (violating && a.type == AnomalyType::Speed ? spec.anomalous_speed : v);
                const std::string type =
                    violating && a.type == AnomalyType::Appearance ? a.sprite_type : base;
                if (!planner.in_frame(c, type) || planner.near_forbidden(c, type)) return std::nullopt;
                p.centers.push_back(c);
                p.types.push_back(type);
            }
            return p;
        }
        case AnomalyType::SceneDependent: {
            p.first_frame = a.start_frame;
            const Vec start = planner.random_position(a.sprite_type);
            const Vec dir = planner.random_direction(scene.axis);
            const double v = planner.normal_speed();
            for (int k = 0; k < span; ++k) {
                const Vec c = start + dir * (v * k);
                if (!planner.in_frame(c, a.sprite_type) || planner.near_forbidden(c, a.sprite_type))
                    return std::nullopt;
                p.centers.push_back(c);
                p.types.push_back(a.sprite_type);
            }
            return p;
        }
        case AnomalyType::Trajectory: {
            const auto& r = *scene.forbidden;
            const std::string type = pick(rng, scene.normal_types);
            const double v = planner.normal_speed();
            // Entry edge: top (moving down) or bottom (moving up) for horizontal
            // scenes, left/right for vertical ones, any for free scenes.
            std::vector<std::pair<Vec, Vec>> edges;  // (inward direction, parallel direction)
            if (scene.axis != Axis::Vertical) {
                edges.push_back({{0, 1}, {1, 0}});
                edges.push_back({{0, 1}, {-1, 0}});
                edges.push_back({{0, -1}, {1, 0}});
                edges.push_back({{0, -1}, {-1, 0}});
            }
            if (scene.axis != Axis::Horizontal) {
                edges.push_back({{1, 0}, {0, 1}});
                edges.push_back({{1, 0}, {0, -1}});
                edges.push_back({{-1, 0}, {0, 1}});
                edges.push_back({{-1, 0}, {0, -1}});
            }
            const auto [in_dir, par_dir] = edges[rng.integer(0, static_cast<int>(edges.size()) - 1)];
            Vec entry;
            const double margin = planner.half(type) + 2;
            if (in_dir.y > 0) entry = {rng.uniform(r.x1 + margin, r.x2 - margin), double(r.y1)};
            if (in_dir.y < 0) entry = {rng.uniform(r.x1 + margin, r.x2 - margin), double(r.y2)};
            if (in_dir.x > 0) entry = {double(r.x1), rng.uniform(r.y1 + margin, r.y2 - margin)};
            if (in_dir.x < 0) entry = {double(r.x2), rng.uniform(r.y1 + margin, r.y2 - margin)};

            const Vec onset = entry + in_dir * (0.5 * v);
            // Backwards from the onset: 2 straight approach frames, the turn,
            // then pre_roll frames of straight motion along the parallel direction.
            std::vector<Vec> before;
            Vec c = onset;
            for (int j = 0; j < 2; ++j) {
                c = c - in_dir * v;
                before.push_back(c);
            }
            const int K = spec.precursor_frames;
            for (int m = 1; m <= K; ++m) {
                const double theta = std::numbers::pi / 2.0 * (K - m + 0.5) / K;
                const Vec heading = par_dir * std::cos(theta) + in_dir * std::sin(theta);
                c = c - heading * v;
                before.push_back(c);
            }
            for (int j = 0; j < spec.pre_roll; ++j) {
                c = c - par_dir * v;
                before.push_back(c);
            }
            std::reverse(before.begin(), before.end());
            p.first_frame = a.start_frame - static_cast<int>(before.size());
            if (p.first_frame < 0) return std::nullopt;
            for (const auto& b : before) {
                if (!planner.in_frame(b, type) || r.contains(b.x, b.y)) return std::nullopt;
                p.centers.push_back(b);
                p.types.push_back(type);
            }
            for (int k = 0; k < span; ++k) {
                const Vec inside = onset + in_dir * (v * k);
                if (!planner.in_frame(inside, type) || !r.contains(inside.x, inside.y))
                    return std::nullopt;
                p.centers.push_back(inside);
                p.types.push_back(type);
            }
            return p;
        }
    }
    return std::nullopt;
}

Plan plan_anomaly(Planner& planner, const ScheduledAnomaly& a) {
    for (int attempt = 0; attempt < 2000; ++attempt) {
        auto p = plan_anomaly_attempt(planner, a);
        if (p && !planner.conflicts(*p)) return *p;
    }
    throw Error(fmt::format("cannot place {} anomaly in video {} at frames {}-{}",
                            to_string(a.type), a.video_id, a.start_frame, a.end_frame));
}

void draw_shape(cv::Mat& img, const SpriteType& sprite, cv::Point c, const cv::Scalar& color) {
    const int s = sprite.size;
    const int h = s / 2;
    switch (sprite.shape) {
        case Shape::Circle: cv::circle(img, c, h, color, cv::FILLED, cv::LINE_8); break;
        case Shape::Square:
            cv::rectangle(img, {c.x - h, c.y - h}, {c.x + h, c.y + h}, color, cv::FILLED, cv::LINE_8);
            break;
        case Shape::Triangle: {
            std::vector<cv::Point> pts{{c.x, c.y - h}, {c.x - h, c.y + h}, {c.x + h, c.y + h}};
            cv::fillConvexPoly(img, pts, color, cv::LINE_8);
            break;
        }
        case Shape::Diamond: {
            std::vector<cv::Point> pts{{c.x, c.y - h}, {c.x + h, c.y}, {c.x, c.y + h}, {c.x - h, c.y}};
            cv::fillConvexPoly(img, pts, color, cv::LINE_8);
            break;
        }
        case Shape::Cross: {
            const int t = std::max(1, s / 6);
            cv::rectangle(img, {c.x - h, c.y - t}, {c.x + h, c.y + t}, color, cv::FILLED, cv::LINE_8);
            cv::rectangle(img, {c.x - t, c.y - h}, {c.x + t, c.y + h}, color, cv::FILLED, cv::LINE_8);
            break;
        }
        case Shape::Ring: cv::circle(img, c, h - 1, color, 3, cv::LINE_8); break;
    }
}

cv::Point rounded(double cx, double cy) {
    return {static_cast<int>(std::lround(cx)), static_cast<int>(std::lround(cy))};
}

const char* shape_name(Shape s) {
    switch (s) {
        case Shape::Circle: return "circle";
        case Shape::Square: return "square";
        case Shape::Triangle: return "triangle";
        case Shape::Diamond: return "diamond";
        case Shape::Cross: return "cross";
        case Shape::Ring: return "ring";
    }
    return "circle";
}

Shape shape_from(const std::string& s) {
    for (Shape v : {Shape::Circle, Shape::Square, Shape::Triangle, Shape::Diamond, Shape::Cross,
                    Shape::Ring})
        if (s == shape_name(v)) return v;
    throw Error("unknown sprite shape " + s);
}

const char* axis_name(Axis a) {
    switch (a) {
        case Axis::Horizontal: return "horizontal";
        case Axis::Vertical: return "vertical";
        case Axis::Any: return "any";
    }
    return "any";
}

Axis axis_from(const std::string& s) {
    for (Axis v : {Axis::Horizontal, Axis::Vertical, Axis::Any})
        if (s == axis_name(v)) return v;
    throw Error("unknown motion axis " + s);
}

AnomalyType anomaly_from(const std::string& s) {
    for (AnomalyType v : {AnomalyType::Appearance, AnomalyType::Speed, AnomalyType::SceneDependent,
                          AnomalyType::Trajectory})
        if (s == to_string(v)) return v;
    throw Error("unknown anomaly type " + s);
}

std::uint64_t video_seed(const ScenarioSpec& spec, const std::string& video_id) {
    return splitmix(spec.seed ^ fnv1a(video_id));
}

}  // namespace

std::string to_string(AnomalyType type) {
    switch (type) {
        case AnomalyType::Appearance: return "appearance";
        case AnomalyType::Speed: return "speed";
        case AnomalyType::SceneDependent: return "scene_dependent";
        case AnomalyType::Trajectory: return "trajectory";
    }
    return "appearance";
}

// ---------------------------------------------------------------------------
// Spec

const SpriteType& ScenarioSpec::sprite(const std::string& name) const {
    for (const auto& s : sprites)
        if (s.name == name) return s;
    throw Error("unknown sprite type " + name);
}

const SceneRule& ScenarioSpec::scene(const std::string& scene_id) const {
    for (const auto& s : scenes)
        if (s.scene_id == scene_id) return s;
    throw Error("unknown scene " + scene_id);
}

const VideoSpec& ScenarioSpec::video(const std::string& video_id) const {
    for (const auto& v : videos)
        if (v.video_id == video_id) return v;
    throw Error("unknown video " + video_id);
}

void ScenarioSpec::validate() const {
    if (width < 32 || height < 32) throw Error("resolution too small");
    if (frames_per_video < 2) throw Error("frames_per_video must be >= 2");
    if (scenes.empty()) throw Error("at least one scene required");
    if (!(sample_speed_lo > 0) || sample_speed_lo > sample_speed_hi)
        throw Error("invalid normal speed sampling range");
    std::set<std::string> names;
    for (const auto& s : sprites)
        if (!names.insert(s.name).second) throw Error("duplicate sprite type " + s.name);
    for (const auto& rule : scenes) {
        if (rule.normal_types.empty()) throw Error("scene " + rule.scene_id + " has no normal types");
        for (const auto& t : rule.normal_types) sprite(t);
        if (sample_speed_lo < rule.min_speed || sample_speed_hi > rule.max_speed)
            throw Error("scene " + rule.scene_id + ": sampled speeds leave the normal range");
        if (anomalous_speed <= rule.max_speed)
            throw Error("anomalous speed must exceed every scene's normal range");
    }
    std::set<std::string> video_ids;
    for (const auto& v : videos) {
        if (!video_ids.insert(v.video_id).second) throw Error("duplicate video id " + v.video_id);
        scene(v.scene_id);
    }
    for (const auto& a : anomalies) {
        const auto& v = video(a.video_id);
        const auto where = fmt::format("anomaly in {} at {}-{}", a.video_id, a.start_frame, a.end_frame);
        if (v.split == corpus::Split::Train) throw Error(where + " is scheduled in the training split");
        if (a.start_frame < 0 || a.end_frame < a.start_frame || a.end_frame >= frames_per_video)
            throw Error(where + " lies outside the video length");
        const auto& rule = scene(v.scene_id);
        const auto normal_here = [&](const std::string& t) {
            return std::find(rule.normal_types.begin(), rule.normal_types.end(), t) !=
                   rule.normal_types.end();
        };
        const auto normal_anywhere = [&](const std::string& t) {
            return std::any_of(scenes.begin(), scenes.end(), [&](const SceneRule& s) {
                return std::find(s.normal_types.begin(), s.normal_types.end(), t) != s.normal_types.end();
            });
        };
        switch (a.type) {
            case AnomalyType::Appearance:
                sprite(a.sprite_type);
                if (normal_anywhere(a.sprite_type))
                    throw Error(where + ": appearance anomaly type is normal in some scene");
                [[fallthrough]];
            case AnomalyType::Speed:
                if (a.start_frame < pre_roll) throw Error(where + " starts before its pre-roll");
                break;
            case AnomalyType::SceneDependent:
                sprite(a.sprite_type);
                if (normal_here(a.sprite_type))
                    throw Error(where + ": scene-dependent type is normal in its own scene");
                if (!normal_anywhere(a.sprite_type))
                    throw Error(where + ": scene-dependent type is normal in no scene");
                break;
            case AnomalyType::Trajectory:
                if (!rule.forbidden) throw Error(where + ": scene has no forbidden region");
                break;
        }
    }
    for (std::size_t i = 0; i < anomalies.size(); ++i)
        for (std::size_t j = i + 1; j < anomalies.size(); ++j) {
            const auto& a = anomalies[i];
            const auto& b = anomalies[j];
            if (a.video_id == b.video_id && a.start_frame <= b.end_frame && b.start_frame <= a.end_frame)
                throw Error("overlapping anomalies in video " + a.video_id);
        }
}

// ---------------------------------------------------------------------------
// Rendering

cv::Mat render_background(const ScenarioSpec& spec, const SceneRule& scene) {
    std::size_t index = 0;
    while (index < spec.scenes.size() && spec.scenes[index].scene_id != scene.scene_id) ++index;
    Rng rng(splitmix(spec.seed ^ fnv1a("scene:" + scene.scene_id)));

    // Muted base colours spread around the hue circle, one per scene.
    const double hue = 360.0 * static_cast<double>(index) / std::max<std::size_t>(1, spec.scenes.size());
    cv::Mat hsv(1, 1, CV_8UC3, cv::Scalar(hue / 2.0, 90, 150));
    cv::Mat bgr;
    cv::cvtColor(hsv, bgr, cv::COLOR_HSV2BGR);
    const auto base = bgr.at<cv::Vec3b>(0, 0);

    const double angle = std::numbers::pi * (static_cast<double>(index) / spec.scenes.size()) + 0.3;
    const double freq = 2.0 * std::numbers::pi / (10.0 + 4.0 * static_cast<double>(index % 3));
    const double ca = std::cos(angle), sa = std::sin(angle);

    cv::Mat img(spec.height, spec.width, CV_8UC3);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            const double stripe = 28.0 * std::sin(freq * (ca * x + sa * y));
            const double noise = rng.uniform(-14.0, 14.0);
            auto& px = img.at<cv::Vec3b>(y, x);
            for (int ch = 0; ch < 3; ++ch)
                px[ch] = cv::saturate_cast<uchar>(base[ch] + stripe + noise);
        }
    // Scattered darker and lighter tiles give every crop some texture.
    for (int i = 0; i < 40; ++i) {
        const int w = rng.integer(4, 12), h = rng.integer(4, 12);
        const int x = rng.integer(0, spec.width - w), y = rng.integer(0, spec.height - h);
        const double shade = rng.uniform(-45.0, 45.0);
        cv::Mat tile = img(cv::Rect(x, y, w, h));
        tile.convertTo(tile, -1, 1.0, shade);
    }
    if (scene.forbidden) {
        const auto& r = *scene.forbidden;
        for (int y = std::max(0, r.y1); y < std::min(spec.height, r.y2); ++y)
            for (int x = std::max(0, r.x1); x < std::min(spec.width, r.x2); ++x) {
                const double speckle = rng.uniform(-30.0, 30.0);
                img.at<cv::Vec3b>(y, x) = cv::Vec3b(cv::saturate_cast<uchar>(50 + speckle / 2),
                                                    cv::saturate_cast<uchar>(140 + speckle),
                                                    cv::saturate_cast<uchar>(60 + speckle / 2));
            }
    }
    return img;
}

cv::Mat render_sprite_mask(const SpriteType& sprite, double cx, double cy, cv::Size frame_size) {
    cv::Mat mask = cv::Mat::zeros(frame_size, CV_8UC1);
    draw_shape(mask, sprite, rounded(cx, cy), cv::Scalar(255));
    return mask;
}

// ---------------------------------------------------------------------------
// Generation

GeneratedVideo generate_video(const ScenarioSpec& spec, const VideoSpec& video) {
    const auto& scene = spec.scene(video.scene_id);
    Rng rng(video_seed(spec, video.video_id));
    Planner planner(spec, scene, rng);

    std::vector<ScheduledAnomaly> scheduled;
    for (const auto& a : spec.anomalies)
        if (a.video_id == video.video_id) scheduled.push_back(a);
    std::sort(scheduled.begin(), scheduled.end(),
              [](const auto& a, const auto& b) { return a.start_frame < b.start_frame; });
    for (const auto& a : scheduled) planner.add(plan_anomaly(planner, a));

    // Fill with normal sprites up to a per-frame target occupancy.
    for (int f = 0; f < spec.frames_per_video; ++f) {
        const int target = rng.integer(1, spec.max_objects);
        for (int attempt = 0; attempt < 30 && planner.active_at(f) < target; ++attempt) {
            auto p = planner.normal_track(f, pick(rng, scene.normal_types));
            if (p && !planner.conflicts(*p)) planner.add(std::move(*p));
        }
    }

    GeneratedVideo out;
    out.spec = video;
    out.labels.assign(spec.frames_per_video, 0);
    for (const auto& a : scheduled)
        for (int f = a.start_frame; f <= a.end_frame; ++f) out.labels[f] = 1;

    const cv::Mat background = render_background(spec, scene);
    const cv::Size size(spec.width, spec.height);
    out.states.resize(spec.frames_per_video);
    std::vector<corpus::TrackRow> rows;
    for (int f = 0; f < spec.frames_per_video; ++f) {
        cv::Mat frame = background.clone();
        for (std::size_t id = 0; id < planner.plans().size(); ++id) {
            const auto& p = planner.plans()[id];
            if (f < p.first_frame || f > p.last_frame()) continue;
            const auto c = p.centers[f - p.first_frame];
            const auto& type = p.types[f - p.first_frame];
            const auto& sprite = spec.sprite(type);
            const auto& col = sprite.color_bgr;
            draw_shape(frame, sprite, rounded(c.x, c.y), cv::Scalar(col[0], col[1], col[2]));
            const cv::Rect bounds = cv::boundingRect(render_sprite_mask(sprite, c.x, c.y, size));
            const corpus::Box box{double(bounds.x), double(bounds.y), double(bounds.x + bounds.width),
                                  double(bounds.y + bounds.height)};
            out.states[f].push_back({static_cast<int>(id), type, c.x, c.y, box});
            rows.push_back({f, static_cast<int>(id), box});
        }
        out.frames.push_back(std::move(frame));
    }
    out.tracks = corpus::TrackTable(std::move(rows));
    return out;
}

std::vector<int> rule_labels(const ScenarioSpec& spec, const SceneRule& scene,
                             const std::vector<std::vector<SpriteState>>& states) {
    // Centres per track to measure speed between consecutive frames.
    std::map<int, std::map<int, std::pair<double, double>>> centers;
    for (int f = 0; f < static_cast<int>(states.size()); ++f)
        for (const auto& s : states[f]) centers[s.track_id][f] = {s.cx, s.cy};

    const auto speed_at = [&](int track, int f) {
        const auto& track_centers = centers.at(track);
        auto cur = track_centers.find(f);
        auto other = track_centers.find(f - 1);
        if (other == track_centers.end()) other = track_centers.find(f + 1);
        if (other == track_centers.end()) return 0.0;
        return std::hypot(cur->second.first - other->second.first,
                          cur->second.second - other->second.second);
    };

    std::vector<int> labels(states.size(), 0);
    for (int f = 0; f < static_cast<int>(states.size()); ++f) {
        for (const auto& s : states[f]) {
            const bool type_ok = std::find(scene.normal_types.begin(), scene.normal_types.end(),
                                           s.type) != scene.normal_types.end();
            const double v = speed_at(s.track_id, f);
            const bool speed_ok =
                v >= scene.min_speed - kSpeedTolerance && v <= scene.max_speed + kSpeedTolerance;
            const bool place_ok = !scene.forbidden || !scene.forbidden->contains(s.cx, s.cy);
            if (!type_ok || !speed_ok || !place_ok) labels[f] = 1;
        }
    }
    (void)spec;
    return labels;
}

void generate(const ScenarioSpec& spec, const fs::path& root) {
    spec.validate();
    fs::create_directories(root);
    for (const auto& scene : spec.scenes)
        corpus::write_scene(root, scene.scene_id, render_background(spec, scene));
    std::vector<std::pair<std::string, std::string>> scene_map;
    for (const auto& video : spec.videos) {
        scene_map.emplace_back(video.video_id, video.scene_id);
        auto gen = generate_video(spec, video);
        std::optional<std::vector<int>> labels;
        if (video.split == corpus::Split::Test) labels = gen.labels;
        corpus::write_video(root, video.split, video.video_id, gen.frames, gen.tracks, labels);
    }
    corpus::write_scene_map(root, scene_map);
    std::ofstream out(root / "spec.json");
    out << to_json(spec).dump(2) << '\n';
    if (!out) throw Error("cannot write spec.json");
}

// ---------------------------------------------------------------------------
// Standard benchmarks

namespace {

std::vector<SpriteType> sprite_vocabulary() {
    return {
        {"disc_red", Shape::Circle, {40, 40, 225}, 12},
        {"box_blue", Shape::Square, {225, 90, 30}, 12},
        {"tri_yellow", Shape::Triangle, {30, 225, 235}, 12},
        {"diamond_cyan", Shape::Diamond, {235, 225, 30}, 12},
        {"cross_magenta", Shape::Cross, {230, 40, 230}, 12},
        {"ring_white", Shape::Ring, {250, 250, 250}, 12},
    };
}

void add_videos(ScenarioSpec& spec, const std::string& scene, int train, int test) {
    for (int i = 0; i < train; ++i)
        spec.videos.push_back({fmt::format("train_{}_{:02d}", scene, i), corpus::Split::Train, scene});
    for (int i = 0; i < test; ++i)
        spec.videos.push_back({fmt::format("test_{}_{:02d}", scene, i), corpus::Split::Test, scene});
}

ScenarioSpec basic_spec() {
    ScenarioSpec s;
    s.name = "basic";
    s.seed = 101;
    s.sprites = sprite_vocabulary();
    s.scenes = {{"s0", {"disc_red", "box_blue"}, 1.0, 2.0, Axis::Any, std::nullopt},
                {"s1", {"box_blue", "tri_yellow"}, 1.0, 2.0, Axis::Any, std::nullopt}};
    for (const auto& sc : s.scenes) add_videos(s, sc.scene_id, 4, 3);
    const std::vector<std::pair<int, int>> spans{{50, 69}, {140, 155}};
    int k = 0;
    for (const auto& v : s.videos) {
        if (v.split != corpus::Split::Test) continue;
        // alternate which span carries which violation
        const bool appearance_first = (k++ % 2) == 0;
        for (int j = 0; j < 2; ++j) {
            const bool appearance = (j == 0) == appearance_first;
            ScheduledAnomaly a;
            a.video_id = v.video_id;
            a.start_frame = spans[j].first;
            a.end_frame = spans[j].second;
            a.type = appearance ? AnomalyType::Appearance : AnomalyType::Speed;
            if (appearance) a.sprite_type = (k % 2) ? "cross_magenta" : "ring_white";
            s.anomalies.push_back(a);
        }
    }
    return s;
}

ScenarioSpec scenedep_spec() {
    ScenarioSpec s;
    s.name = "scenedep";
    s.seed = 202;
    s.sprites = sprite_vocabulary();
    s.scenes = {{"s0", {"disc_red", "box_blue"}, 1.0, 2.0, Axis::Any, std::nullopt},
                {"s1", {"box_blue", "tri_yellow"}, 1.0, 2.0, Axis::Any, std::nullopt},
                {"s2", {"tri_yellow", "diamond_cyan"}, 1.0, 2.0, Axis::Any, std::nullopt},
                {"s3", {"diamond_cyan", "disc_red"}, 1.0, 2.0, Axis::Any, std::nullopt}};
    for (const auto& sc : s.scenes) add_videos(s, sc.scene_id, 3, 2);
    // Each scene receives the types that are normal only in the opposite scene.
    const std::map<std::string, std::vector<std::string>> foreign{
        {"s0", {"tri_yellow", "diamond_cyan"}},
        {"s1", {"diamond_cyan", "disc_red"}},
        {"s2", {"disc_red", "box_blue"}},
        {"s3", {"box_blue", "tri_yellow"}}};
    const std::vector<std::pair<int, int>> spans{{40, 79}, {140, 179}};
    int k = 0;
    for (const auto& v : s.videos) {
        if (v.split != corpus::Split::Test) continue;
        for (int j = 0; j < 2; ++j) {
            ScheduledAnomaly a;
            a.video_id = v.video_id;
            a.start_frame = spans[j].first;
            a.end_frame = spans[j].second;
            a.type = AnomalyType::SceneDependent;
            a.sprite_type = foreign.at(v.scene_id)[(j + k) % 2];
            s.anomalies.push_back(a);
        }
        ++k;
    }
    return s;
}

ScenarioSpec anticipate_spec() {
    ScenarioSpec s;
    s.name = "anticipate";
    s.seed = 303;
    s.sprites = sprite_vocabulary();
    s.pre_roll = 20;
    s.precursor_frames = 20;
    s.scenes = {{"s0", {"disc_red", "box_blue"}, 1.0, 2.0, Axis::Horizontal, Region{36, 80, 92, 120}},
                {"s1", {"box_blue", "tri_yellow"}, 1.0, 2.0, Axis::Horizontal, Region{30, 8, 98, 48}}};
    for (const auto& sc : s.scenes) add_videos(s, sc.scene_id, 4, 3);
    const std::vector<std::pair<int, int>> spans{{70, 89}, {170, 189}};
    for (const auto& v : s.videos) {
        if (v.split != corpus::Split::Test) continue;
        for (const auto& [start, end] : spans)
            s.anomalies.push_back({v.video_id, start, end, AnomalyType::Trajectory, ""});
    }
    return s;
}

}  // namespace

std::vector<ScenarioSpec> standard_benchmarks() {
    return {basic_spec(), scenedep_spec(), anticipate_spec()};
}

ScenarioSpec benchmark(const std::string& name, std::optional<std::uint64_t> seed) {
    for (auto& spec : standard_benchmarks())
        if (spec.name == name) {
            if (seed) spec.seed = *seed;
            return spec;
        }
    throw Error("unknown benchmark " + name + " (expected basic, scenedep or anticipate)");
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const ScenarioSpec& spec) {
    using nlohmann::json;
    json sprites = json::array();
    for (const auto& s : spec.sprites)
        sprites.push_back({{"name", s.name}, {"shape", shape_name(s.shape)}, {"color_bgr", s.color_bgr},
                           {"size", s.size}});
    json scenes = json::array();
    for (const auto& s : spec.scenes) {
        json j{{"scene_id", s.scene_id}, {"normal_types", s.normal_types},
               {"min_speed", s.min_speed}, {"max_speed", s.max_speed}, {"axis", axis_name(s.axis)}};
        j["forbidden"] = s.forbidden ? json{s.forbidden->x1, s.forbidden->y1, s.forbidden->x2,
                                            s.forbidden->y2}
                                     : json(nullptr);
        scenes.push_back(j);
    }
    json videos = json::array();
    for (const auto& v : spec.videos)
        videos.push_back({{"video_id", v.video_id}, {"split", corpus::to_string(v.split)},
                          {"scene_id", v.scene_id}});
    json anomalies = json::array();
    for (const auto& a : spec.anomalies)
        anomalies.push_back({{"video_id", a.video_id}, {"start_frame", a.start_frame},
                             {"end_frame", a.end_frame}, {"type", to_string(a.type)},
                             {"sprite_type", a.sprite_type}});
    return {{"name", spec.name},
            {"seed", spec.seed},
            {"width", spec.width},
            {"height", spec.height},
            {"frames_per_video", spec.frames_per_video},
            {"max_objects", spec.max_objects},
            {"min_lifetime", spec.min_lifetime},
            {"max_lifetime", spec.max_lifetime},
            {"sample_speed", {spec.sample_speed_lo, spec.sample_speed_hi}},
            {"anomalous_speed", spec.anomalous_speed},
            {"pre_roll", spec.pre_roll},
            {"precursor_frames", spec.precursor_frames},
            {"sprites", sprites},
            {"scenes", scenes},
            {"videos", videos},
            {"anomalies", anomalies}};
}

ScenarioSpec spec_from_json(const nlohmann::json& j) {
    ScenarioSpec s;
    s.name = j.at("name").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.frames_per_video = j.at("frames_per_video").get<int>();
    s.max_objects = j.at("max_objects").get<int>();
    s.min_lifetime = j.at("min_lifetime").get<int>();
    s.max_lifetime = j.at("max_lifetime").get<int>();
    s.sample_speed_lo = j.at("sample_speed").at(0).get<double>();
    s.sample_speed_hi = j.at("sample_speed").at(1).get<double>();
    s.anomalous_speed = j.at("anomalous_speed").get<double>();
    s.pre_roll = j.at("pre_roll").get<int>();
    s.precursor_frames = j.at("precursor_frames").get<int>();
    for (const auto& sj : j.at("sprites"))
        s.sprites.push_back({sj.at("name").get<std::string>(), shape_from(sj.at("shape").get<std::string>()),
                             sj.at("color_bgr").get<std::array<int, 3>>(), sj.at("size").get<int>()});
    for (const auto& sj : j.at("scenes")) {
        SceneRule r{sj.at("scene_id").get<std::string>(),
                    sj.at("normal_types").get<std::vector<std::string>>(),
                    sj.at("min_speed").get<double>(), sj.at("max_speed").get<double>(),
                    axis_from(sj.at("axis").get<std::string>()), std::nullopt};
        if (!sj.at("forbidden").is_null()) {
            const auto f = sj.at("forbidden").get<std::array<int, 4>>();
            r.forbidden = Region{f[0], f[1], f[2], f[3]};
        }
        s.scenes.push_back(r);
    }
    for (const auto& vj : j.at("videos")) {
        const auto split = vj.at("split").get<std::string>();
        s.videos.push_back({vj.at("video_id").get<std::string>(),
                            split == "train" ? corpus::Split::Train : corpus::Split::Test,
                            vj.at("scene_id").get<std::string>()});
    }
    for (const auto& aj : j.at("anomalies"))
        s.anomalies.push_back({aj.at("video_id").get<std::string>(), aj.at("start_frame").get<int>(),
                               aj.at("end_frame").get<int>(),
                               anomaly_from(aj.at("type").get<std::string>()),
                               aj.at("sprite_type").get<std::string>()});
    return s;
}

std::string directory_checksum(const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& path : files) {
        h = fnv1a(fs::relative(path, root).generic_string(), h);
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        h = fnv1a(bytes, h);
    }
    return fmt::format("{:016x}", h);
}

}  // namespace fbsc::synthgen
