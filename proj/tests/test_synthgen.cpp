#include <doctest.h>

#include <fstream>
#include <set>

#include <opencv2/imgproc.hpp>

#include "fbsc/config.hpp"
#include "fbsc/error.hpp"
#include "fbsc/synthgen.hpp"
#include "support/fixtures.hpp"

#ifndef FBSC_FIXTURE_DIR
#error "FBSC_FIXTURE_DIR must point at tests/fixtures"
#endif

using namespace fbsc;
using namespace fbsc::synthgen;
namespace fs = std::filesystem;

TEST_CASE("regeneration is byte identical") {
    const auto a = testing::temp_dir("gen_a");
    const auto b = testing::temp_dir("gen_b");
    generate(testing::tiny_spec(), a);
    generate(testing::tiny_spec(), b);
    CHECK(directory_checksum(a) == directory_checksum(b));
    auto other = testing::tiny_spec();
    other.seed = 8;
    fs::remove_all(b);
    generate(other, b);
    CHECK(directory_checksum(a) != directory_checksum(b));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("videos without scheduled anomalies are all normal") {
    auto spec = testing::tiny_spec();
    spec.anomalies.clear();
    for (const auto& v : spec.videos) {
        const auto video = generate_video(spec, v);
        CHECK(std::count(video.labels.begin(), video.labels.end(), 1) == 0);
        CHECK(rule_labels(spec, spec.scene(v.scene_id), video.states) == video.labels);
        CHECK(static_cast<int>(video.frames.size()) == spec.frames_per_video);
    }
}

TEST_CASE("scheduled labels agree with the rule engine") {
    auto specs = standard_benchmarks();
    specs.push_back(testing::tiny_spec());
    for (const auto& spec : specs) {
        CAPTURE(spec.name);
        for (const auto& v : spec.videos) {
            if (v.split != corpus::Split::Test) continue;
            const auto video = generate_video(spec, v);
            std::vector<int> scheduled(spec.frames_per_video, 0);
            for (const auto& a : spec.anomalies)
                if (a.video_id == v.video_id)
                    for (int f = a.start_frame; f <= a.end_frame; ++f) scheduled[f] = 1;
            CHECK(video.labels == scheduled);
            CHECK(rule_labels(spec, spec.scene(v.scene_id), video.states) == scheduled);
        }
    }
}

TEST_CASE("training videos obey every scene rule") {
    for (const auto& spec : standard_benchmarks())
        for (const auto& v : spec.videos)
            if (v.split == corpus::Split::Train) {
                const auto video = generate_video(spec, v);
                const auto rules = rule_labels(spec, spec.scene(v.scene_id), video.states);
                CHECK(std::count(rules.begin(), rules.end(), 1) == 0);
            }
}

TEST_CASE("track boxes are the rendered mask bounds") {
    const auto spec = testing::tiny_spec();
    const auto video = generate_video(spec, spec.video("test_a"));
    const cv::Size size(spec.width, spec.height);
    for (std::size_t f = 0; f < video.states.size(); f += 3)
        for (const auto& s : video.states[f]) {
            const auto mask = render_sprite_mask(spec.sprite(s.type), s.cx, s.cy, size);
            const auto r = cv::boundingRect(mask);
            CHECK(s.box == corpus::Box{static_cast<double>(r.x), static_cast<double>(r.y),
                                       static_cast<double>(r.x + r.width), static_cast<double>(r.y + r.height)});
            CHECK(video.tracks.box(s.track_id, static_cast<int>(f)) == s.box);
        }
}

TEST_CASE("scene-dependent benchmark: anomalous types are normal elsewhere") {
    const auto spec = benchmark("scenedep");
    int count = 0;
    for (const auto& a : spec.anomalies) {
        REQUIRE(a.type == AnomalyType::SceneDependent);
        const auto& own = spec.scene(spec.video(a.video_id).scene_id);
        CHECK(std::find(own.normal_types.begin(), own.normal_types.end(), a.sprite_type) == own.normal_types.end());
        bool elsewhere = false;
        for (const auto& s : spec.scenes)
            elsewhere = elsewhere || std::find(s.normal_types.begin(), s.normal_types.end(), a.sprite_type) !=
                                         s.normal_types.end();
        CHECK(elsewhere);
        ++count;
    }
    CHECK(count > 0);
}

TEST_CASE("scene-dependent labels change with the scene") {
    const auto spec = benchmark("scenedep");
    const auto& a = spec.anomalies.front();
    const auto& v = spec.video(a.video_id);
    const auto video = generate_video(spec, v);
    // only the foreign sprite, judged under each scene
    auto states = video.states;
    for (auto& frame : states)
        std::erase_if(frame, [&](const SpriteState& st) { return st.type != a.sprite_type; });
    REQUIRE(!states[a.start_frame].empty());
    for (const auto& s : spec.scenes) {
        const bool normal =
            std::find(s.normal_types.begin(), s.normal_types.end(), a.sprite_type) != s.normal_types.end();
        CHECK(rule_labels(spec, s, states)[a.start_frame] == (normal ? 0 : 1));
    }
    CHECK(video.labels[a.start_frame] == 1);
}

TEST_CASE("anticipation benchmark leaves room for precursors") {
    const auto spec = benchmark("anticipate");
    const auto preset = pipeline::benchmark_preset("anticipate");
    CHECK(spec.precursor_frames >= 2 * preset.data.stride);
    for (const auto& a : spec.anomalies) {
        CHECK(a.type == AnomalyType::Trajectory);
        CHECK(a.start_frame >= spec.pre_roll + spec.precursor_frames);
    }
    // the sprite that enters the region is tracked through its turn
    const auto& a = spec.anomalies.front();
    const auto video = generate_video(spec, spec.video(a.video_id));
    const auto& region = *spec.scene(spec.video(a.video_id).scene_id).forbidden;
    int intruder = -1;
    for (const auto& s : video.states[a.start_frame])
        if (region.contains(s.cx, s.cy)) intruder = s.track_id;
    REQUIRE(intruder >= 0);
    for (int f = a.start_frame - spec.precursor_frames; f < a.start_frame; ++f)
        CHECK(video.tracks.box(intruder, f));
}

TEST_CASE("spec validation") {
    auto spec = testing::tiny_spec();
    SUBCASE("anomaly in the training split") {
        spec.anomalies.push_back({"train_a", 30, 35, AnomalyType::Speed, ""});
        CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("training split"), Error);
    }
    SUBCASE("appearance type normal somewhere") {
        spec.anomalies[0].sprite_type = "box";
        CHECK_THROWS_AS(spec.validate(), Error);
    }
    SUBCASE("span past the end") {
        spec.anomalies[0].end_frame = 60;
        CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("outside the video"), Error);
    }
    SUBCASE("overlap") {
        spec.anomalies.push_back({"test_a", 30, 40, AnomalyType::Speed, ""});
        CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("overlapping"), Error);
    }
    SUBCASE("slow anomalous speed") {
        spec.anomalous_speed = 1.5;
        CHECK_THROWS_AS(spec.validate(), Error);
    }
    SUBCASE("trajectory needs a forbidden region") {
        spec.anomalies[1].type = AnomalyType::Trajectory;
        CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("forbidden"), Error);
    }
    SUBCASE("unknown benchmark") {
        CHECK_THROWS_AS(benchmark("nope"), Error);
    }
}

TEST_CASE("spec json round trip") {
    for (const auto& spec : standard_benchmarks()) {
        const auto j = to_json(spec);
        const auto back = spec_from_json(j);
        CHECK(to_json(back) == j);
        CHECK(back.seed == spec.seed);
        CHECK(back.anomalies.size() == spec.anomalies.size());
    }
}

TEST_CASE("standard benchmarks match their recorded checksums") {
    std::ifstream in(fs::path(FBSC_FIXTURE_DIR) / "checksums.txt");
    REQUIRE(in);
    std::string name, checksum;
    int seen = 0;
    while (in >> name >> checksum) {
        CAPTURE(name);
        const auto dir = testing::temp_dir("gen_sum_" + name);
        generate(benchmark(name), dir);
        CHECK(directory_checksum(dir) == checksum);
        fs::remove_all(dir);
        ++seen;
    }
    CHECK(seen == 3);
}
