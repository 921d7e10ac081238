#pragma once

// Anticipation label algebra. G_alpha(t) = max(g_{t+1}, ..., g_{t+alpha}) for
// t = 0 .. T-alpha-1; G_0 is the frame-level detection label series itself.

#include <string>
#include <vector>

#include "fbsc/score_series.hpp"

namespace fbsc::labels {

struct LabelSeries {
    std::string video_id;
    int alpha = 0;  // in frames
    std::vector<int> values;
};

// Throws fbsc::Error("horizon exceeds video length") when alpha >= T.
LabelSeries anticipation_labels(const LabelSeries& g0, int alpha);

struct AlignedPair {
    std::string video_id;
    int alpha = 0;
    int first_frame = 0;          // frame index of scores[0] / labels[0]
    int dropped_head = 0;         // label frames before the first score (warm-up)
    int dropped_tail = 0;         // label frames after the last score
    std::vector<double> scores;
    std::vector<int> labels;
};

// Restricts both series to the frames where both are defined. Throws on a
// video or horizon mismatch.
AlignedPair align_series(const scoring::ScoreSeries& scores, const LabelSeries& labels);

}  // namespace fbsc::labels
