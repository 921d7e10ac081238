#include "fbsc/labels.hpp"

#include <algorithm>

#include "fbsc/error.hpp"

namespace fbsc::labels {

LabelSeries anticipation_labels(const LabelSeries& g0, int alpha) {
    if (g0.alpha != 0) throw Error("anticipation_labels expects detection labels (alpha 0)");
    if (alpha < 1) throw Error("anticipation horizon must be >= 1");
    const int T = static_cast<int>(g0.values.size());
    if (alpha >= T) throw Error("horizon exceeds video length");

    LabelSeries out{g0.video_id, alpha, std::vector<int>(T - alpha, 0)};
    // Scan from the end keeping the distance to the nearest positive ahead.
    int next_positive = -1;
    for (int t = T - 1; t >= 0; --t) {
        if (t + 1 < T && g0.values[t + 1] != 0) next_positive = t + 1;
        if (t < T - alpha && next_positive != -1 && next_positive - t <= alpha) out.values[t] = 1;
    }
    return out;
}

AlignedPair align_series(const scoring::ScoreSeries& scores, const LabelSeries& labels) {
    if (scores.video_id != labels.video_id)
        throw Error("align_series: video " + scores.video_id + " vs " + labels.video_id);
    if (scores.alpha != labels.alpha)
        throw Error("align_series: score horizon " + std::to_string(scores.alpha) +
                    " does not match label horizon " + std::to_string(labels.alpha));
    if (scores.start_offset < 0) throw Error("align_series: negative start offset");

    const int n_labels = static_cast<int>(labels.values.size());
    const int first = std::min(scores.start_offset, n_labels);
    const int last = std::min(scores.start_offset + static_cast<int>(scores.values.size()), n_labels);

    AlignedPair out;
    out.video_id = scores.video_id;
    out.alpha = scores.alpha;
    out.first_frame = first;
    out.dropped_head = first;
    out.dropped_tail = n_labels - std::max(last, first);
    for (int t = first; t < last; ++t) {
        out.scores.push_back(scores.values[t - scores.start_offset]);
        out.labels.push_back(labels.values[t]);
    }
    return out;
}

}  // namespace fbsc::labels
