#pragma once

#include <string>
#include <vector>

namespace fbsc::scoring {

// Per-frame scores of one video for one horizon. values[k] scores frame
// start_offset + k. alpha is in frames (0 for detection).
struct ScoreSeries {
    std::string video_id;
    int alpha = 0;
    int start_offset = 0;
    std::vector<double> values;

    bool operator==(const ScoreSeries&) const = default;
};

}  // namespace fbsc::scoring
