#pragma once

#include "sgs/common.hpp"

#include <optional>
#include <vector>

namespace sgs {

struct KeyframeEntry {
    int frame_id = -1;
    Vec3 view_dir = Vec3::UnitZ(); // target origin -> camera center, object frame
};

// Sliding keyframe window, reverse chronological (index 0 = newest). A frame
// is admitted when its view vector is more than theta_view off the newest
// keyframe's; the two newest frames are never evicted; overflow evicts the
// frame (among indices >= 2) with the highest nearest-neighbor dot product,
// oldest first on ties.
class KeyframeWindow {
public:
    KeyframeWindow(int capacity, double theta_view_deg)
        : capacity_(capacity), cos_theta_(std::cos(theta_view_deg * M_PI / 180.0)) {}

    bool should_admit(const Vec3& view_dir) const {
        if (frames_.empty()) return true;
        return view_dir.normalized().dot(frames_.front().view_dir) < cos_theta_;
    }

    struct IngestResult {
        bool admitted = false;
        std::optional<int> evicted_frame_id;
    };

    IngestResult ingest(const KeyframeEntry& frame);

    /// Index (0-based) to evict when overfull. Throws NothingEvictable.
    int eviction_candidate() const;

    const std::vector<KeyframeEntry>& frames() const { return frames_; }
    size_t size() const { return frames_.size(); }
    bool full() const { return int(frames_.size()) >= capacity_; }
    int capacity() const { return capacity_; }

private:
    int capacity_;
    double cos_theta_;
    std::vector<KeyframeEntry> frames_;
};

} // namespace sgs
