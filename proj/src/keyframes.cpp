#include "sgs/keyframes.hpp"

namespace sgs {

KeyframeWindow::IngestResult KeyframeWindow::ingest(const KeyframeEntry& frame) {
    IngestResult result;
    KeyframeEntry e = frame;
    e.view_dir.normalize();
    if (!should_admit(e.view_dir)) return result;

    frames_.insert(frames_.begin(), e);
    result.admitted = true;
    if (int(frames_.size()) > capacity_) {
        int evict = eviction_candidate();
        result.evicted_frame_id = frames_[evict].frame_id;
        frames_.erase(frames_.begin() + evict);
    }
    return result;
}

int KeyframeWindow::eviction_candidate() const {
    const int n = int(frames_.size());
    // Indices 0 and 1 (the two newest) are protected; the spread score only
    // ranges over the evictable tail, so it needs at least two entries there.
    if (capacity_ < 3 || n < 4) fail("NothingEvictable", "window too small to evict from");
    double best_score = -2.0;
    int best = -1;
    for (int i = 2; i < n; ++i) {
        double score = -2.0;
        for (int j = 2; j < n; ++j) {
            if (j == i) continue;
            score = std::max(score, frames_[i].view_dir.dot(frames_[j].view_dir));
        }
        // >= so equal scores fall to the larger index, i.e. the oldest frame.
        if (best < 0 || score >= best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

} // namespace sgs
