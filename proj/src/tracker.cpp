#include "skytrack/tracker.hpp"

#include <algorithm>
#include <map>

#include "skytrack/errors.hpp"

namespace skytrack {

void TrackerParams::validate() const {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
        throw UsageError("iou_threshold must lie in (0,1]");
    }
    if (t_v < 0.0 || t_v > 1.0) throw UsageError("t_v must lie in [0,1]");
    if (max_gap < 0) throw UsageError("max_gap must be >= 0");
}

Association associate(std::span<const TrackHead> heads, std::span<const Detection> detections,
                      const TrackerParams& params) {
    params.validate();

    struct Candidate {
        double iou;
        double score;
        int track_id;
        size_t head_index;
        size_t det_index;
    };
    std::vector<Candidate> candidates;
    for (size_t h = 0; h < heads.size(); ++h) {
        for (size_t d = 0; d < detections.size(); ++d) {
            if (params.class_aware && heads[h].class_label != detections[d].class_label) continue;
            double v = iou(heads[h].box, detections[d].box);
            if (v >= params.iou_threshold) {
                candidates.push_back({v, detections[d].score, heads[h].track_id, h, d});
            }
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.score != b.score) return a.score > b.score;
        if (a.track_id != b.track_id) return a.track_id < b.track_id;
        return a.det_index < b.det_index;
    });

    std::vector<bool> head_used(heads.size(), false);
    std::vector<bool> det_used(detections.size(), false);
    Association out;
    for (const Candidate& c : candidates) {
        if (head_used[c.head_index] || det_used[c.det_index]) continue;
        head_used[c.head_index] = true;
        det_used[c.det_index] = true;
        out.matches.emplace_back(c.track_id, static_cast<int>(c.det_index));
    }
    for (size_t h = 0; h < heads.size(); ++h) {
        if (!head_used[h]) out.unmatched_track_ids.push_back(heads[h].track_id);
    }
    for (size_t d = 0; d < detections.size(); ++d) {
        if (!det_used[d]) out.unmatched_detections.push_back(static_cast<int>(d));
    }
    return out;
}

BBox project(const TrackElement& last, const DisplacementTable& table) {
    std::optional<int> next = table.next_frame(last.frame);
    if (!next) {
        throw UsageError("cannot project past frame " + std::to_string(last.frame) +
                         ": no successor in displacement table");
    }
    return translate(last.box, table.delta(last.frame, *next));
}

namespace {

struct OpenTrack {
    int id;
    std::string class_label;
    std::vector<TrackElement> elements;
    int detected_count = 0;
    int trailing_estimates = 0;
    BBox head; // projected box in the frame under consideration
};

Track close_track(OpenTrack&& open, bool vote_spans_trailing) {
    Track t;
    t.id = open.id;
    t.class_label = std::move(open.class_label);
    t.elements = std::move(open.elements);
    int full_count = static_cast<int>(t.elements.size());
    while (!t.elements.empty() && t.elements.back().kind == ElementKind::Estimated) {
        t.elements.pop_back();
    }
    t.detected_count = open.detected_count;
    t.total_count = vote_spans_trailing ? full_count : static_cast<int>(t.elements.size());
    t.vote = static_cast<double>(t.detected_count) / t.total_count;
    return t;
}

} // namespace

std::vector<Track> build_tracks(std::span<const Detection> detections,
                                const DisplacementTable& table, const TrackerParams& params) {
    params.validate();

    std::map<int, std::vector<Detection>> by_frame;
    for (const Detection& d : detections) {
        if (!table.contains(d.frame)) {
            throw UsageError("detection at frame " + std::to_string(d.frame) +
                             " is not covered by the displacement table");
        }
        by_frame[d.frame].push_back(d);
    }

    std::vector<OpenTrack> open;
    std::vector<Track> closed;
    int next_id = 0;

    const std::vector<int>& frames = table.frames();
    for (size_t fi = 0; fi < frames.size(); ++fi) {
        int frame = frames[fi];

        for (OpenTrack& t : open) t.head = project(t.elements.back(), table);

        static const std::vector<Detection> kNone;
        auto it = by_frame.find(frame);
        const std::vector<Detection>& dets = it != by_frame.end() ? it->second : kNone;

        std::vector<TrackHead> heads;
        heads.reserve(open.size());
        for (const OpenTrack& t : open) heads.push_back({t.id, t.head, t.class_label});

        Association assoc = associate(heads, dets, params);

        std::vector<bool> matched(open.size(), false);
        for (const auto& [track_id, det_index] : assoc.matches) {
            size_t oi = 0;
            while (open[oi].id != track_id) ++oi;
            const Detection& d = dets[static_cast<size_t>(det_index)];
            open[oi].elements.push_back({frame, d.box, ElementKind::Detected, d.score});
            open[oi].detected_count += 1;
            open[oi].trailing_estimates = 0;
            matched[oi] = true;
        }

        std::vector<OpenTrack> still_open;
        still_open.reserve(open.size() + assoc.unmatched_detections.size());
        for (size_t oi = 0; oi < open.size(); ++oi) {
            if (matched[oi]) {
                still_open.push_back(std::move(open[oi]));
            } else if (open[oi].trailing_estimates >= params.max_gap) {
                closed.push_back(close_track(std::move(open[oi]), params.vote_spans_trailing));
            } else {
                open[oi].elements.push_back({frame, open[oi].head, ElementKind::Estimated, 0.0});
                open[oi].trailing_estimates += 1;
                still_open.push_back(std::move(open[oi]));
            }
        }
        open = std::move(still_open);

        for (int det_index : assoc.unmatched_detections) {
            const Detection& d = dets[static_cast<size_t>(det_index)];
            OpenTrack t;
            t.id = next_id++;
            t.class_label = d.class_label;
            t.elements.push_back({frame, d.box, ElementKind::Detected, d.score});
            t.detected_count = 1;
            open.push_back(std::move(t));
        }
    }

    for (OpenTrack& t : open) {
        closed.push_back(close_track(std::move(t), params.vote_spans_trailing));
    }
    std::sort(closed.begin(), closed.end(), [](const Track& a, const Track& b) { return a.id < b.id; });
    return closed;
}

std::vector<Track> filter_tracks(std::span<const Track> tracks, double t_v) {
    if (t_v < 0.0 || t_v > 1.0) throw UsageError("t_v must lie in [0,1]");
    std::vector<Track> kept;
    for (const Track& t : tracks) {
        if (t.vote >= t_v) kept.push_back(t);
    }
    return kept;
}

std::vector<Detection> tracks_to_detections(std::span<const Track> tracks) {
    std::vector<Detection> out;
    for (const Track& t : tracks) {
        double score_sum = 0.0;
        for (const TrackElement& e : t.elements) {
            if (e.kind == ElementKind::Detected) score_sum += e.score;
        }
        double mean_score = t.detected_count > 0 ? score_sum / t.detected_count : 0.0;
        for (const TrackElement& e : t.elements) {
            Detection d;
            d.frame = e.frame;
            d.class_label = t.class_label;
            d.box = e.box;
            d.score = e.kind == ElementKind::Detected ? e.score : mean_score;
            d.track_id = t.id;
            d.kind = e.kind;
            out.push_back(std::move(d));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.score > b.score;
    });
    return out;
}

} // namespace skytrack
