#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skytrack/geometry.hpp"
#include "skytrack/registration.hpp"

namespace skytrack {

enum class ElementKind {
    Detected,
    Estimated,
};

/// One detector output (or refined output record). `track_id` and `kind` are
/// populated on refined detections written back by the tracker and absent on
/// raw detector files.
struct Detection {
    int frame = 0;
    std::string class_label;
    BBox box;
    double score = 1.0;
    std::optional<int> track_id;
    std::optional<ElementKind> kind;
};

/// One per-frame element of a track: either a genuine detection or a box
/// projected from the previous element by the inter-frame displacement.
struct TrackElement {
    int frame = 0;
    BBox box;
    ElementKind kind = ElementKind::Detected;
    double score = 0.0; // detector confidence; 0 for estimates until export
};

/// An object hypothesis across frames. `elements` runs from the first to the
/// last detection (the speculative trailing estimates that searched for a
/// re-match are trimmed at close). `total_count` (m) still counts those
/// trailing estimates by default, so a briefly flickering false positive is
/// diluted to a low vote instead of scoring l/l = 1; see
/// TrackerParams::vote_spans_trailing.
struct Track {
    int id = 0;
    std::string class_label;
    std::vector<TrackElement> elements;
    int detected_count = 0; // l: elements output by the detector
    int total_count = 0;    // m: all elements attributed while the track was alive
    double vote = 0.0;      // v = l/m

    int first_frame() const { return elements.front().frame; }
    int last_frame() const { return elements.back().frame; }
};

struct TrackerParams {
    /// Association accepts a head/detection pair only at IoU >= this value.
    double iou_threshold = 0.5;
    /// Tracks with vote v below this threshold are discarded by filter_tracks.
    double t_v = 0.4;
    /// Maximum run of consecutive estimates before an unmatched track closes.
    int max_gap = 10;
    /// Restrict association to equal class labels.
    bool class_aware = true;
    /// When true (default), the vote denominator m includes the trailing
    /// estimates accumulated while searching for a re-match. When false, m
    /// covers only the trimmed first-to-last-detection span.
    bool vote_spans_trailing = true;

    /// Throws UsageError when a parameter is out of range.
    void validate() const;
};

/// Projected position of an open track at the frame under consideration.
struct TrackHead {
    int track_id = 0;
    BBox box;
    std::string class_label;
};

struct Association {
    std::vector<std::pair<int, int>> matches; // (track_id, detection index)
    std::vector<int> unmatched_track_ids;
    std::vector<int> unmatched_detections;
};

/// One-to-one greedy matching between projected track heads and the
/// detections of a single frame. Pairs are considered in descending IoU and
/// accepted at IoU >= params.iou_threshold (classes must match when
/// class_aware); ties break on higher detection score, then lower track id,
/// then lower detection index.
Association associate(std::span<const TrackHead> heads, std::span<const Detection> detections,
                      const TrackerParams& params);

/// Box for the sampled frame following `last.frame`: the element's box
/// translated by the inter-frame displacement. Throws UsageError when the
/// table does not cover that step.
BBox project(const TrackElement& last, const DisplacementTable& table);

/// Builds tracks over the table's frames. Matched detections extend tracks as
/// Detected elements; unmatched open tracks extend with projected Estimated
/// elements until max_gap of them accumulate, at which point the track closes
/// and its trailing estimates are trimmed; unmatched detections start new
/// tracks. Every frame carrying a detection must be covered by the table.
std::vector<Track> build_tracks(std::span<const Detection> detections,
                                const DisplacementTable& table, const TrackerParams& params);

/// Tracks with v >= t_v, order preserved.
std::vector<Track> filter_tracks(std::span<const Track> tracks, double t_v);

/// Flattens kept tracks back into per-frame detections. Estimated elements
/// carry a synthesized score equal to the mean score of the track's detected
/// elements; every record is tagged with its track id and element kind.
std::vector<Detection> tracks_to_detections(std::span<const Track> tracks);

} // namespace skytrack
