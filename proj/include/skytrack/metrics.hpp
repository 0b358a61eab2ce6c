#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "skytrack/registration.hpp"
#include "skytrack/tracker.hpp"

namespace skytrack {

/// Annotated object: its box in every frame where it is visible.
struct GroundTruthObject {
    int object_id = 0;
    std::string class_label;
    std::map<int, BBox> boxes; // frame ordinal -> box
};

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct SweepPoint {
    double t_v = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

struct EvalReport {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double ap50 = 0.0;
    std::vector<SweepPoint> sweep;
};

/// Precision, recall and F1 from raw counts; a ratio whose denominator is
/// zero is reported as 0.
Prf prf(long tp, long fp, long fn);

/// IoU between a predicted track and a ground-truth object: all boxes are
/// aligned to the table's reference frame, then per-frame intersection areas
/// are summed over the union of both frame sets and divided by the summed
/// per-frame union areas. A frame where only one side has a box contributes
/// that box's area to the denominator only. Frames not covered by the table
/// are excluded from both sums.
double track_iou(const Track& pred, const GroundTruthObject& gt, const DisplacementTable& table);

struct TrackMatchResult {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    std::vector<std::pair<int, int>> assignment; // (track id, object id)
};

/// Greedy one-to-one matching of predicted tracks to ground-truth objects by
/// descending track_iou; a pair counts as TP at track_iou >= thresh with equal
/// class labels. Unmatched predictions are FP, unmatched objects FN. Ties
/// break on lower track id, then lower object id.
TrackMatchResult match_tracks(std::span<const Track> preds, std::span<const GroundTruthObject> gts,
                              const DisplacementTable& table, double thresh);

/// Average precision at IoU >= 0.5 over score-ranked detections, with
/// all-point interpolation (precision envelope). Multi-class inputs score
/// each class separately and report the mean over classes that have ground
/// truth. Throws EvaluationError when there is no ground-truth box at all.
double ap50(std::span<const Detection> detections, std::span<const GroundTruthObject> gts);

/// For each threshold of the grid: filter tracks by t_v, match against ground
/// truth and compute precision/recall. Results are ordered by ascending t_v.
std::vector<SweepPoint> sweep_tv(std::span<const Track> tracks,
                                 std::span<const GroundTruthObject> gts,
                                 const DisplacementTable& table, std::span<const double> grid,
                                 double match_thresh = 0.5);

} // namespace skytrack
