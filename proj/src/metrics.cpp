#include "skytrack/metrics.hpp"

#include <algorithm>
#include <set>

#include "skytrack/errors.hpp"

namespace skytrack {

Prf prf(long tp, long fp, long fn) {
    if (tp < 0 || fp < 0 || fn < 0) throw UsageError("counts must be non-negative");
    Prf out;
    out.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    out.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    double denom = out.precision + out.recall;
    out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
    return out;
}

double track_iou(const Track& pred, const GroundTruthObject& gt, const DisplacementTable& table) {
    // Map each side's boxes into reference-frame coordinates. The per-frame
    // translation is common to both boxes of a frame, so this realizes the
    // "align, then overlap" definition without changing per-frame areas.
    auto aligned = [&](const BBox& box, int frame) {
        const Displacement& cum = table.cumulative(frame);
        return translate(box, -cum.dx, -cum.dy);
    };

    std::map<int, BBox> pred_boxes;
    for (const TrackElement& e : pred.elements) {
        if (table.contains(e.frame)) pred_boxes[e.frame] = aligned(e.box, e.frame);
    }
    std::map<int, BBox> gt_boxes;
    for (const auto& [frame, box] : gt.boxes) {
        if (table.contains(frame)) gt_boxes[frame] = aligned(box, frame);
    }

    std::set<int> frames;
    for (const auto& [frame, box] : pred_boxes) frames.insert(frame);
    for (const auto& [frame, box] : gt_boxes) frames.insert(frame);

    double inter_sum = 0.0;
    double union_sum = 0.0;
    for (int frame : frames) {
        auto p = pred_boxes.find(frame);
        auto g = gt_boxes.find(frame);
        if (p != pred_boxes.end() && g != gt_boxes.end()) {
            double inter = intersection_area(p->second, g->second);
            inter_sum += inter;
            union_sum += p->second.area() + g->second.area() - inter;
        } else if (p != pred_boxes.end()) {
            union_sum += p->second.area();
        } else {
            union_sum += g->second.area();
        }
    }
    return union_sum > 0.0 ? inter_sum / union_sum : 0.0;
}

TrackMatchResult match_tracks(std::span<const Track> preds, std::span<const GroundTruthObject> gts,
                              const DisplacementTable& table, double thresh) {
    if (!(thresh > 0.0 && thresh <= 1.0)) throw UsageError("track match threshold must lie in (0,1]");

    struct Candidate {
        double tiou;
        int pred_id;
        int gt_id;
        size_t pred_index;
        size_t gt_index;
    };
    std::vector<Candidate> candidates;
    for (size_t p = 0; p < preds.size(); ++p) {
        for (size_t g = 0; g < gts.size(); ++g) {
            if (preds[p].class_label != gts[g].class_label) continue;
            double v = track_iou(preds[p], gts[g], table);
            if (v >= thresh) candidates.push_back({v, preds[p].id, gts[g].object_id, p, g});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.tiou != b.tiou) return a.tiou > b.tiou;
        if (a.pred_id != b.pred_id) return a.pred_id < b.pred_id;
        return a.gt_id < b.gt_id;
    });

    std::vector<bool> pred_used(preds.size(), false);
    std::vector<bool> gt_used(gts.size(), false);
    TrackMatchResult out;
    for (const Candidate& c : candidates) {
        if (pred_used[c.pred_index] || gt_used[c.gt_index]) continue;
        pred_used[c.pred_index] = true;
        gt_used[c.gt_index] = true;
        out.assignment.emplace_back(c.pred_id, c.gt_id);
    }
    out.tp = static_cast<long>(out.assignment.size());
    out.fp = static_cast<long>(preds.size()) - out.tp;
    out.fn = static_cast<long>(gts.size()) - out.tp;
    return out;
}

namespace {

/// All-point interpolated area under the precision-recall curve.
double average_precision(const std::vector<double>& precision, const std::vector<double>& recall) {
    size_t n = precision.size();
    std::vector<double> mpre(n + 2), mrec(n + 2);
    mrec[0] = 0.0;
    mpre[0] = n > 0 ? precision[0] : 0.0;
    for (size_t i = 0; i < n; ++i) {
        mrec[i + 1] = recall[i];
        mpre[i + 1] = precision[i];
    }
    mrec[n + 1] = n > 0 ? recall[n - 1] : 0.0;
    mpre[n + 1] = 0.0;
    for (size_t i = n + 1; i-- > 0;) mpre[i] = std::max(mpre[i], mpre[i + 1]);
    double ap = 0.0;
    for (size_t i = 0; i + 1 < mrec.size(); ++i) ap += (mrec[i + 1] - mrec[i]) * mpre[i + 1];
    return ap;
}

} // namespace

double ap50(std::span<const Detection> detections, std::span<const GroundTruthObject> gts) {
    // Classes are scored independently and averaged; detections of a class
    // with no ground truth cannot be scored and are skipped.
    std::set<std::string> classes;
    size_t total_gt = 0;
    for (const GroundTruthObject& g : gts) {
        if (!g.boxes.empty()) classes.insert(g.class_label);
        total_gt += g.boxes.size();
    }
    if (total_gt == 0) {
        throw EvaluationError("AP50 is undefined without ground-truth boxes");
    }

    double ap_sum = 0.0;
    for (const std::string& cls : classes) {
        // Per-frame ground-truth pool for this class.
        std::map<int, std::vector<std::pair<BBox, bool>>> pool; // frame -> (box, used)
        long n_gt = 0;
        for (const GroundTruthObject& g : gts) {
            if (g.class_label != cls) continue;
            for (const auto& [frame, box] : g.boxes) {
                pool[frame].emplace_back(box, false);
                ++n_gt;
            }
        }

        std::vector<size_t> order;
        for (size_t i = 0; i < detections.size(); ++i) {
            if (detections[i].class_label == cls) order.push_back(i);
        }
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (detections[a].score != detections[b].score)
                return detections[a].score > detections[b].score;
            return detections[a].frame < detections[b].frame;
        });

        long tp = 0, fp = 0;
        std::vector<double> precision, recall;
        precision.reserve(order.size());
        recall.reserve(order.size());
        for (size_t i : order) {
            const Detection& d = detections[i];
            auto it = pool.find(d.frame);
            double best = 0.0;
            std::pair<BBox, bool>* best_gt = nullptr;
            if (it != pool.end()) {
                for (auto& entry : it->second) {
                    if (entry.second) continue;
                    double v = iou(d.box, entry.first);
                    if (v > best) {
                        best = v;
                        best_gt = &entry;
                    }
                }
            }
            if (best_gt != nullptr && best >= 0.5) {
                best_gt->second = true;
                ++tp;
            } else {
                ++fp;
            }
            precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
            recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
        }
        ap_sum += average_precision(precision, recall);
    }
    return ap_sum / static_cast<double>(classes.size());
}

std::vector<SweepPoint> sweep_tv(std::span<const Track> tracks,
                                 std::span<const GroundTruthObject> gts,
                                 const DisplacementTable& table, std::span<const double> grid,
                                 double match_thresh) {
    std::vector<double> thresholds(grid.begin(), grid.end());
    for (double t : thresholds) {
        if (t < 0.0 || t > 1.0) throw UsageError("sweep grid values must lie in [0,1]");
    }
    std::sort(thresholds.begin(), thresholds.end());

    std::vector<SweepPoint> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) {
        std::vector<Track> kept = filter_tracks(tracks, t);
        TrackMatchResult m = match_tracks(kept, gts, table, match_thresh);
        Prf p = prf(m.tp, m.fp, m.fn);
        out.push_back({t, p.precision, p.recall});
    }
    return out;
}

} // namespace skytrack
