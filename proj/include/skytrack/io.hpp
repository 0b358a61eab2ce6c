#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "skytrack/metrics.hpp"
#include "skytrack/registration.hpp"
#include "skytrack/tracker.hpp"

namespace skytrack::io {

/// Detection files are JSON lines sorted by frame, one object per record:
///   {"frame":0,"class":"tire","x":1.0,"y":2.0,"w":3.0,"h":4.0,"score":0.9}
/// Refined outputs add "track_id" and "kind" ("detected"|"estimated").
/// Unknown fields are rejected. Loading normalizes order to
/// (frame asc, score desc); saving writes that same order.
std::vector<Detection> load_detections(const std::filesystem::path& path);
void save_detections(const std::filesystem::path& path, std::span<const Detection> detections);

/// Annotation files are JSON lines sorted by frame:
///   {"frame":0,"object_id":1,"class":"tire","x":1.0,"y":2.0,"w":3.0,"h":4.0}
/// (frame, object_id) pairs must be unique; records sharing an object_id fold
/// into one GroundTruthObject. Objects are returned ordered by object_id.
std::vector<GroundTruthObject> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path, std::span<const GroundTruthObject> gts);

/// Frames are an image directory: binary PGM (8- or 16-bit) or PPM files,
/// ordered by filename; color samples reduce to luminance
/// 0.299 R + 0.587 G + 0.114 B. Every stride-th file is kept and assigned its
/// position in the full listing as frame_index. Dimensions must be uniform.
std::vector<GrayFrame> load_frames(const std::filesystem::path& dir, int stride = 1);
GrayFrame load_frame(const std::filesystem::path& path, int frame_index = 0);

/// 16-bit binary PGM.
void save_frame(const std::filesystem::path& path, const GrayFrame& frame);

/// Displacement cache: CSV with header
///   from_frame,to_frame,dx,dy,peak_score,flag
/// one row per consecutive registered pair (flag 1 = unreliable, displacement
/// replaced by zero). Values round-trip exactly; consumers rebuild the
/// cumulative table from the rows.
void save_displacement_cache(const std::filesystem::path& path, const DisplacementTable& table);
DisplacementTable load_displacement_cache(const std::filesystem::path& path);

/// Pipeline parameters, loadable from a JSON config file. Field names in the
/// file match the member names; unknown keys are rejected and every value is
/// range-checked.
struct RunConfig {
    int stride = 1;
    int downscale = 0; // 0 = auto
    double iou_threshold = 0.5;
    double t_v = 0.4;
    int max_gap = 10;
    double track_match_threshold = 0.5;
    double confidence_floor = 0.05;
    std::string sweep = "0.05:0.05:0.95"; // start:step:stop, or a single value
    uint64_t seed = 0;

    void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Expands "start:step:stop" (or one number) into an ascending grid. Grid
/// points are snapped to 9 decimals so nominal thresholds like 0.4 compare
/// exactly against votes such as 4/10.
std::vector<double> parse_sweep_grid(const std::string& spec);

std::string eval_report_to_json(const EvalReport& report);

/// CSV `tv,precision,recall`, one row per sweep point.
void save_sweep_csv(const std::filesystem::path& path, std::span<const SweepPoint> points);

} // namespace skytrack::io
