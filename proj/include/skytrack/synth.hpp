#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "skytrack/metrics.hpp"
#include "skytrack/registration.hpp"
#include "skytrack/tracker.hpp"

namespace skytrack::synth {

/// Detector noise model applied by corrupt().
struct NoiseModel {
    double miss_prob = 0.0;    // per-box dropout probability
    double jitter_sigma = 0.0; // Gaussian position offset, pixels
    double fp_rate = 0.0;      // expected clutter tracks per frame
    int fp_lifetime = 1;       // frames each clutter object persists
};

/// A synthetic translational scene: a textured world, a window path across
/// it, and planted rectangular objects. Camera coordinates are integers so
/// frames are exact crops and the true displacement table is exact.
struct SynthConfig {
    int world_width = 512;
    int world_height = 512;
    int frame_width = 256;
    int frame_height = 256;
    int frame_count = 1;

    /// Window origin at frame 0; negative means centered in the world.
    int camera_start_x = -1;
    int camera_start_y = -1;

    /// Per-transition window steps (camera displacements); shorter lists are
    /// padded with (0,0), longer ones rejected.
    std::vector<std::pair<int, int>> camera_steps;

    std::vector<std::pair<std::string, BBox>> objects; // (class, world box)

    NoiseModel noise;
    uint64_t texture_seed = 1;
    uint64_t detection_seed = 1;
    double sensor_noise_sigma = 0.0;

    /// Clutter anchored in world coordinates moves with the scene like real
    /// ground clutter; frame-anchored clutter stays put like a sensor defect.
    bool fp_world_anchored = true;

    /// Throws ValidationError when a window would leave the world or a
    /// parameter is out of range.
    void validate() const;

    /// Window origin at frame k.
    std::pair<int, int> camera_position(int frame) const;
};

struct SynthScene {
    std::vector<GrayFrame> frames;
    std::vector<GroundTruthObject> ground_truth;
    DisplacementTable true_table;
};

/// Renders the scene: world = smoothed unit white noise with planted
/// high-contrast rectangles (a broadband texture keeps the phase correlation
/// peak unique), frame k = the window cropped at the cumulative camera
/// position plus optional sensor noise. Ground-truth boxes are the object
/// boxes in frame coordinates, present only in frames where the object is
/// fully visible. Deterministic given the config.
SynthScene generate(const SynthConfig& config);

/// Simulated detector output: each ground-truth box is dropped with
/// miss_prob, survivors are jittered by Gaussian offsets, and clutter objects
/// (round(fp_rate * frame_count) of them, birth frames evenly spaced) are
/// injected for fp_lifetime frames each. Deterministic given the seed.
std::vector<Detection> corrupt(const SynthConfig& config, std::span<const GroundTruthObject> gt,
                               uint64_t seed);

/// JSON config file mirroring SynthConfig member names ("camera_steps" may be
/// replaced by {"constant":[dx,dy]} or {"random_walk":{"seed":...,"max_step":...}}).
SynthConfig load_config(const std::filesystem::path& path);

/// Deterministic bounded random walk for camera steps: integer steps up to
/// max_step per axis, reflected so the window never drifts more than
/// max_drift from its start.
std::vector<std::pair<int, int>> random_walk_steps(int count, int max_step, int max_drift,
                                                   uint64_t seed);

/// Writes frames/, annotations.jsonl, detections.jsonl and true_cache.csv
/// under `dir` using the shared pipeline formats.
void write_scene(const std::filesystem::path& dir, const SynthConfig& config,
                 const SynthScene& scene, std::span<const Detection> detections);

} // namespace skytrack::synth
