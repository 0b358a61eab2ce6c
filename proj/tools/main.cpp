// skytrack command-line tool: registers aerial video frames, refines per-frame
// detections into tracks, and evaluates the result against annotations. The
// pipeline stages communicate only through files so the expensive registration
// step can be cached and reused across sweeps.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "skytrack/errors.hpp"
#include "skytrack/io.hpp"
#include "skytrack/metrics.hpp"
#include "skytrack/registration.hpp"
#include "skytrack/synth.hpp"
#include "skytrack/tracker.hpp"

namespace fs = std::filesystem;
using namespace skytrack;

namespace {

int log_level() {
    static int level = [] {
        const char* env = std::getenv("SKYTRACK_LOG");
        if (env == nullptr) return 1;
        std::string v(env);
        if (v == "quiet") return 0;
        if (v == "debug") return 2;
        return 1;
    }();
    return level;
}

template <typename... Args>
void log_info(const char* format, Args... args) {
    if (log_level() >= 1) {
        std::fprintf(stderr, "skytrack: ");
        std::fprintf(stderr, format, args...);
        std::fprintf(stderr, "\n");
    }
}

/// Logs wall time per pipeline stage on destruction.
class Stage {
public:
    explicit Stage(std::string name)
        : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
    ~Stage() {
        auto elapsed =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_);
        log_info("[%s] %.1f ms", name_.c_str(), elapsed.count());
    }

private:
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

struct Options {
    fs::path frames_dir;
    fs::path detections_path;
    fs::path annotations_path;
    fs::path cache_path;
    fs::path config_path;
    fs::path synth_config_path;
    fs::path out_path;
    fs::path workdir;
    io::RunConfig cfg;
    bool class_agnostic = false;
    bool vote_trimmed = false;
    bool cosine_window = false;
};

TrackerParams tracker_params(const Options& opt) {
    TrackerParams params;
    params.iou_threshold = opt.cfg.iou_threshold;
    params.t_v = opt.cfg.t_v;
    params.max_gap = opt.cfg.max_gap;
    params.class_aware = !opt.class_agnostic;
    params.vote_spans_trailing = !opt.vote_trimmed;
    return params;
}

void cmd_register(const Options& opt) {
    Stage stage("register");
    std::vector<GrayFrame> frames = io::load_frames(opt.frames_dir, opt.cfg.stride);
    log_info("loaded %zu frames from %s", frames.size(), opt.frames_dir.c_str());
    RegistrationParams params;
    params.downscale = opt.cfg.downscale;
    params.confidence_floor = opt.cfg.confidence_floor;
    params.cosine_window = opt.cosine_window;
    DisplacementTable table = register_sequence(frames, params);
    io::save_displacement_cache(opt.out_path, table);
    log_info("wrote %zu pairs to %s", table.pairs().size(), opt.out_path.c_str());
}

void cmd_track(const Options& opt) {
    Stage stage("track");
    std::vector<Detection> detections = io::load_detections(opt.detections_path);
    DisplacementTable table = io::load_displacement_cache(opt.cache_path);
    std::vector<Track> tracks = build_tracks(detections, table, tracker_params(opt));
    std::vector<Track> kept = filter_tracks(tracks, opt.cfg.t_v);
    io::save_detections(opt.out_path, tracks_to_detections(kept));

    nlohmann::ordered_json summary;
    summary["tracks"] = nlohmann::ordered_json::array();
    size_t kept_count = 0;
    for (const Track& t : tracks) {
        bool is_kept = t.vote >= opt.cfg.t_v;
        kept_count += is_kept ? 1 : 0;
        nlohmann::ordered_json row;
        row["id"] = t.id;
        row["class"] = t.class_label;
        row["first_frame"] = t.first_frame();
        row["last_frame"] = t.last_frame();
        row["l"] = t.detected_count;
        row["m"] = t.total_count;
        row["v"] = t.vote;
        row["kept"] = is_kept;
        summary["tracks"].push_back(row);
    }
    summary["kept"] = kept_count;
    summary["discarded"] = tracks.size() - kept_count;
    std::cout << summary.dump(2) << std::endl;
    log_info("kept %zu of %zu tracks at t_v=%g", kept_count, tracks.size(), opt.cfg.t_v);
}

/// Rebuilds Track structures from a refined detection file; every record must
/// carry its track id and element kind.
std::vector<Track> tracks_from_refined(const std::vector<Detection>& records) {
    std::map<int, Track> by_id;
    for (const Detection& d : records) {
        if (!d.track_id || !d.kind) {
            throw ValidationError(
                "refined detections must carry track_id and kind; run 'skytrack track' first");
        }
        Track& t = by_id[*d.track_id];
        t.id = *d.track_id;
        t.class_label = d.class_label;
        t.elements.push_back({d.frame, d.box, *d.kind, d.score});
    }
    std::vector<Track> tracks;
    tracks.reserve(by_id.size());
    for (auto& [id, t] : by_id) {
        t.detected_count = 0;
        for (const TrackElement& e : t.elements) {
            if (e.kind == ElementKind::Detected) ++t.detected_count;
        }
        t.total_count = static_cast<int>(t.elements.size());
        t.vote = t.total_count > 0 ? static_cast<double>(t.detected_count) / t.total_count : 0.0;
        tracks.push_back(std::move(t));
    }
    return tracks;
}

EvalReport evaluate_files(const Options& opt) {
    std::vector<Detection> refined = io::load_detections(opt.detections_path);
    std::vector<GroundTruthObject> gts = io::load_annotations(opt.annotations_path);
    DisplacementTable table = io::load_displacement_cache(opt.cache_path);
    std::vector<Track> tracks = tracks_from_refined(refined);

    TrackMatchResult match = match_tracks(tracks, gts, table, opt.cfg.track_match_threshold);
    Prf scores = prf(match.tp, match.fp, match.fn);
    EvalReport report;
    report.tp = match.tp;
    report.fp = match.fp;
    report.fn = match.fn;
    report.precision = scores.precision;
    report.recall = scores.recall;
    report.f1 = scores.f1;
    report.ap50 = ap50(refined, gts);
    return report;
}

void cmd_evaluate(const Options& opt) {
    Stage stage("evaluate");
    EvalReport report = evaluate_files(opt);
    std::cout << io::eval_report_to_json(report) << std::endl;
}

void cmd_sweep(const Options& opt) {
    Stage stage("sweep");
    std::vector<Detection> detections = io::load_detections(opt.detections_path);
    std::vector<GroundTruthObject> gts = io::load_annotations(opt.annotations_path);
    DisplacementTable table = io::load_displacement_cache(opt.cache_path);
    std::vector<Track> tracks = build_tracks(detections, table, tracker_params(opt));
    std::vector<double> grid = io::parse_sweep_grid(opt.cfg.sweep);
    std::vector<SweepPoint> points =
        sweep_tv(tracks, gts, table, grid, opt.cfg.track_match_threshold);
    io::save_sweep_csv(opt.out_path, points);
    log_info("wrote %zu sweep points to %s", points.size(), opt.out_path.c_str());
}

void cmd_synth(const Options& opt) {
    Stage stage("synth");
    synth::SynthConfig cfg = synth::load_config(opt.synth_config_path);
    synth::SynthScene scene = synth::generate(cfg);
    std::vector<Detection> detections = synth::corrupt(cfg, scene.ground_truth, cfg.detection_seed);
    synth::write_scene(opt.out_path, cfg, scene, detections);
    log_info("wrote %d frames, %zu objects, %zu detections to %s", cfg.frame_count,
             scene.ground_truth.size(), detections.size(), opt.out_path.c_str());
}

void cmd_run(Options opt) {
    fs::create_directories(opt.workdir);
    if (!opt.synth_config_path.empty()) {
        Options synth_opt = opt;
        synth_opt.out_path = opt.workdir / "scene";
        cmd_synth(synth_opt);
        opt.frames_dir = opt.workdir / "scene" / "frames";
        opt.detections_path = opt.workdir / "scene" / "detections.jsonl";
        opt.annotations_path = opt.workdir / "scene" / "annotations.jsonl";
    }

    Options reg = opt;
    reg.out_path = opt.workdir / "cache.csv";
    cmd_register(reg);

    {
        Stage stage("track");
        std::vector<Detection> detections = io::load_detections(opt.detections_path);
        DisplacementTable table = io::load_displacement_cache(opt.workdir / "cache.csv");
        std::vector<Track> tracks = build_tracks(detections, table, tracker_params(opt));
        std::vector<Track> kept = filter_tracks(tracks, opt.cfg.t_v);
        io::save_detections(opt.workdir / "refined.jsonl", tracks_to_detections(kept));
        log_info("kept %zu of %zu tracks at t_v=%g", kept.size(), tracks.size(), opt.cfg.t_v);
    }

    Options eval = opt;
    eval.detections_path = opt.workdir / "refined.jsonl";
    eval.cache_path = opt.workdir / "cache.csv";
    EvalReport report;
    {
        Stage stage("evaluate");
        report = evaluate_files(eval);
    }
    std::string json = io::eval_report_to_json(report);
    std::ofstream out(opt.workdir / "report.json", std::ios::binary);
    out << json << '\n';
    std::cout << json << std::endl;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatio-temporal refinement of object detections in translational aerial video"};
    app.require_subcommand(1);

    Options opt;
    const io::RunConfig defaults;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", opt.config_path, "run configuration JSON file")
            ->check(CLI::ExistingFile);
    };

    CLI::App* reg = app.add_subcommand("register", "estimate inter-frame camera displacement");
    reg->add_option("frames_dir", opt.frames_dir, "directory of PGM/PPM frames")
        ->required()
        ->check(CLI::ExistingDirectory);
    reg->add_option("--out", opt.out_path, "displacement cache CSV to write")->required();
    reg->add_option("--stride", opt.cfg.stride, "keep every stride-th frame")
        ->check(CLI::PositiveNumber);
    reg->add_option("--downscale", opt.cfg.downscale,
                    "integer downscale factor before correlation (0 = auto)")
        ->check(CLI::NonNegativeNumber);
    reg->add_option("--confidence-floor", opt.cfg.confidence_floor,
                    "peak score below which a pair is flagged unreliable")
        ->check(CLI::Range(0.0, 1.0));
    reg->add_flag("--window", opt.cosine_window, "apply a raised-cosine taper before the FFT");
    add_config(reg);

    CLI::App* trk = app.add_subcommand("track", "link detections into tracks and filter by t_v");
    trk->add_option("detections", opt.detections_path, "detection JSONL file")
        ->required()
        ->check(CLI::ExistingFile);
    trk->add_option("cache", opt.cache_path, "displacement cache CSV")
        ->required()
        ->check(CLI::ExistingFile);
    trk->add_option("--out", opt.out_path, "refined detection JSONL to write")->required();
    trk->add_option("--tv", opt.cfg.t_v, "detection-ratio threshold t_v")
        ->check(CLI::Range(0.0, 1.0));
    trk->add_option("--iou", opt.cfg.iou_threshold, "association IoU threshold")
        ->check(CLI::Range(0.0, 1.0));
    trk->add_option("--max-gap", opt.cfg.max_gap,
                    "maximum consecutive estimates before a track closes")
        ->check(CLI::NonNegativeNumber);
    trk->add_flag("--class-agnostic", opt.class_agnostic, "associate across class labels");
    trk->add_flag("--vote-trimmed", opt.vote_trimmed,
                  "exclude the trailing estimate window from the vote denominator");
    add_config(trk);

    CLI::App* eval = app.add_subcommand("evaluate", "score refined detections against annotations");
    eval->add_option("refined", opt.detections_path, "refined detection JSONL file")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("annotations", opt.annotations_path, "annotation JSONL file")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("cache", opt.cache_path, "displacement cache CSV")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--track-thresh", opt.cfg.track_match_threshold,
                     "track IoU acceptance threshold")
        ->check(CLI::Range(0.0, 1.0));
    add_config(eval);

    CLI::App* swp = app.add_subcommand("sweep", "precision/recall curve over a t_v grid");
    swp->add_option("detections", opt.detections_path, "raw detection JSONL file")
        ->required()
        ->check(CLI::ExistingFile);
    swp->add_option("annotations", opt.annotations_path, "annotation JSONL file")
        ->required()
        ->check(CLI::ExistingFile);
    swp->add_option("cache", opt.cache_path, "displacement cache CSV")
        ->required()
        ->check(CLI::ExistingFile);
    swp->add_option("--out", opt.out_path, "curve CSV to write")->required();
    swp->add_option("--grid", opt.cfg.sweep, "t_v grid, value or start:step:stop");
    swp->add_option("--iou", opt.cfg.iou_threshold, "association IoU threshold")
        ->check(CLI::Range(0.0, 1.0));
    swp->add_option("--max-gap", opt.cfg.max_gap,
                    "maximum consecutive estimates before a track closes")
        ->check(CLI::NonNegativeNumber);
    swp->add_option("--track-thresh", opt.cfg.track_match_threshold,
                    "track IoU acceptance threshold")
        ->check(CLI::Range(0.0, 1.0));
    add_config(swp);

    CLI::App* syn = app.add_subcommand("synth", "generate a synthetic scene with ground truth");
    syn->add_option("--config", opt.synth_config_path, "synthetic scene JSON config")
        ->required()
        ->check(CLI::ExistingFile);
    syn->add_option("--out", opt.out_path, "output directory")->required();

    CLI::App* runc = app.add_subcommand("run", "register, track and evaluate in one call");
    CLI::Option* run_synth =
        runc->add_option("--synth", opt.synth_config_path, "generate the input scene first")
            ->check(CLI::ExistingFile);
    CLI::Option* run_frames =
        runc->add_option("--frames", opt.frames_dir, "directory of PGM/PPM frames")
            ->check(CLI::ExistingDirectory);
    CLI::Option* run_dets =
        runc->add_option("--detections", opt.detections_path, "detection JSONL file")
            ->check(CLI::ExistingFile);
    CLI::Option* run_ann =
        runc->add_option("--annotations", opt.annotations_path, "annotation JSONL file")
            ->check(CLI::ExistingFile);
    runc->add_option("--workdir", opt.workdir, "directory for intermediate files")->required();
    run_synth->excludes(run_frames)->excludes(run_dets)->excludes(run_ann);
    run_frames->needs(run_dets);
    run_dets->needs(run_ann);
    runc->add_option("--stride", opt.cfg.stride, "keep every stride-th frame")
        ->check(CLI::PositiveNumber);
    runc->add_option("--downscale", opt.cfg.downscale,
                     "integer downscale factor before correlation (0 = auto)")
        ->check(CLI::NonNegativeNumber);
    runc->add_option("--tv", opt.cfg.t_v, "detection-ratio threshold t_v")
        ->check(CLI::Range(0.0, 1.0));
    runc->add_option("--iou", opt.cfg.iou_threshold, "association IoU threshold")
        ->check(CLI::Range(0.0, 1.0));
    runc->add_option("--max-gap", opt.cfg.max_gap,
                     "maximum consecutive estimates before a track closes")
        ->check(CLI::NonNegativeNumber);
    runc->add_option("--track-thresh", opt.cfg.track_match_threshold,
                     "track IoU acceptance threshold")
        ->check(CLI::Range(0.0, 1.0));
    runc->add_flag("--window", opt.cosine_window, "apply a raised-cosine taper before the FFT");
    runc->add_flag("--class-agnostic", opt.class_agnostic, "associate across class labels");
    add_config(runc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        // The config file fills in everything the command line left untouched.
        if (!opt.config_path.empty()) {
            io::RunConfig merged = io::load_run_config(opt.config_path);
            if (opt.cfg.stride != defaults.stride) merged.stride = opt.cfg.stride;
            if (opt.cfg.downscale != defaults.downscale) merged.downscale = opt.cfg.downscale;
            if (opt.cfg.iou_threshold != defaults.iou_threshold)
                merged.iou_threshold = opt.cfg.iou_threshold;
            if (opt.cfg.t_v != defaults.t_v) merged.t_v = opt.cfg.t_v;
            if (opt.cfg.max_gap != defaults.max_gap) merged.max_gap = opt.cfg.max_gap;
            if (opt.cfg.track_match_threshold != defaults.track_match_threshold)
                merged.track_match_threshold = opt.cfg.track_match_threshold;
            if (opt.cfg.confidence_floor != defaults.confidence_floor)
                merged.confidence_floor = opt.cfg.confidence_floor;
            if (opt.cfg.sweep != defaults.sweep) merged.sweep = opt.cfg.sweep;
            opt.cfg = merged;
        }
        opt.cfg.validate();

        if (reg->parsed()) cmd_register(opt);
        if (trk->parsed()) cmd_track(opt);
        if (eval->parsed()) cmd_evaluate(opt);
        if (swp->parsed()) cmd_sweep(opt);
        if (syn->parsed()) cmd_synth(opt);
        if (runc->parsed()) {
            if (opt.synth_config_path.empty() && opt.frames_dir.empty()) {
                throw UsageError("run needs either --synth or --frames/--detections/--annotations");
            }
            cmd_run(opt);
        }
        return 0;
    } catch (const EvaluationError& e) {
        std::fprintf(stderr, "skytrack: evaluation failed: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "skytrack: error: %s\n", e.what());
        return 2;
    }
}
