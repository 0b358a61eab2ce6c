#include "skytrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "skytrack/errors.hpp"
#include "skytrack/io.hpp"
#include "skytrack/rng.hpp"

namespace skytrack::synth {

namespace {

using nlohmann::json;

constexpr uint64_t kSensorStream = 0x53454E53; // per-frame sensor noise
constexpr uint64_t kClutterStream = 0x434C5554;

bool box_inside(const BBox& b, int width, int height) {
    return b.x >= 0.0 && b.y >= 0.0 && b.right() <= width && b.bottom() <= height;
}

/// 5-tap binomial blur along both axes, reflecting at the borders.
void blur_separable(std::vector<double>& img, int width, int height) {
    static const double kKernel[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    auto reflect = [](int i, int n) {
        if (i < 0) return -i;
        if (i >= n) return 2 * n - 2 - i;
        return i;
    };
    std::vector<double> tmp(img.size());
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            double acc = 0.0;
            for (int k = -2; k <= 2; ++k) {
                acc += kKernel[k + 2] * img[static_cast<size_t>(r) * width + reflect(c + k, width)];
            }
            tmp[static_cast<size_t>(r) * width + c] = acc;
        }
    }
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            double acc = 0.0;
            for (int k = -2; k <= 2; ++k) {
                acc += kKernel[k + 2] * tmp[static_cast<size_t>(reflect(r + k, height)) * width + c];
            }
            img[static_cast<size_t>(r) * width + c] = acc;
        }
    }
}

} // namespace

void SynthConfig::validate() const {
    if (frame_width < 16 || frame_height < 16) {
        throw ValidationError("frame dimensions must be at least 16x16");
    }
    if (world_width < frame_width || world_height < frame_height) {
        throw ValidationError("world must be at least as large as the frame window");
    }
    if (frame_count < 1) throw ValidationError("frame_count must be >= 1");
    if (static_cast<int>(camera_steps.size()) > frame_count - 1) {
        throw ValidationError("camera_steps has more entries than frame transitions");
    }
    if (noise.miss_prob < 0.0 || noise.miss_prob > 1.0) {
        throw ValidationError("miss_prob must lie in [0,1]");
    }
    if (noise.jitter_sigma < 0.0) throw ValidationError("jitter_sigma must be >= 0");
    if (noise.fp_rate < 0.0) throw ValidationError("fp_rate must be >= 0");
    if (noise.fp_lifetime < 1) throw ValidationError("fp_lifetime must be >= 1");
    if (sensor_noise_sigma < 0.0) throw ValidationError("sensor_noise_sigma must be >= 0");
    for (int k = 0; k < frame_count; ++k) {
        auto [cx, cy] = camera_position(k);
        if (cx < 0 || cy < 0 || cx + frame_width > world_width || cy + frame_height > world_height) {
            throw ValidationError("camera window exits the world at frame " + std::to_string(k));
        }
    }
    for (const auto& [cls, box] : objects) {
        if (!box.valid()) throw ValidationError("object box must have positive finite extent");
        if (!box_inside(box, world_width, world_height)) {
            throw ValidationError("object box must lie inside the world");
        }
    }
}

std::pair<int, int> SynthConfig::camera_position(int frame) const {
    int cx = camera_start_x >= 0 ? camera_start_x : (world_width - frame_width) / 2;
    int cy = camera_start_y >= 0 ? camera_start_y : (world_height - frame_height) / 2;
    for (int k = 0; k < frame && k < static_cast<int>(camera_steps.size()); ++k) {
        cx += camera_steps[static_cast<size_t>(k)].first;
        cy += camera_steps[static_cast<size_t>(k)].second;
    }
    return {cx, cy};
}

SynthScene generate(const SynthConfig& config) {
    config.validate();

    // World texture: blurred white noise mapped into mid-gray, then planted
    // rectangles with a dark rim and bright fill.
    size_t world_size = static_cast<size_t>(config.world_width) * config.world_height;
    std::vector<double> world(world_size);
    Rng texture_rng(config.texture_seed);
    for (double& v : world) v = texture_rng.normal(0.0, 1.0);
    blur_separable(world, config.world_width, config.world_height);
    for (double& v : world) v = std::clamp(0.5 + 0.35 * v, 0.0, 1.0);

    for (const auto& [cls, box] : config.objects) {
        int x0 = static_cast<int>(std::lround(box.x));
        int y0 = static_cast<int>(std::lround(box.y));
        int x1 = static_cast<int>(std::lround(box.right()));
        int y1 = static_cast<int>(std::lround(box.bottom()));
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                bool rim = x - x0 < 2 || x1 - 1 - x < 2 || y - y0 < 2 || y1 - 1 - y < 2;
                world[static_cast<size_t>(y) * config.world_width + x] = rim ? 0.08 : 0.92;
            }
        }
    }

    SynthScene scene;
    scene.frames.reserve(static_cast<size_t>(config.frame_count));
    for (int k = 0; k < config.frame_count; ++k) {
        auto [cx, cy] = config.camera_position(k);
        GrayFrame frame = GrayFrame::create(config.frame_width, config.frame_height, k);
        Rng sensor_rng(Rng::derive(config.texture_seed, kSensorStream + static_cast<uint64_t>(k)));
        for (int r = 0; r < config.frame_height; ++r) {
            for (int c = 0; c < config.frame_width; ++c) {
                double v = world[static_cast<size_t>(cy + r) * config.world_width + (cx + c)];
                if (config.sensor_noise_sigma > 0.0) {
                    v += sensor_rng.normal(0.0, config.sensor_noise_sigma);
                }
                frame.at(r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
        scene.frames.push_back(std::move(frame));
    }

    for (size_t i = 0; i < config.objects.size(); ++i) {
        GroundTruthObject obj;
        obj.object_id = static_cast<int>(i);
        obj.class_label = config.objects[i].first;
        const BBox& world_box = config.objects[i].second;
        for (int k = 0; k < config.frame_count; ++k) {
            auto [cx, cy] = config.camera_position(k);
            BBox fb = translate(world_box, -cx, -cy);
            if (box_inside(fb, config.frame_width, config.frame_height)) obj.boxes[k] = fb;
        }
        if (!obj.boxes.empty()) scene.ground_truth.push_back(std::move(obj));
    }

    // Content displacement is the negative camera step: panning the window
    // right moves the scene left in frame coordinates.
    std::vector<DisplacementTable::Pair> pairs;
    for (int k = 0; k + 1 < config.frame_count; ++k) {
        auto [ax, ay] = config.camera_position(k);
        auto [bx, by] = config.camera_position(k + 1);
        DisplacementTable::Pair p;
        p.from = k;
        p.to = k + 1;
        p.d = Displacement{static_cast<double>(ax - bx), static_cast<double>(ay - by), 1.0};
        pairs.push_back(p);
    }
    if (config.frame_count == 1) {
        scene.true_table = DisplacementTable::from_pairs(0, {});
    } else {
        scene.true_table = DisplacementTable::from_pairs(0, std::move(pairs));
    }
    return scene;
}

std::vector<Detection> corrupt(const SynthConfig& config, std::span<const GroundTruthObject> gt,
                               uint64_t seed) {
    config.validate();
    std::vector<Detection> out;

    Rng det_rng(seed);
    for (const GroundTruthObject& obj : gt) {
        for (const auto& [frame, box] : obj.boxes) {
            if (det_rng.uniform01() < config.noise.miss_prob) continue;
            Detection d;
            d.frame = frame;
            d.class_label = obj.class_label;
            d.box = box;
            if (config.noise.jitter_sigma > 0.0) {
                d.box.x += det_rng.normal(0.0, config.noise.jitter_sigma);
                d.box.y += det_rng.normal(0.0, config.noise.jitter_sigma);
            }
            d.score = 1.0;
            out.push_back(std::move(d));
        }
    }

    // Clutter: the expected count round(fp_rate * frame_count) is scheduled
    // deterministically with evenly spaced birth frames; positions are drawn
    // inside the window visible at birth.
    int clutter_count = static_cast<int>(std::llround(config.noise.fp_rate * config.frame_count));
    if (clutter_count > 0) {
        Rng fp_rng(Rng::derive(seed, kClutterStream));
        double size_w = 16.0, size_h = 16.0;
        std::string cls = "object";
        if (!config.objects.empty()) {
            std::vector<double> ws, hs;
            for (const auto& [c, b] : config.objects) {
                ws.push_back(b.w);
                hs.push_back(b.h);
            }
            std::sort(ws.begin(), ws.end());
            std::sort(hs.begin(), hs.end());
            size_w = ws[ws.size() / 2];
            size_h = hs[hs.size() / 2];
            cls = config.objects.front().first;
        }
        for (int i = 0; i < clutter_count; ++i) {
            int birth = static_cast<int>((i + 0.5) * config.frame_count / clutter_count);
            birth = std::min(birth, config.frame_count - 1);
            auto [cx, cy] = config.camera_position(birth);
            double wx = cx + fp_rng.uniform(0.0, config.frame_width - size_w);
            double wy = cy + fp_rng.uniform(0.0, config.frame_height - size_h);
            for (int k = birth; k < std::min(birth + config.noise.fp_lifetime, config.frame_count);
                 ++k) {
                auto [fx, fy] = config.camera_position(k);
                BBox fb;
                if (config.fp_world_anchored) {
                    fb = BBox{wx - fx, wy - fy, size_w, size_h};
                } else {
                    fb = BBox{wx - cx, wy - cy, size_w, size_h};
                }
                if (!box_inside(fb, config.frame_width, config.frame_height)) continue;
                Detection d;
                d.frame = k;
                d.class_label = cls;
                d.box = fb;
                d.score = 1.0;
                out.push_back(std::move(d));
            }
        }
    }

    std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.score > b.score;
    });
    return out;
}

std::vector<std::pair<int, int>> random_walk_steps(int count, int max_step, int max_drift,
                                                   uint64_t seed) {
    Rng rng(seed);
    std::vector<std::pair<int, int>> steps;
    steps.reserve(static_cast<size_t>(std::max(count, 0)));
    int x = 0, y = 0;
    for (int k = 0; k < count; ++k) {
        int sx = rng.uniform_int(-max_step, max_step);
        int sy = rng.uniform_int(-max_step, max_step);
        if (std::abs(x + sx) > max_drift) sx = -sx; // reflect at the drift bound
        if (std::abs(y + sy) > max_drift) sy = -sy;
        x += sx;
        y += sy;
        steps.emplace_back(sx, sy);
    }
    return steps;
}

SynthConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ParseError(path.string(), 1, "config must be a JSON object");
    }
    static const std::set<std::string> kAllowed = {
        "world_width",  "world_height",   "frame_width",        "frame_height",
        "frame_count",  "camera_start_x", "camera_start_y",     "camera_steps",
        "objects",      "noise",          "texture_seed",       "detection_seed",
        "sensor_noise_sigma", "fp_world_anchored"};
    for (const auto& [key, value] : j.items()) {
        if (!kAllowed.count(key)) {
            throw ValidationError(path.string(), 1, "unknown field '" + key + "'");
        }
    }

    SynthConfig cfg;
    auto get_int = [&](const char* key, int& dst) {
        if (j.contains(key)) {
            if (!j[key].is_number_integer()) {
                throw ValidationError(path.string(), 1, std::string("field '") + key + "' must be an integer");
            }
            dst = j[key].get<int>();
        }
    };
    get_int("world_width", cfg.world_width);
    get_int("world_height", cfg.world_height);
    get_int("frame_width", cfg.frame_width);
    get_int("frame_height", cfg.frame_height);
    get_int("frame_count", cfg.frame_count);
    get_int("camera_start_x", cfg.camera_start_x);
    get_int("camera_start_y", cfg.camera_start_y);

    if (j.contains("camera_steps")) {
        const json& steps = j["camera_steps"];
        if (steps.is_array()) {
            for (const json& s : steps) {
                if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() ||
                    !s[1].is_number_integer()) {
                    throw ValidationError(path.string(), 1,
                                          "camera_steps entries must be [dx, dy] integer pairs");
                }
                cfg.camera_steps.emplace_back(s[0].get<int>(), s[1].get<int>());
            }
        } else if (steps.is_object() && steps.contains("constant")) {
            const json& c = steps["constant"];
            if (!c.is_array() || c.size() != 2 || !c[0].is_number_integer() ||
                !c[1].is_number_integer()) {
                throw ValidationError(path.string(), 1, "constant step must be [dx, dy] integers");
            }
            cfg.camera_steps.assign(static_cast<size_t>(std::max(cfg.frame_count - 1, 0)),
                                    {c[0].get<int>(), c[1].get<int>()});
        } else if (steps.is_object() && steps.contains("random_walk")) {
            const json& rw = steps["random_walk"];
            uint64_t seed = rw.value("seed", 1u);
            int max_step = rw.value("max_step", 3);
            int max_drift = rw.value("max_drift", 32);
            cfg.camera_steps =
                random_walk_steps(std::max(cfg.frame_count - 1, 0), max_step, max_drift, seed);
        } else {
            throw ValidationError(path.string(), 1, "camera_steps must be a list or generator spec");
        }
    }

    if (j.contains("objects")) {
        for (const json& o : j["objects"]) {
            if (!o.is_object() || !o.contains("class") || !o.contains("box")) {
                throw ValidationError(path.string(), 1, "objects entries need 'class' and 'box'");
            }
            const json& b = o["box"];
            if (!b.is_array() || b.size() != 4) {
                throw ValidationError(path.string(), 1, "object box must be [x, y, w, h]");
            }
            cfg.objects.emplace_back(o["class"].get<std::string>(),
                                     BBox{b[0].get<double>(), b[1].get<double>(),
                                          b[2].get<double>(), b[3].get<double>()});
        }
    }

    if (j.contains("noise")) {
        const json& n = j["noise"];
        cfg.noise.miss_prob = n.value("miss_prob", 0.0);
        cfg.noise.jitter_sigma = n.value("jitter_sigma", 0.0);
        cfg.noise.fp_rate = n.value("fp_rate", 0.0);
        cfg.noise.fp_lifetime = n.value("fp_lifetime", 1);
    }
    if (j.contains("texture_seed")) cfg.texture_seed = j["texture_seed"].get<uint64_t>();
    if (j.contains("detection_seed")) cfg.detection_seed = j["detection_seed"].get<uint64_t>();
    if (j.contains("sensor_noise_sigma")) cfg.sensor_noise_sigma = j["sensor_noise_sigma"].get<double>();
    if (j.contains("fp_world_anchored")) cfg.fp_world_anchored = j["fp_world_anchored"].get<bool>();

    cfg.validate();
    return cfg;
}

void write_scene(const std::filesystem::path& dir, const SynthConfig& config,
                 const SynthScene& scene, std::span<const Detection> detections) {
    std::filesystem::create_directories(dir / "frames");
    for (const GrayFrame& frame : scene.frames) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06d.pgm", frame.frame_index);
        io::save_frame(dir / "frames" / name, frame);
    }
    io::save_annotations(dir / "annotations.jsonl", scene.ground_truth);
    io::save_detections(dir / "detections.jsonl", detections);
    if (config.frame_count > 1) {
        io::save_displacement_cache(dir / "true_cache.csv", scene.true_table);
    }
}

} // namespace skytrack::synth
