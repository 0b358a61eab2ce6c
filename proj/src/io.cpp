#include "skytrack/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "skytrack/errors.hpp"

namespace skytrack::io {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double parse_double_field(const std::string& path, int line, const std::string& field,
                          const std::string& text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ParseError(path, line, "field '" + field + "' is not a number: '" + text + "'");
    }
    return v;
}

long parse_int_field(const std::string& path, int line, const std::string& field,
                     const std::string& text) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ParseError(path, line, "field '" + field + "' is not an integer: '" + text + "'");
    }
    return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

void reject_unknown_keys(const std::string& path, int line, const json& j,
                         std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) throw ValidationError(path, line, "unknown field '" + key + "'");
    }
}

const json& require(const std::string& path, int line, const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(path, line, std::string("missing field '") + key + "'");
    return *it;
}

double number_field(const std::string& path, int line, const json& j, const char* key) {
    const json& v = require(path, line, j, key);
    if (!v.is_number()) throw ValidationError(path, line, std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

int int_field(const std::string& path, int line, const json& j, const char* key) {
    const json& v = require(path, line, j, key);
    if (!v.is_number_integer()) {
        throw ValidationError(path, line, std::string("field '") + key + "' must be an integer");
    }
    return v.get<int>();
}

std::string string_field(const std::string& path, int line, const json& j, const char* key) {
    const json& v = require(path, line, j, key);
    if (!v.is_string()) throw ValidationError(path, line, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

BBox box_fields(const std::string& path, int line, const json& j) {
    BBox b{number_field(path, line, j, "x"), number_field(path, line, j, "y"),
           number_field(path, line, j, "w"), number_field(path, line, j, "h")};
    if (!b.valid()) throw ValidationError(path, line, "box must have positive finite extent");
    return b;
}

json parse_record(const std::string& path, int line, const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError(path, line, "malformed JSON record");
    if (!j.is_object()) throw ParseError(path, line, "record must be a JSON object");
    return j;
}

const char* kind_name(ElementKind kind) {
    return kind == ElementKind::Detected ? "detected" : "estimated";
}

ElementKind parse_kind(const std::string& path, int line, const std::string& text) {
    if (text == "detected") return ElementKind::Detected;
    if (text == "estimated") return ElementKind::Estimated;
    throw ValidationError(path, line, "field 'kind' must be 'detected' or 'estimated'");
}

/// Applies `fn` to every non-empty line of the file, tracking 1-based numbers.
template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in = open_input(path);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        fn(number, line);
    }
}

} // namespace

std::vector<Detection> load_detections(const std::filesystem::path& path) {
    std::vector<Detection> out;
    int prev_frame = std::numeric_limits<int>::min();
    for_each_line(path, [&](int line, const std::string& text) {
        json j = parse_record(path.string(), line, text);
        reject_unknown_keys(path.string(), line, j,
                            {"frame", "class", "x", "y", "w", "h", "score", "track_id", "kind"});
        Detection d;
        d.frame = int_field(path.string(), line, j, "frame");
        if (d.frame < 0) throw ValidationError(path.string(), line, "frame must be >= 0");
        if (d.frame < prev_frame) {
            throw ValidationError(path.string(), line, "records must be sorted by frame");
        }
        prev_frame = d.frame;
        d.class_label = string_field(path.string(), line, j, "class");
        d.box = box_fields(path.string(), line, j);
        d.score = number_field(path.string(), line, j, "score");
        if (d.score < 0.0 || d.score > 1.0) {
            throw ValidationError(path.string(), line, "score must lie in [0,1]");
        }
        if (j.contains("track_id")) {
            int id = int_field(path.string(), line, j, "track_id");
            if (id < 0) throw ValidationError(path.string(), line, "track_id must be >= 0");
            d.track_id = id;
        }
        if (j.contains("kind")) {
            d.kind = parse_kind(path.string(), line, string_field(path.string(), line, j, "kind"));
        }
        out.push_back(std::move(d));
    });
    std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.score > b.score;
    });
    return out;
}

void save_detections(const std::filesystem::path& path, std::span<const Detection> detections) {
    std::vector<const Detection*> order;
    order.reserve(detections.size());
    for (const Detection& d : detections) order.push_back(&d);
    std::stable_sort(order.begin(), order.end(), [](const Detection* a, const Detection* b) {
        if (a->frame != b->frame) return a->frame < b->frame;
        return a->score > b->score;
    });

    std::ofstream out = open_output(path);
    for (const Detection* d : order) {
        ordered_json j;
        j["frame"] = d->frame;
        j["class"] = d->class_label;
        j["x"] = d->box.x;
        j["y"] = d->box.y;
        j["w"] = d->box.w;
        j["h"] = d->box.h;
        j["score"] = d->score;
        if (d->track_id) j["track_id"] = *d->track_id;
        if (d->kind) j["kind"] = kind_name(*d->kind);
        out << j.dump() << '\n';
    }
}

std::vector<GroundTruthObject> load_annotations(const std::filesystem::path& path) {
    std::map<int, GroundTruthObject> objects;
    std::set<std::pair<int, int>> seen;
    int prev_frame = std::numeric_limits<int>::min();
    for_each_line(path, [&](int line, const std::string& text) {
        json j = parse_record(path.string(), line, text);
        reject_unknown_keys(path.string(), line, j,
                            {"frame", "object_id", "class", "x", "y", "w", "h"});
        int frame = int_field(path.string(), line, j, "frame");
        if (frame < 0) throw ValidationError(path.string(), line, "frame must be >= 0");
        if (frame < prev_frame) {
            throw ValidationError(path.string(), line, "records must be sorted by frame");
        }
        prev_frame = frame;
        int object_id = int_field(path.string(), line, j, "object_id");
        std::string cls = string_field(path.string(), line, j, "class");
        BBox box = box_fields(path.string(), line, j);
        if (!seen.insert({frame, object_id}).second) {
            throw ValidationError(path.string(), line,
                                  "duplicate (frame, object_id) pair: frame " +
                                      std::to_string(frame) + ", object " +
                                      std::to_string(object_id));
        }
        auto [it, inserted] = objects.try_emplace(object_id);
        if (inserted) {
            it->second.object_id = object_id;
            it->second.class_label = cls;
        } else if (it->second.class_label != cls) {
            throw ValidationError(path.string(), line,
                                  "object " + std::to_string(object_id) +
                                      " changes class from '" + it->second.class_label + "' to '" +
                                      cls + "'");
        }
        it->second.boxes[frame] = box;
    });
    std::vector<GroundTruthObject> out;
    out.reserve(objects.size());
    for (auto& [id, obj] : objects) out.push_back(std::move(obj));
    return out;
}

void save_annotations(const std::filesystem::path& path, std::span<const GroundTruthObject> gts) {
    struct Row {
        int frame;
        int object_id;
        const GroundTruthObject* obj;
        const BBox* box;
    };
    std::vector<Row> rows;
    for (const GroundTruthObject& g : gts) {
        for (const auto& [frame, box] : g.boxes) rows.push_back({frame, g.object_id, &g, &box});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.object_id < b.object_id;
    });
    std::ofstream out = open_output(path);
    for (const Row& r : rows) {
        ordered_json j;
        j["frame"] = r.frame;
        j["object_id"] = r.object_id;
        j["class"] = r.obj->class_label;
        j["x"] = r.box->x;
        j["y"] = r.box->y;
        j["w"] = r.box->w;
        j["h"] = r.box->h;
        out << j.dump() << '\n';
    }
}

namespace {

int read_pnm_token(std::istream& in, const std::string& path) {
    // Skip whitespace and '#' comments between header fields.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) throw ValidationError(path + ": malformed PNM header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

} // namespace

GrayFrame load_frame(const std::filesystem::path& path, int frame_index) {
    std::ifstream in = open_input(path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    bool color;
    if (magic[0] == 'P' && magic[1] == '5') {
        color = false;
    } else if (magic[0] == 'P' && magic[1] == '6') {
        color = true;
    } else {
        throw ValidationError(path.string() + ": not a binary PGM/PPM file");
    }
    int width = read_pnm_token(in, path.string());
    int height = read_pnm_token(in, path.string());
    int maxval = read_pnm_token(in, path.string());
    if (maxval < 1 || maxval > 65535) {
        throw ValidationError(path.string() + ": unsupported maxval " + std::to_string(maxval));
    }
    if (width < 16 || height < 16) {
        throw ValidationError(path.string() + ": frame must be at least 16x16");
    }
    int bytes_per_sample = maxval > 255 ? 2 : 1;
    int channels = color ? 3 : 1;
    size_t count = static_cast<size_t>(width) * height * channels;
    std::vector<unsigned char> raw(count * bytes_per_sample);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size()) {
        throw ValidationError(path.string() + ": truncated pixel data");
    }

    GrayFrame frame = GrayFrame::create(width, height, frame_index);
    double inv = 1.0 / maxval;
    auto sample = [&](size_t i) {
        if (bytes_per_sample == 1) return raw[i] * inv;
        return (raw[2 * i] * 256.0 + raw[2 * i + 1]) * inv; // big-endian
    };
    for (size_t p = 0; p < static_cast<size_t>(width) * height; ++p) {
        double value;
        if (color) {
            value = 0.299 * sample(3 * p) + 0.587 * sample(3 * p + 1) + 0.114 * sample(3 * p + 2);
        } else {
            value = sample(p);
        }
        frame.samples[p] = static_cast<float>(value);
    }
    return frame;
}

void save_frame(const std::filesystem::path& path, const GrayFrame& frame) {
    std::ofstream out = open_output(path);
    out << "P5\n" << frame.width << ' ' << frame.height << "\n65535\n";
    std::vector<unsigned char> raw(frame.samples.size() * 2);
    for (size_t i = 0; i < frame.samples.size(); ++i) {
        double clamped = std::clamp(static_cast<double>(frame.samples[i]), 0.0, 1.0);
        auto v = static_cast<unsigned>(std::lround(clamped * 65535.0));
        raw[2 * i] = static_cast<unsigned char>(v >> 8);
        raw[2 * i + 1] = static_cast<unsigned char>(v & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

std::vector<GrayFrame> load_frames(const std::filesystem::path& dir, int stride) {
    if (stride < 1) throw UsageError("stride must be >= 1");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.filename() < b.filename(); });

    std::vector<GrayFrame> frames;
    for (size_t i = 0; i < files.size(); i += static_cast<size_t>(stride)) {
        frames.push_back(load_frame(files[i], static_cast<int>(i)));
        if (frames.size() > 1 && (frames.back().width != frames.front().width ||
                                  frames.back().height != frames.front().height)) {
            throw ValidationError(files[i].string() + ": frame dimensions differ from " +
                                  files.front().string());
        }
    }
    return frames;
}

void save_displacement_cache(const std::filesystem::path& path, const DisplacementTable& table) {
    std::ofstream out = open_output(path);
    out << "from_frame,to_frame,dx,dy,peak_score,flag\n";
    for (const DisplacementTable::Pair& p : table.pairs()) {
        out << p.from << ',' << p.to << ',' << fmt(p.d.dx) << ',' << fmt(p.d.dy) << ','
            << fmt(p.d.peak_score) << ',' << (p.unreliable ? 1 : 0) << '\n';
    }
}

DisplacementTable load_displacement_cache(const std::filesystem::path& path) {
    std::vector<DisplacementTable::Pair> pairs;
    bool saw_header = false;
    for_each_line(path, [&](int line, const std::string& text) {
        if (!saw_header) {
            if (text != "from_frame,to_frame,dx,dy,peak_score,flag") {
                throw ValidationError(path.string(), line, "unexpected displacement cache header");
            }
            saw_header = true;
            return;
        }
        std::vector<std::string> fields;
        std::stringstream ss(text);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 6) {
            throw ParseError(path.string(), line, "expected 6 comma-separated fields");
        }
        DisplacementTable::Pair p;
        p.from = static_cast<int>(parse_int_field(path.string(), line, "from_frame", fields[0]));
        p.to = static_cast<int>(parse_int_field(path.string(), line, "to_frame", fields[1]));
        p.d.dx = parse_double_field(path.string(), line, "dx", fields[2]);
        p.d.dy = parse_double_field(path.string(), line, "dy", fields[3]);
        p.d.peak_score = parse_double_field(path.string(), line, "peak_score", fields[4]);
        long flag = parse_int_field(path.string(), line, "flag", fields[5]);
        if (flag != 0 && flag != 1) throw ValidationError(path.string(), line, "flag must be 0 or 1");
        p.unreliable = flag == 1;
        pairs.push_back(p);
    });
    if (!saw_header) throw ValidationError(path.string() + ": empty displacement cache");
    if (pairs.empty()) throw ValidationError(path.string() + ": displacement cache has no rows");
    int reference = pairs.front().from;
    try {
        return DisplacementTable::from_pairs(reference, std::move(pairs));
    } catch (const UsageError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void RunConfig::validate() const {
    if (stride < 1) throw ValidationError("stride must be >= 1");
    if (downscale < 0) throw ValidationError("downscale must be >= 0");
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
        throw ValidationError("iou_threshold must lie in (0,1]");
    }
    if (t_v < 0.0 || t_v > 1.0) throw ValidationError("t_v must lie in [0,1]");
    if (max_gap < 0) throw ValidationError("max_gap must be >= 0");
    if (!(track_match_threshold > 0.0 && track_match_threshold <= 1.0)) {
        throw ValidationError("track_match_threshold must lie in (0,1]");
    }
    if (confidence_floor < 0.0 || confidence_floor > 1.0) {
        throw ValidationError("confidence_floor must lie in [0,1]");
    }
    parse_sweep_grid(sweep);
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ParseError(path.string(), 1, "config must be a JSON object");
    }
    reject_unknown_keys(path.string(), 1, j,
                        {"stride", "downscale", "iou_threshold", "t_v", "max_gap",
                         "track_match_threshold", "confidence_floor", "sweep", "seed"});
    RunConfig cfg;
    if (j.contains("stride")) cfg.stride = int_field(path.string(), 1, j, "stride");
    if (j.contains("downscale")) cfg.downscale = int_field(path.string(), 1, j, "downscale");
    if (j.contains("iou_threshold")) cfg.iou_threshold = number_field(path.string(), 1, j, "iou_threshold");
    if (j.contains("t_v")) cfg.t_v = number_field(path.string(), 1, j, "t_v");
    if (j.contains("max_gap")) cfg.max_gap = int_field(path.string(), 1, j, "max_gap");
    if (j.contains("track_match_threshold")) {
        cfg.track_match_threshold = number_field(path.string(), 1, j, "track_match_threshold");
    }
    if (j.contains("confidence_floor")) {
        cfg.confidence_floor = number_field(path.string(), 1, j, "confidence_floor");
    }
    if (j.contains("sweep")) cfg.sweep = string_field(path.string(), 1, j, "sweep");
    if (j.contains("seed")) {
        const json& v = j["seed"];
        if (!v.is_number_unsigned() && !v.is_number_integer()) {
            throw ValidationError(path.string(), 1, "field 'seed' must be an integer");
        }
        cfg.seed = v.get<uint64_t>();
    }
    cfg.validate();
    return cfg;
}

std::vector<double> parse_sweep_grid(const std::string& spec) {
    auto snap = [](double v) { return std::round(v * 1e9) / 1e9; };
    auto parse_part = [&](const std::string& part) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc{} || ptr != part.data() + part.size()) {
            throw ValidationError("sweep grid value is not a number: '" + part + "'");
        }
        return v;
    };

    std::vector<std::string> parts;
    std::string current;
    for (char c : spec) {
        if (c == ':') {
            parts.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    parts.push_back(current);

    std::vector<double> grid;
    if (parts.size() == 1) {
        grid.push_back(snap(parse_part(parts[0])));
    } else if (parts.size() == 3) {
        double start = parse_part(parts[0]);
        double step = parse_part(parts[1]);
        double stop = parse_part(parts[2]);
        if (step <= 0.0) throw ValidationError("sweep grid step must be positive");
        if (stop < start) throw ValidationError("sweep grid stop must be >= start");
        int count = static_cast<int>(std::floor((stop - start) / step + 1e-9)) + 1;
        for (int k = 0; k < count; ++k) grid.push_back(snap(start + k * step));
    } else {
        throw ValidationError("sweep grid must be a value or start:step:stop");
    }
    for (double v : grid) {
        if (v < 0.0 || v > 1.0) throw ValidationError("sweep grid values must lie in [0,1]");
    }
    return grid;
}

std::string eval_report_to_json(const EvalReport& report) {
    ordered_json j;
    j["tp"] = report.tp;
    j["fp"] = report.fp;
    j["fn"] = report.fn;
    j["precision"] = report.precision;
    j["recall"] = report.recall;
    j["f1"] = report.f1;
    j["ap50"] = report.ap50;
    j["sweep"] = ordered_json::array();
    for (const SweepPoint& p : report.sweep) {
        ordered_json point;
        point["tv"] = p.t_v;
        point["precision"] = p.precision;
        point["recall"] = p.recall;
        j["sweep"].push_back(point);
    }
    return j.dump(2);
}

void save_sweep_csv(const std::filesystem::path& path, std::span<const SweepPoint> points) {
    std::ofstream out = open_output(path);
    out << "tv,precision,recall\n";
    for (const SweepPoint& p : points) {
        out << fmt(p.t_v) << ',' << fmt(p.precision) << ',' << fmt(p.recall) << '\n';
    }
}

} // namespace skytrack::io
