#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "skytrack/errors.hpp"
#include "skytrack/tracker.hpp"

using namespace skytrack;

namespace {

/// Static-camera table over frames [0, count).
DisplacementTable static_table(int count) {
    std::vector<DisplacementTable::Pair> pairs;
    for (int k = 0; k + 1 < count; ++k) {
        pairs.push_back({k, k + 1, Displacement{0, 0, 1.0}, false});
    }
    return DisplacementTable::from_pairs(0, pairs);
}

DisplacementTable constant_pan_table(int count, double dx, double dy) {
    std::vector<DisplacementTable::Pair> pairs;
    for (int k = 0; k + 1 < count; ++k) {
        pairs.push_back({k, k + 1, Displacement{dx, dy, 1.0}, false});
    }
    return DisplacementTable::from_pairs(0, pairs);
}

Detection det(int frame, BBox box, double score = 1.0, std::string cls = "tire") {
    Detection d;
    d.frame = frame;
    d.class_label = std::move(cls);
    d.box = box;
    d.score = score;
    return d;
}

/// Offset along x that produces the requested IoU for two w-by-h boxes.
double offset_for_iou(double w, double target) {
    return w * (1.0 - target) / (1.0 + target);
}

} // namespace

TEST_CASE("associate matches an exactly overlapping pair") {
    TrackerParams params;
    std::vector<TrackHead> heads{{0, BBox{0, 0, 10, 10}, "tire"}};
    std::vector<Detection> dets{det(0, BBox{0, 0, 10, 10})};
    Association a = associate(heads, dets, params);
    REQUIRE(a.matches.size() == 1);
    CHECK(a.matches[0] == std::pair<int, int>{0, 0});
    CHECK(a.unmatched_track_ids.empty());
    CHECK(a.unmatched_detections.empty());
}

TEST_CASE("associate leaves sub-threshold pairs unmatched") {
    TrackerParams params;
    std::vector<TrackHead> heads{{0, BBox{0, 0, 10, 10}, "tire"}};
    std::vector<Detection> dets{det(0, BBox{8, 8, 10, 10})}; // IoU ~ 0.02
    Association a = associate(heads, dets, params);
    CHECK(a.matches.empty());
    CHECK(a.unmatched_track_ids == std::vector<int>{0});
    CHECK(a.unmatched_detections == std::vector<int>{0});
}

TEST_CASE("associate resolves competing pairs greedily by descending IoU") {
    // Engineered overlaps: (h1,d1)=0.9, (h1,d2)=0.6, (h2,d2)=0.7, rest below 0.5.
    const double w = 19.0, h = 10.0;
    BBox h1{0, 0, w, h};
    BBox d1{offset_for_iou(w, 0.9), 0, w, h};
    BBox d2{offset_for_iou(w, 0.6), 0, w, h};
    BBox h2{d2.x + offset_for_iou(w, 0.7), 0, w, h};
    BBox d3{200, 0, w, h};
    CHECK(iou(h1, d1) == doctest::Approx(0.9));
    CHECK(iou(h1, d2) == doctest::Approx(0.6));
    CHECK(iou(h2, d2) == doctest::Approx(0.7));
    CHECK(iou(h2, d1) < 0.5);

    TrackerParams params;
    std::vector<TrackHead> heads{{1, h1, "tire"}, {2, h2, "tire"}};
    std::vector<Detection> dets{det(0, d1), det(0, d2), det(0, d3)};
    Association a = associate(heads, dets, params);
    REQUIRE(a.matches.size() == 2);
    CHECK(a.matches[0] == std::pair<int, int>{1, 0});
    CHECK(a.matches[1] == std::pair<int, int>{2, 1});
    CHECK(a.unmatched_detections == std::vector<int>{2});
}

TEST_CASE("associate breaks IoU ties by detection score, then track id") {
    TrackerParams params;
    std::vector<TrackHead> heads{{0, BBox{0, 0, 10, 10}, "tire"}};
    std::vector<Detection> dets{det(0, BBox{2, 0, 10, 10}, 0.5), det(0, BBox{-2, 0, 10, 10}, 0.9)};
    Association a = associate(heads, dets, params);
    REQUIRE(a.matches.size() == 1);
    CHECK(a.matches[0].second == 1); // higher score wins the tie

    std::vector<TrackHead> two_heads{{7, BBox{2, 0, 10, 10}, "tire"}, {3, BBox{-2, 0, 10, 10}, "tire"}};
    std::vector<Detection> one_det{det(0, BBox{0, 0, 10, 10}, 0.8)};
    Association b = associate(two_heads, one_det, params);
    REQUIRE(b.matches.size() == 1);
    CHECK(b.matches[0].first == 3); // lower track id wins the tie
}

TEST_CASE("associate is class-aware by default") {
    TrackerParams params;
    std::vector<TrackHead> heads{{0, BBox{0, 0, 10, 10}, "tire"}};
    std::vector<Detection> dets{det(0, BBox{0, 0, 10, 10}, 1.0, "bucket")};
    CHECK(associate(heads, dets, params).matches.empty());

    params.class_aware = false;
    CHECK(associate(heads, dets, params).matches.size() == 1);
}

TEST_CASE("associate of empty inputs is empty") {
    TrackerParams params;
    Association a = associate({}, {}, params);
    CHECK(a.matches.empty());
    CHECK(a.unmatched_track_ids.empty());
    CHECK(a.unmatched_detections.empty());
}

TEST_CASE("project translates by the inter-frame displacement") {
    DisplacementTable still = static_table(3);
    TrackElement e{0, BBox{10, 10, 5, 5}, ElementKind::Detected, 1.0};
    BBox p = project(e, still);
    CHECK(p.x == 10.0);
    CHECK(p.y == 10.0);

    DisplacementTable pan = constant_pan_table(3, 3, -2);
    BBox q = project(e, pan);
    CHECK(q.x == 13.0);
    CHECK(q.y == 8.0);
    CHECK(q.w == 5.0);

    TrackElement last{2, BBox{0, 0, 5, 5}, ElementKind::Detected, 1.0};
    CHECK_THROWS_AS((void)project(last, still), UsageError);
}

TEST_CASE("repeated projection equals the cumulative displacement") {
    DisplacementTable pan = constant_pan_table(6, 2, 0);
    TrackElement e{0, BBox{0, 0, 4, 4}, ElementKind::Detected, 1.0};
    BBox box = e.box;
    for (int k = 0; k < 5; ++k) {
        box = project(TrackElement{k, box, ElementKind::Estimated, 0.0}, pan);
    }
    CHECK(box.x == 10.0);
    CHECK(box.y == 0.0);
    Displacement direct = pan.delta(0, 5);
    CHECK(box.x == e.box.x + direct.dx);
    CHECK(box.y == e.box.y + direct.dy);
}

TEST_CASE("build_tracks keeps one fully detected object as a single full track") {
    DisplacementTable table = static_table(10);
    std::vector<Detection> dets;
    for (int k = 0; k < 10; ++k) dets.push_back(det(k, BBox{5, 5, 10, 10}));
    std::vector<Track> tracks = build_tracks(dets, table, TrackerParams{});
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].detected_count == 10);
    CHECK(tracks[0].total_count == 10);
    CHECK(tracks[0].vote == 1.0);
    CHECK(tracks[0].elements.size() == 10);
    for (const TrackElement& e : tracks[0].elements) CHECK(e.kind == ElementKind::Detected);
}

TEST_CASE("build_tracks bridges a gap with estimates") {
    DisplacementTable table = static_table(8);
    std::vector<Detection> dets;
    for (int k : {0, 1, 2, 5, 6, 7}) dets.push_back(det(k, BBox{5, 5, 10, 10}));
    std::vector<Track> tracks = build_tracks(dets, table, TrackerParams{});
    REQUIRE(tracks.size() == 1);
    const Track& t = tracks[0];
    CHECK(t.detected_count == 6);
    CHECK(t.total_count == 8);
    CHECK(t.vote == doctest::Approx(0.75));
    REQUIRE(t.elements.size() == 8);
    CHECK(t.elements[3].frame == 3);
    CHECK(t.elements[3].kind == ElementKind::Estimated);
    CHECK(t.elements[4].frame == 4);
    CHECK(t.elements[4].kind == ElementKind::Estimated);
    CHECK(t.elements.front().kind == ElementKind::Detected);
    CHECK(t.elements.back().kind == ElementKind::Detected);
}

TEST_CASE("build_tracks keeps two disjoint simultaneous objects apart") {
    DisplacementTable table = static_table(10);
    std::vector<Detection> dets;
    for (int k = 0; k < 10; ++k) {
        dets.push_back(det(k, BBox{0, 0, 10, 10}));
        dets.push_back(det(k, BBox{100, 100, 10, 10}));
    }
    std::vector<Track> tracks = build_tracks(dets, table, TrackerParams{});
    REQUIRE(tracks.size() == 2);
    for (const Track& t : tracks) {
        CHECK(t.vote == 1.0);
        double x0 = t.elements.front().box.x;
        for (const TrackElement& e : t.elements) CHECK(e.box.x == x0);
    }
}

TEST_CASE("a short-lived track is diluted by its trailing search window") {
    DisplacementTable table = static_table(30);
    std::vector<Detection> dets{det(5, BBox{0, 0, 10, 10}), det(6, BBox{0, 0, 10, 10})};
    TrackerParams params;
    std::vector<Track> tracks = build_tracks(dets, table, params);
    REQUIRE(tracks.size() == 1);
    const Track& t = tracks[0];
    CHECK(t.detected_count == 2);
    CHECK(t.total_count == 2 + params.max_gap);
    CHECK(t.vote == doctest::Approx(2.0 / 12.0));
    // The reported elements stop at the last detection.
    CHECK(t.elements.size() == 2);
    CHECK(t.elements.back().kind == ElementKind::Detected);

    params.vote_spans_trailing = false;
    std::vector<Track> trimmed = build_tracks(dets, table, params);
    REQUIRE(trimmed.size() == 1);
    CHECK(trimmed[0].total_count == 2);
    CHECK(trimmed[0].vote == 1.0);
}

TEST_CASE("a gap longer than max_gap splits the object into two tracks") {
    DisplacementTable table = static_table(20);
    std::vector<Detection> dets;
    for (int k : {0, 1, 2}) dets.push_back(det(k, BBox{0, 0, 10, 10}));
    for (int k : {15, 16}) dets.push_back(det(k, BBox{0, 0, 10, 10}));
    TrackerParams params;
    params.max_gap = 10;
    std::vector<Track> tracks = build_tracks(dets, table, params);
    REQUIRE(tracks.size() == 2);
    CHECK(tracks[0].detected_count == 3);
    CHECK(tracks[1].detected_count == 2);
    // No estimated run inside any track may exceed max_gap.
    for (const Track& t : tracks) {
        int run = 0;
        for (const TrackElement& e : t.elements) {
            run = e.kind == ElementKind::Estimated ? run + 1 : 0;
            CHECK(run <= params.max_gap);
        }
    }
}

TEST_CASE("a gap of exactly max_gap is bridged") {
    DisplacementTable table = static_table(20);
    std::vector<Detection> dets{det(0, BBox{0, 0, 10, 10}), det(11, BBox{0, 0, 10, 10})};
    TrackerParams params;
    params.max_gap = 10;
    std::vector<Track> tracks = build_tracks(dets, table, params);
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].detected_count == 2);
    CHECK(tracks[0].elements.size() == 12);
}

TEST_CASE("every detection lands in exactly one track as a detected element") {
    Rng rng(77);
    DisplacementTable table = static_table(12);
    std::vector<Detection> dets;
    for (int k = 0; k < 12; ++k) {
        int n = rng.uniform_int(0, 4);
        for (int i = 0; i < n; ++i) {
            dets.push_back(det(k, BBox{rng.uniform(0, 200), rng.uniform(0, 200), 8, 8},
                               rng.uniform(0.5, 1.0)));
        }
    }
    std::vector<Track> tracks = build_tracks(dets, table, TrackerParams{});
    std::multiset<std::tuple<int, double, double, double>> input, output;
    for (const Detection& d : dets) input.insert({d.frame, d.box.x, d.box.y, d.score});
    for (const Track& t : tracks) {
        for (const TrackElement& e : t.elements) {
            if (e.kind == ElementKind::Detected) output.insert({e.frame, e.box.x, e.box.y, e.score});
        }
    }
    CHECK(input == output);
}

TEST_CASE("build_tracks under a moving camera follows the displacement table") {
    DisplacementTable pan = constant_pan_table(10, -5, -1);
    std::vector<Detection> dets;
    for (int k = 0; k < 10; ++k) {
        if (k == 4 || k == 5) continue; // two misses mid-track
        dets.push_back(det(k, BBox{100 - 5.0 * k, 50 - 1.0 * k, 12, 12}));
    }
    std::vector<Track> tracks = build_tracks(dets, pan, TrackerParams{});
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].detected_count == 8);
    CHECK(tracks[0].total_count == 10);
    CHECK(tracks[0].elements[4].kind == ElementKind::Estimated);
    CHECK(tracks[0].elements[4].box.x == doctest::Approx(100 - 5.0 * 4));
}

TEST_CASE("track structure is equivariant under a global coordinate shift") {
    Rng rng(88);
    DisplacementTable table = constant_pan_table(10, 2, -1);
    std::vector<Detection> dets;
    for (int k = 0; k < 10; ++k) {
        if (rng.uniform01() < 0.25) continue;
        dets.push_back(det(k, BBox{40 + 2.0 * k, 70 - 1.0 * k, 10, 10}, rng.uniform(0.5, 1.0)));
        if (rng.uniform01() < 0.5) {
            dets.push_back(det(k, BBox{rng.uniform(150, 250), rng.uniform(150, 250), 10, 10},
                               rng.uniform(0.5, 1.0)));
        }
    }
    std::vector<Track> base = build_tracks(dets, table, TrackerParams{});

    const double tx = 17.5, ty = -9.25;
    std::vector<Detection> shifted = dets;
    for (Detection& d : shifted) d.box = translate(d.box, tx, ty);
    std::vector<Track> moved = build_tracks(shifted, table, TrackerParams{});

    REQUIRE(moved.size() == base.size());
    for (size_t i = 0; i < base.size(); ++i) {
        CHECK(moved[i].id == base[i].id);
        CHECK(moved[i].detected_count == base[i].detected_count);
        CHECK(moved[i].total_count == base[i].total_count);
        CHECK(moved[i].vote == base[i].vote);
        REQUIRE(moved[i].elements.size() == base[i].elements.size());
        for (size_t j = 0; j < base[i].elements.size(); ++j) {
            CHECK(moved[i].elements[j].kind == base[i].elements[j].kind);
            CHECK(moved[i].elements[j].box.x == doctest::Approx(base[i].elements[j].box.x + tx));
            CHECK(moved[i].elements[j].box.y == doctest::Approx(base[i].elements[j].box.y + ty));
        }
    }
}

TEST_CASE("build_tracks rejects detections outside the table") {
    DisplacementTable table = static_table(3);
    std::vector<Detection> dets{det(7, BBox{0, 0, 10, 10})};
    CHECK_THROWS_AS((void)build_tracks(dets, table, TrackerParams{}), UsageError);
}

TEST_CASE("build_tracks of no detections is empty") {
    DisplacementTable table = static_table(5);
    CHECK(build_tracks({}, table, TrackerParams{}).empty());
}

TEST_CASE("filter_tracks keeps the inclusive boundary") {
    Track keep;
    keep.id = 0;
    keep.detected_count = 4;
    keep.total_count = 10;
    keep.vote = 4.0 / 10.0;
    Track drop = keep;
    drop.id = 1;
    drop.detected_count = 3;
    drop.vote = 3.0 / 10.0;
    std::vector<Track> tracks{keep, drop};

    std::vector<Track> kept = filter_tracks(tracks, 0.4);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].id == 0);

    CHECK(filter_tracks(tracks, 0.0).size() == 2);
}

TEST_CASE("filtering is monotone: kept sets are nested as t_v grows") {
    Rng rng(99);
    std::vector<Track> tracks;
    for (int i = 0; i < 40; ++i) {
        Track t;
        t.id = i;
        t.total_count = rng.uniform_int(1, 20);
        t.detected_count = rng.uniform_int(1, t.total_count);
        t.vote = static_cast<double>(t.detected_count) / t.total_count;
        tracks.push_back(t);
    }
    std::set<int> previous;
    for (const Track& t : tracks) previous.insert(t.id);
    for (double tv : {0.1, 0.25, 0.4, 0.6, 0.8, 1.0}) {
        std::set<int> kept;
        for (const Track& t : filter_tracks(tracks, tv)) kept.insert(t.id);
        for (int id : kept) CHECK(previous.count(id) == 1);
        previous = kept;
    }
}

TEST_CASE("tracks_to_detections flattens kept tracks and scores estimates") {
    DisplacementTable table = static_table(8);
    std::vector<Detection> dets;
    double scores[] = {0.8, 0.9, 1.0, 0.7, 0.6, 0.5};
    int i = 0;
    for (int k : {0, 1, 2, 5, 6, 7}) dets.push_back(det(k, BBox{5, 5, 10, 10}, scores[i++]));
    std::vector<Track> tracks = build_tracks(dets, table, TrackerParams{});
    REQUIRE(tracks.size() == 1);

    std::vector<Detection> out = tracks_to_detections(tracks);
    REQUIRE(out.size() == 8);
    double mean = (0.8 + 0.9 + 1.0 + 0.7 + 0.6 + 0.5) / 6.0;
    for (const Detection& d : out) {
        CHECK(d.track_id == 0);
        REQUIRE(d.kind.has_value());
        if (d.frame == 3 || d.frame == 4) {
            CHECK(*d.kind == ElementKind::Estimated);
            CHECK(d.score == doctest::Approx(mean));
        } else {
            CHECK(*d.kind == ElementKind::Detected);
        }
    }

    CHECK(tracks_to_detections(std::vector<Track>{}).empty());
}

TEST_CASE("tracker params are validated") {
    TrackerParams params;
    params.t_v = 1.1;
    CHECK_THROWS_AS(params.validate(), UsageError);
    CHECK_THROWS_AS((void)filter_tracks(std::vector<Track>{}, 1.1), UsageError);
    TrackerParams bad_iou;
    bad_iou.iou_threshold = 0.0;
    CHECK_THROWS_AS(bad_iou.validate(), UsageError);
}
