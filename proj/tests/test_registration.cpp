#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "skytrack/errors.hpp"
#include "skytrack/registration.hpp"
#include "skytrack/rng.hpp"

using namespace skytrack;

namespace {

Spectrum random_spectrum(int width, int height, uint64_t seed) {
    Spectrum s;
    s.width = width;
    s.height = height;
    s.bins.resize(static_cast<size_t>(width) * height);
    Rng rng(seed);
    for (auto& b : s.bins) b = std::complex<double>(rng.uniform(-1, 1), rng.uniform(-1, 1));
    return s;
}

} // namespace

TEST_CASE("cross power of a spectrum with itself is unit magnitude, zero phase") {
    Spectrum s = random_spectrum(8, 8, 3);
    Spectrum c = cross_power_spectrum(s, s);
    for (const auto& bin : c.bins) {
        CHECK(std::abs(bin) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(bin.imag() == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(bin.real() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("cross power recovers the modulation ramp of a shifted spectrum") {
    const int w = 16, h = 16, x0 = 3, y0 = 5;
    Spectrum base = random_spectrum(w, h, 9);
    Spectrum modulated = base;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double phase = -2.0 * std::numbers::pi *
                           (static_cast<double>(c) * x0 / w + static_cast<double>(r) * y0 / h);
            modulated.at(r, c) *= std::complex<double>(std::cos(phase), std::sin(phase));
        }
    }
    Spectrum cps = cross_power_spectrum(modulated, base);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double phase = -2.0 * std::numbers::pi *
                           (static_cast<double>(c) * x0 / w + static_cast<double>(r) * y0 / h);
            CHECK(cps.at(r, c).real() == doctest::Approx(std::cos(phase)).epsilon(1e-9));
            CHECK(cps.at(r, c).imag() == doctest::Approx(std::sin(phase)).epsilon(1e-9));
        }
    }
}

TEST_CASE("cross power matches a direct evaluation on random 8x8 spectra") {
    Spectrum a = random_spectrum(8, 8, 21);
    Spectrum b = random_spectrum(8, 8, 22);
    Spectrum got = cross_power_spectrum(a, b);
    oracle::ComplexGrid want = oracle::direct_cross_power(a.bins, b.bins);
    for (size_t i = 0; i < want.size(); ++i) {
        CHECK(std::abs(got.bins[i] - want[i]) <= 1e-12);
    }
}

TEST_CASE("cross power rejects mismatched dimensions") {
    Spectrum a = random_spectrum(8, 8, 1);
    Spectrum b = random_spectrum(8, 16, 2);
    CHECK_THROWS_AS((void)cross_power_spectrum(a, b), UsageError);
}

TEST_CASE("decode_peak wrap-around") {
    PeakOffset a = decode_peak(0, 0, 128, 128);
    CHECK(a.dy == 0);
    CHECK(a.dx == 0);

    PeakOffset b = decode_peak(127, 1, 128, 128);
    CHECK(b.dy == -1);
    CHECK(b.dx == 1);

    // Nyquist tie resolves to +N/2.
    PeakOffset c = decode_peak(64, 64, 128, 128);
    CHECK(c.dy == 64);
    CHECK(c.dx == 64);
}

TEST_CASE("phase correlation of a frame with itself is (0,0) with full confidence") {
    GrayFrame f = oracle::random_textured_frame(64, 64, 100);
    Displacement d = phase_correlate(f, f);
    CHECK(d.dx == 0.0);
    CHECK(d.dy == 0.0);
    CHECK(d.peak_score > 0.99);
}

TEST_CASE("phase correlation recovers a circular shift exactly") {
    GrayFrame f = oracle::random_textured_frame(128, 128, 101);
    GrayFrame g = oracle::circular_shift(f, 7, -3);

    Correlation corr = correlate(f, g);
    CHECK(corr.displacement.dx == 7.0);
    CHECK(corr.displacement.dy == -3.0);

    // Exhaustive search over the surface must land on the same cell.
    int best_r = 0, best_c = 0;
    double best = -1.0;
    for (int r = 0; r < corr.height; ++r) {
        for (int c = 0; c < corr.width; ++c) {
            double mag = std::abs(corr.at(r, c));
            if (mag > best) {
                best = mag;
                best_r = r;
                best_c = c;
            }
        }
    }
    CHECK(best_r == corr.peak_row);
    CHECK(best_c == corr.peak_col);
    PeakOffset off = decode_peak(best_r, best_c, corr.height, corr.width);
    CHECK(off.dx == 7);
    CHECK(off.dy == -3);
}

TEST_CASE("phase correlation locates crops of a noisy world within one pixel") {
    GrayFrame world = oracle::random_textured_frame(256, 256, 102);
    GrayFrame f = oracle::crop(world, 60, 60, 128, 128);
    GrayFrame g = oracle::crop(world, 50, 56, 128, 128); // window moved (-10,-4): content +(10,4)
    oracle::add_noise(f, 0.01, 5);
    oracle::add_noise(g, 0.01, 6);
    Displacement d = phase_correlate(f, g);
    CHECK(std::abs(d.dx - 10.0) <= 1.0);
    CHECK(std::abs(d.dy - 4.0) <= 1.0);
}

TEST_CASE("phase correlation matches the direct O(N^4) oracle on 32x32 frames") {
    for (uint64_t seed = 0; seed < 2; ++seed) {
        GrayFrame f = oracle::random_textured_frame(32, 32, 200 + seed);
        GrayFrame g = oracle::circular_shift(f, static_cast<int>(3 + seed), -2);
        Correlation corr = correlate(f, g);

        oracle::ComplexGrid fa = oracle::direct_dft2d(g);
        oracle::ComplexGrid fb = oracle::direct_dft2d(f);
        oracle::ComplexGrid cps = oracle::direct_cross_power(fa, fb);
        oracle::ComplexGrid surface = oracle::direct_inverse_dft2d(cps, 32, 32);

        size_t best = 0;
        for (size_t i = 1; i < surface.size(); ++i) {
            if (std::abs(surface[i]) > std::abs(surface[best])) best = i;
        }
        CHECK(static_cast<int>(best / 32) == corr.peak_row);
        CHECK(static_cast<int>(best % 32) == corr.peak_col);
        for (size_t i = 0; i < surface.size(); ++i) {
            CHECK(std::abs(surface[i] - corr.surface[i]) <= 1e-6);
        }
    }
}

TEST_CASE("antisymmetry under argument swap for circular shifts") {
    Rng rng(300);
    for (int i = 0; i < 10; ++i) {
        GrayFrame f = oracle::random_textured_frame(64, 64, 400 + i);
        int dx = rng.uniform_int(-16, 16);
        int dy = rng.uniform_int(-16, 16);
        GrayFrame g = oracle::circular_shift(f, dx, dy);
        Displacement fwd = phase_correlate(f, g);
        Displacement bwd = phase_correlate(g, f);
        CHECK(fwd.dx == -bwd.dx);
        CHECK(fwd.dy == -bwd.dy);
        CHECK(fwd.dx == static_cast<double>(dx));
        CHECK(fwd.dy == static_cast<double>(dy));
    }
}

TEST_CASE("exact recovery of circular shifts up to N/4") {
    Rng rng(301);
    for (int i = 0; i < 20; ++i) {
        GrayFrame f = oracle::random_textured_frame(64, 64, 500 + i);
        int dx = rng.uniform_int(-16, 16);
        int dy = rng.uniform_int(-16, 16);
        Displacement d = phase_correlate(f, oracle::circular_shift(f, dx, dy));
        CHECK(d.dx == static_cast<double>(dx));
        CHECK(d.dy == static_cast<double>(dy));
    }
}

TEST_CASE("decoded displacement is invariant to a common brightness scale") {
    GrayFrame f = oracle::random_textured_frame(64, 64, 600);
    GrayFrame g = oracle::circular_shift(f, 5, 9);
    Displacement base = phase_correlate(f, g);
    for (float& s : f.samples) s *= 0.27f;
    for (float& s : g.samples) s *= 0.27f;
    Displacement scaled = phase_correlate(f, g);
    CHECK(scaled.dx == base.dx);
    CHECK(scaled.dy == base.dy);
}

TEST_CASE("constant frames are indeterminate") {
    GrayFrame f = GrayFrame::create(32, 32);
    for (float& s : f.samples) s = 0.5f;
    GrayFrame g = f;
    CHECK_THROWS_AS((void)phase_correlate(f, g), IndeterminateDisplacementError);
}

TEST_CASE("phase correlation rejects mismatched frames") {
    GrayFrame f = oracle::random_textured_frame(32, 32, 1);
    GrayFrame g = oracle::random_textured_frame(32, 64, 2);
    CHECK_THROWS_AS((void)phase_correlate(f, g), UsageError);
}

TEST_CASE("register_sequence of identical frames yields a zero table") {
    GrayFrame f = oracle::random_textured_frame(64, 64, 700, 0);
    GrayFrame g = f;
    g.frame_index = 1;
    GrayFrame h = f;
    h.frame_index = 2;
    std::vector<GrayFrame> frames{f, g, h};
    DisplacementTable table = register_sequence(frames);
    for (int k : {0, 1, 2}) {
        CHECK(table.cumulative(k).dx == 0.0);
        CHECK(table.cumulative(k).dy == 0.0);
        CHECK_FALSE(table.unreliable(k));
    }
}

TEST_CASE("register_sequence accumulates pairwise shifts") {
    GrayFrame f0 = oracle::random_textured_frame(64, 64, 701, 0);
    GrayFrame f1 = oracle::circular_shift(f0, 3, 0);
    f1.frame_index = 1;
    GrayFrame f2 = oracle::circular_shift(f1, -1, 2);
    f2.frame_index = 2;
    std::vector<GrayFrame> frames{f0, f1, f2};
    DisplacementTable table = register_sequence(frames);
    CHECK(table.cumulative(0).dx == 0.0);
    CHECK(table.cumulative(1).dx == 3.0);
    CHECK(table.cumulative(1).dy == 0.0);
    CHECK(table.cumulative(2).dx == 2.0);
    CHECK(table.cumulative(2).dy == 2.0);
    CHECK(table.delta(1, 2).dx == -1.0);
    CHECK(table.delta(1, 2).dy == 2.0);
}

TEST_CASE("register_sequence recovers a synthetic pan exactly") {
    // Window pans (-5,-1) per frame across a textured world, so scene content
    // moves (+5,+1) per frame.
    GrayFrame world = oracle::random_textured_frame(400, 320, 702);
    std::vector<GrayFrame> frames;
    for (int k = 0; k < 10; ++k) {
        frames.push_back(oracle::crop(world, 120 - 5 * k, 60 - k, 128, 128, k));
    }
    DisplacementTable table = register_sequence(frames);
    for (int k = 0; k < 10; ++k) {
        CHECK(table.cumulative(k).dx == doctest::Approx(5.0 * k));
        CHECK(table.cumulative(k).dy == doctest::Approx(1.0 * k));
    }
}

TEST_CASE("register_sequence flags unreliable pairs and assumes stasis") {
    GrayFrame f0 = oracle::random_textured_frame(64, 64, 703, 0);
    GrayFrame flat = GrayFrame::create(64, 64, 1);
    for (float& s : flat.samples) s = 0.5f;
    GrayFrame f2 = oracle::circular_shift(f0, 4, 4);
    f2.frame_index = 2;
    std::vector<GrayFrame> frames{f0, flat, f2};
    DisplacementTable table = register_sequence(frames);
    CHECK(table.unreliable(1));
    CHECK(table.cumulative(1).dx == 0.0);
    CHECK(table.cumulative(1).dy == 0.0);
    CHECK(table.pairs()[0].unreliable);
}

TEST_CASE("uncorrelated frames fall below the confidence floor") {
    GrayFrame f = oracle::random_textured_frame(64, 64, 704, 0);
    GrayFrame g = oracle::random_textured_frame(64, 64, 999, 1);
    std::vector<GrayFrame> frames{f, g};
    DisplacementTable table = register_sequence(frames);
    CHECK(table.pairs()[0].unreliable);
    CHECK(table.cumulative(1).dx == 0.0);
    CHECK(table.pairs()[0].d.peak_score < 0.05);
}

TEST_CASE("register_sequence rejects short or mixed input") {
    std::vector<GrayFrame> one{oracle::random_textured_frame(32, 32, 1)};
    CHECK_THROWS_AS((void)register_sequence(one), UsageError);

    std::vector<GrayFrame> mixed{oracle::random_textured_frame(32, 32, 1, 0),
                                 oracle::random_textured_frame(32, 64, 2, 1)};
    CHECK_THROWS_AS((void)register_sequence(mixed), UsageError);

    std::vector<GrayFrame> two{oracle::random_textured_frame(32, 32, 1, 0),
                               oracle::random_textured_frame(32, 32, 2, 1)};
    RegistrationParams bad;
    bad.stride = 0;
    CHECK_THROWS_AS((void)register_sequence(two, bad), UsageError);
}

TEST_CASE("downscale rescales the recovered displacement") {
    GrayFrame world = oracle::random_textured_frame(512, 512, 705);
    GrayFrame f = oracle::crop(world, 128, 128, 256, 256, 0);
    GrayFrame g = oracle::crop(world, 120, 124, 256, 256, 1); // content +(8,4)
    std::vector<GrayFrame> frames{f, g};
    RegistrationParams params;
    params.downscale = 4;
    DisplacementTable table = register_sequence(frames, params);
    CHECK(table.cumulative(1).dx == doctest::Approx(8.0));
    CHECK(table.cumulative(1).dy == doctest::Approx(4.0));
}

TEST_CASE("displacement table validates chains and lookups") {
    std::vector<DisplacementTable::Pair> pairs;
    pairs.push_back({0, 1, Displacement{1, 0, 0.9}, false});
    pairs.push_back({1, 2, Displacement{0.5, -2, 0.8}, false});
    DisplacementTable table = DisplacementTable::from_pairs(0, pairs);
    CHECK(table.cumulative(2).dx == doctest::Approx(1.5));
    CHECK(table.cumulative(2).dy == doctest::Approx(-2.0));
    CHECK(table.cumulative(2).peak_score == doctest::Approx(0.8));
    CHECK(table.next_frame(1) == 2);
    CHECK_FALSE(table.next_frame(2).has_value());
    CHECK_THROWS_AS((void)table.cumulative(5), UsageError);

    std::vector<DisplacementTable::Pair> broken;
    broken.push_back({0, 1, Displacement{1, 0, 0.9}, false});
    broken.push_back({2, 3, Displacement{1, 0, 0.9}, false});
    CHECK_THROWS_AS((void)DisplacementTable::from_pairs(0, broken), UsageError);
}
