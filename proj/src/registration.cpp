#include "skytrack/registration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fftw3.h>

#include "skytrack/errors.hpp"

namespace skytrack {

namespace {

constexpr int kMinFrameDim = 16;
constexpr double kNormEpsilon = 1e-12; // clamp for null bins of the cross spectrum
constexpr int kAutoDownscaleWidth = 2048;
constexpr int kAutoDownscaleFactor = 4;

void check_same_dims(int wa, int ha, int wb, int hb, const char* what) {
    if (wa != wb || ha != hb) {
        throw UsageError(std::string(what) + ": dimension mismatch (" + std::to_string(wa) + "x" +
                         std::to_string(ha) + " vs " + std::to_string(wb) + "x" +
                         std::to_string(hb) + ")");
    }
}

} // namespace

GrayFrame GrayFrame::create(int width, int height, int frame_index) {
    GrayFrame f;
    f.width = width;
    f.height = height;
    f.frame_index = frame_index;
    if (width < kMinFrameDim || height < kMinFrameDim) {
        throw UsageError("frame dimensions must be at least 16x16, got " + std::to_string(width) +
                         "x" + std::to_string(height));
    }
    f.samples.assign(static_cast<size_t>(width) * height, 0.0f);
    return f;
}

void GrayFrame::validate() const {
    if (width < kMinFrameDim || height < kMinFrameDim) {
        throw UsageError("frame dimensions must be at least 16x16, got " + std::to_string(width) +
                         "x" + std::to_string(height));
    }
    if (samples.size() != static_cast<size_t>(width) * height) {
        throw UsageError("frame sample count does not match dimensions");
    }
    for (float s : samples) {
        if (!std::isfinite(s)) throw UsageError("frame contains non-finite samples");
    }
}

Spectrum dft2d(const GrayFrame& frame) {
    frame.validate();
    size_t n = frame.samples.size();
    std::vector<std::complex<double>> in(n);
    for (size_t i = 0; i < n; ++i) in[i] = std::complex<double>(frame.samples[i], 0.0);

    Spectrum out;
    out.width = frame.width;
    out.height = frame.height;
    out.bins.resize(n);

    fftw_plan plan = fftw_plan_dft_2d(frame.height, frame.width,
                                      reinterpret_cast<fftw_complex*>(in.data()),
                                      reinterpret_cast<fftw_complex*>(out.bins.data()),
                                      FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    return out;
}

Spectrum cross_power_spectrum(const Spectrum& later, const Spectrum& earlier) {
    check_same_dims(later.width, later.height, earlier.width, earlier.height,
                    "cross_power_spectrum");
    if (later.bins.size() != static_cast<size_t>(later.width) * later.height) {
        throw UsageError("cross_power_spectrum: bin count does not match dimensions");
    }
    Spectrum out;
    out.width = later.width;
    out.height = later.height;
    out.bins.resize(later.bins.size());
    for (size_t i = 0; i < later.bins.size(); ++i) {
        std::complex<double> prod = later.bins[i] * std::conj(earlier.bins[i]);
        out.bins[i] = prod / std::max(std::abs(prod), kNormEpsilon);
    }
    return out;
}

PeakOffset decode_peak(int row, int col, int height, int width) {
    PeakOffset off;
    off.dy = row <= height / 2 ? row : row - height;
    off.dx = col <= width / 2 ? col : col - width;
    return off;
}

Correlation correlate(const GrayFrame& earlier, const GrayFrame& later) {
    check_same_dims(earlier.width, earlier.height, later.width, later.height, "phase_correlate");

    Spectrum a = dft2d(later);
    Spectrum b = dft2d(earlier);

    // Featureless inputs have no energy off DC; the surface would be flat and
    // any peak meaningless.
    double max_mag = 0.0;
    double max_off_dc = 0.0;
    for (int r = 0; r < a.height; ++r) {
        for (int c = 0; c < a.width; ++c) {
            double mag = std::abs(a.at(r, c) * std::conj(b.at(r, c)));
            max_mag = std::max(max_mag, mag);
            if (r != 0 || c != 0) max_off_dc = std::max(max_off_dc, mag);
        }
    }
    if (max_off_dc <= 1e-9 * max_mag) {
        throw IndeterminateDisplacementError(
            "cross spectrum vanishes off DC; displacement is indeterminate");
    }

    Spectrum cross = cross_power_spectrum(a, b);

    Correlation corr;
    corr.width = a.width;
    corr.height = a.height;
    corr.surface.resize(cross.bins.size());

    fftw_plan plan = fftw_plan_dft_2d(a.height, a.width,
                                      reinterpret_cast<fftw_complex*>(cross.bins.data()),
                                      reinterpret_cast<fftw_complex*>(corr.surface.data()),
                                      FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    double scale = 1.0 / (static_cast<double>(a.width) * a.height);
    for (auto& v : corr.surface) v *= scale;

    double best = -1.0;
    double energy = 0.0;
    for (int r = 0; r < corr.height; ++r) {
        for (int c = 0; c < corr.width; ++c) {
            double mag = std::abs(corr.at(r, c));
            energy += mag * mag;
            if (mag > best) {
                best = mag;
                corr.peak_row = r;
                corr.peak_col = c;
            }
        }
    }

    PeakOffset off = decode_peak(corr.peak_row, corr.peak_col, corr.height, corr.width);
    corr.displacement.dx = off.dx;
    corr.displacement.dy = off.dy;
    corr.displacement.peak_score = energy > 0.0 ? (best * best) / energy : 0.0;
    return corr;
}

Displacement phase_correlate(const GrayFrame& earlier, const GrayFrame& later) {
    return correlate(earlier, later).displacement;
}

GrayFrame downscale_frame(const GrayFrame& frame, int factor) {
    frame.validate();
    if (factor < 1) throw UsageError("downscale factor must be >= 1");
    if (factor == 1) return frame;
    int w = frame.width / factor;
    int h = frame.height / factor;
    GrayFrame out = GrayFrame::create(w, h, frame.frame_index);
    double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int dr = 0; dr < factor; ++dr)
                for (int dc = 0; dc < factor; ++dc) acc += frame.at(r * factor + dr, c * factor + dc);
            out.at(r, c) = static_cast<float>(acc * inv);
        }
    }
    return out;
}

GrayFrame apply_raised_cosine(const GrayFrame& frame) {
    GrayFrame out = frame;
    std::vector<double> wx(frame.width), wy(frame.height);
    for (int c = 0; c < frame.width; ++c)
        wx[c] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * c / (frame.width - 1));
    for (int r = 0; r < frame.height; ++r)
        wy[r] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * r / (frame.height - 1));
    for (int r = 0; r < frame.height; ++r)
        for (int c = 0; c < frame.width; ++c)
            out.at(r, c) = static_cast<float>(frame.at(r, c) * wy[r] * wx[c]);
    return out;
}

DisplacementTable DisplacementTable::from_pairs(int reference_index, std::vector<Pair> pairs) {
    DisplacementTable table;
    table.reference_index_ = reference_index;
    table.frames_.push_back(reference_index);
    table.cumulative_.push_back(Displacement{0.0, 0.0, 1.0});
    table.unreliable_.push_back(false);

    Displacement cum{0.0, 0.0, 1.0};
    bool tainted = false;
    int expected_from = reference_index;
    for (const Pair& p : pairs) {
        if (p.from != expected_from) {
            throw UsageError("displacement pairs do not form a contiguous chain at frame " +
                             std::to_string(p.from));
        }
        if (p.to <= p.from) {
            throw UsageError("displacement pair must advance the frame ordinal");
        }
        cum.dx += p.d.dx;
        cum.dy += p.d.dy;
        cum.peak_score = std::min(cum.peak_score, p.d.peak_score);
        tainted = tainted || p.unreliable;
        table.frames_.push_back(p.to);
        table.cumulative_.push_back(cum);
        table.unreliable_.push_back(tainted);
        expected_from = p.to;
    }
    table.pairs_ = std::move(pairs);
    return table;
}

size_t DisplacementTable::index_of(int frame) const {
    auto it = std::lower_bound(frames_.begin(), frames_.end(), frame);
    if (it == frames_.end() || *it != frame) {
        throw UsageError("displacement table has no entry for frame " + std::to_string(frame));
    }
    return static_cast<size_t>(it - frames_.begin());
}

bool DisplacementTable::contains(int frame) const {
    return std::binary_search(frames_.begin(), frames_.end(), frame);
}

const Displacement& DisplacementTable::cumulative(int frame) const {
    return cumulative_[index_of(frame)];
}

Displacement DisplacementTable::delta(int from, int to) const {
    const Displacement& a = cumulative(from);
    const Displacement& b = cumulative(to);
    return Displacement{b.dx - a.dx, b.dy - a.dy, std::min(a.peak_score, b.peak_score)};
}

std::optional<int> DisplacementTable::next_frame(int frame) const {
    size_t i = index_of(frame);
    if (i + 1 >= frames_.size()) return std::nullopt;
    return frames_[i + 1];
}

bool DisplacementTable::unreliable(int frame) const {
    return unreliable_[index_of(frame)];
}

DisplacementTable register_sequence(std::span<const GrayFrame> frames,
                                    const RegistrationParams& params) {
    if (params.stride < 1) throw UsageError("stride must be >= 1");
    if (params.downscale < 0) throw UsageError("downscale must be >= 0");
    if (params.confidence_floor < 0.0 || params.confidence_floor > 1.0) {
        throw UsageError("confidence floor must lie in [0,1]");
    }

    std::vector<const GrayFrame*> sampled;
    for (size_t i = 0; i < frames.size(); i += static_cast<size_t>(params.stride)) {
        sampled.push_back(&frames[i]);
    }
    if (sampled.size() < 2) {
        throw UsageError("register_sequence needs at least two sampled frames");
    }
    for (const GrayFrame* f : sampled) {
        check_same_dims(sampled.front()->width, sampled.front()->height, f->width, f->height,
                        "register_sequence");
    }

    int factor = params.downscale;
    if (factor == 0) factor = sampled.front()->width >= kAutoDownscaleWidth ? kAutoDownscaleFactor : 1;

    auto prepare = [&](const GrayFrame& f) {
        GrayFrame g = factor > 1 ? downscale_frame(f, factor) : f;
        if (params.cosine_window) g = apply_raised_cosine(g);
        return g;
    };

    std::vector<DisplacementTable::Pair> pairs;
    pairs.reserve(sampled.size() - 1);
    GrayFrame prev = prepare(*sampled.front());
    for (size_t i = 1; i < sampled.size(); ++i) {
        GrayFrame cur = prepare(*sampled[i]);
        DisplacementTable::Pair pair;
        pair.from = sampled[i - 1]->frame_index;
        pair.to = sampled[i]->frame_index;
        try {
            Displacement d = phase_correlate(prev, cur);
            d.dx *= factor;
            d.dy *= factor;
            pair.d = d;
        } catch (const IndeterminateDisplacementError&) {
            pair.d = Displacement{0.0, 0.0, 0.0};
            pair.unreliable = true;
        }
        if (!pair.unreliable && pair.d.peak_score < params.confidence_floor) {
            // Keep the measured score on record but fall back to stasis.
            pair.d.dx = 0.0;
            pair.d.dy = 0.0;
            pair.unreliable = true;
        }
        pairs.push_back(std::move(pair));
        prev = std::move(cur);
    }
    return DisplacementTable::from_pairs(sampled.front()->frame_index, std::move(pairs));
}

} // namespace skytrack
