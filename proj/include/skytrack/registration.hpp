#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "skytrack/geometry.hpp"

namespace skytrack {

/// Single-channel frame with luminance samples in [0,1], row-major.
/// `frame_index` is the frame's ordinal within the source video; it keys the
/// displacement table and must match the numbering used by detection and
/// annotation files.
struct GrayFrame {
    int width = 0;
    int height = 0;
    int frame_index = 0;
    std::vector<float> samples;

    float at(int row, int col) const { return samples[static_cast<size_t>(row) * width + col]; }
    float& at(int row, int col) { return samples[static_cast<size_t>(row) * width + col]; }

    /// Zero-filled frame; throws UsageError unless both dimensions are >= 16.
    static GrayFrame create(int width, int height, int frame_index = 0);

    /// Throws UsageError if dimensions or sample count are out of contract.
    void validate() const;
};

/// Full 2-D complex spectrum, row-major; bins[r*width + c] holds the
/// coefficient at vertical frequency r, horizontal frequency c.
struct Spectrum {
    int width = 0;
    int height = 0;
    std::vector<std::complex<double>> bins;

    std::complex<double>& at(int row, int col) { return bins[static_cast<size_t>(row) * width + col]; }
    const std::complex<double>& at(int row, int col) const {
        return bins[static_cast<size_t>(row) * width + col];
    }
};

/// Forward 2-D DFT of a frame (unnormalized, negative-exponent convention).
Spectrum dft2d(const GrayFrame& frame);

/// Normalized cross-power spectrum: element-wise later * conj(earlier)
/// divided by its magnitude. The denominator is clamped below at 1e-12, so
/// null bins map to zero instead of dividing by zero. Every output bin has
/// magnitude <= 1.
Spectrum cross_power_spectrum(const Spectrum& later, const Spectrum& earlier);

/// Peak index decoded to a signed offset: component p maps to p when
/// p <= N/2 and to p - N otherwise (exact N/2 resolves to +N/2).
struct PeakOffset {
    int dy = 0;
    int dx = 0;
};
PeakOffset decode_peak(int row, int col, int height, int width);

/// Inverse-transform surface of the normalized cross-power spectrum plus the
/// decoded peak. `surface` holds the inverse DFT scaled by 1/(width*height);
/// for an ideal circular shift it is a unit delta at the displacement.
struct Correlation {
    int width = 0;
    int height = 0;
    std::vector<std::complex<double>> surface;
    int peak_row = 0;
    int peak_col = 0;
    Displacement displacement;

    const std::complex<double>& at(int row, int col) const {
        return surface[static_cast<size_t>(row) * width + col];
    }
};

/// Phase correlation between two equally sized frames. The returned
/// displacement (dx, dy) is the translation of the scene content from
/// `earlier` to `later`: later(x, y) ~ earlier(x - dx, y - dy).
///
/// peak_score is the fraction of the correlation surface's energy held by the
/// peak cell (1.0 for an ideal shift, ~1/(W*H) for a flat surface).
///
/// Throws UsageError on dimension mismatch and
/// IndeterminateDisplacementError when the cross spectrum vanishes off DC
/// (featureless frames).
Correlation correlate(const GrayFrame& earlier, const GrayFrame& later);
Displacement phase_correlate(const GrayFrame& earlier, const GrayFrame& later);

/// Box-average downscale by an integer factor; trailing rows/columns that do
/// not fill a full box are dropped. Result dimensions must stay >= 16.
GrayFrame downscale_frame(const GrayFrame& frame, int factor);

/// Separable raised-cosine taper, for sequences whose content violates the
/// circular-shift assumption badly enough to matter.
GrayFrame apply_raised_cosine(const GrayFrame& frame);

/// Cumulative per-frame displacements relative to a reference frame, built by
/// chaining pairwise phase correlation results. Entries are keyed by frame
/// ordinal; key order defines the time axis downstream.
class DisplacementTable {
public:
    struct Pair {
        int from = 0;
        int to = 0;
        Displacement d;
        bool unreliable = false;
    };

    /// Builds the cumulative table from a contiguous pairwise chain
    /// (pair k's `to` must equal pair k+1's `from`). The reference entry is
    /// (0,0); cumulative dx/dy are exact sums of the chain, and an entry's
    /// peak_score is the weakest score along its chain.
    static DisplacementTable from_pairs(int reference_index, std::vector<Pair> pairs);

    int reference_index() const { return reference_index_; }
    bool contains(int frame) const;

    /// Cumulative displacement of `frame` relative to the reference.
    /// Throws UsageError when the frame has no entry.
    const Displacement& cumulative(int frame) const;

    /// cumulative(to) - cumulative(from); peak_score is the weaker of the two.
    Displacement delta(int from, int to) const;

    /// Successor of `frame` in key order, or nullopt for the last frame.
    std::optional<int> next_frame(int frame) const;

    /// Frame ordinals in ascending order.
    const std::vector<int>& frames() const { return frames_; }

    /// Whether the chain leading to `frame` includes an unreliable pair.
    bool unreliable(int frame) const;

    /// The pairwise measurements the table was built from, in chain order.
    const std::vector<Pair>& pairs() const { return pairs_; }

private:
    int reference_index_ = 0;
    std::vector<int> frames_;
    std::vector<Displacement> cumulative_;
    std::vector<bool> unreliable_;
    std::vector<Pair> pairs_;

    size_t index_of(int frame) const;
};

struct RegistrationParams {
    /// Keep every stride-th frame of the input sequence before correlating.
    int stride = 1;
    /// Integer box-average factor applied before correlation; measured
    /// displacements are rescaled by the same factor. 0 selects automatically
    /// (4 for frames at least 2048 pixels wide, 1 otherwise).
    int downscale = 0;
    /// Pairs whose peak_score falls below this floor are flagged unreliable
    /// and their displacement replaced by (0,0): a flat surface means
    /// registration failed, and stasis is the least-harm fallback for
    /// near-hovering aerial video.
    double confidence_floor = 0.05;
    /// Apply a raised-cosine taper before the transforms.
    bool cosine_window = false;
};

/// Registers consecutive sampled frames pairwise and chains the results into
/// a cumulative table keyed by the frames' ordinals. Requires at least two
/// sampled frames of uniform dimensions.
DisplacementTable register_sequence(std::span<const GrayFrame> frames,
                                    const RegistrationParams& params = {});

} // namespace skytrack
