#pragma once

#include <algorithm>
#include <cmath>

namespace skytrack {

/// Axis-aligned rectangle in pixel coordinates, stored as top-left corner
/// plus extent. Coordinates are real-valued; projected boxes accumulate
/// fractional displacements.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double right() const { return x + w; }
    double bottom() const { return y + h; }
    double area() const { return w * h; }

    bool valid() const {
        return w > 0.0 && h > 0.0 && std::isfinite(x) && std::isfinite(y) &&
               std::isfinite(w) && std::isfinite(h);
    }
};

/// Signed 2-D translation between two frames. `peak_score` is the phase
/// correlation confidence in [0,1]; displacements built by hand default to
/// full confidence.
struct Displacement {
    double dx = 0.0;
    double dy = 0.0;
    double peak_score = 1.0;
};

/// Overlap area of two boxes; zero when disjoint or merely touching.
double intersection_area(const BBox& a, const BBox& b);

/// Intersection over union in [0,1]. Symmetric; 1 for identical boxes.
double iou(const BBox& a, const BBox& b);

BBox translate(const BBox& b, double dx, double dy);
BBox translate(const BBox& b, const Displacement& d);

} // namespace skytrack
