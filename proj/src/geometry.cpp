#include "skytrack/geometry.hpp"

namespace skytrack {

double intersection_area(const BBox& a, const BBox& b) {
    double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    return iw * ih;
}

double iou(const BBox& a, const BBox& b) {
    double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    return inter / (a.area() + b.area() - inter);
}

BBox translate(const BBox& b, double dx, double dy) {
    return BBox{b.x + dx, b.y + dy, b.w, b.h};
}

BBox translate(const BBox& b, const Displacement& d) {
    return translate(b, d.dx, d.dy);
}

} // namespace skytrack
