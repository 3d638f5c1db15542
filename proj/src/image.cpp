#include "derm/image.hpp"

#include <cmath>
#include <stdexcept>

namespace derm {

RasterImage::RasterImage(int w, int h, int c, ColorSpace s, float fill)
    : width(w), height(h), channels(c), space(s) {
    if (w < 1 || h < 1 || c < 1 || c > 8)
        throw std::invalid_argument("RasterImage: bad dimensions");
    data.assign(static_cast<std::size_t>(w) * h * c, fill);
}

BinaryMask::BinaryMask(int w, int h, bool fill) : width(w), height(h) {
    if (w < 1 || h < 1) throw std::invalid_argument("BinaryMask: bad dimensions");
    bits.assign(static_cast<std::size_t>(w) * h, fill ? 1 : 0);
}

ProbabilityMap::ProbabilityMap(int w, int h, float fill)
    : width(w), height(h) {
    if (w < 1 || h < 1)
        throw std::invalid_argument("ProbabilityMap: bad dimensions");
    values.assign(static_cast<std::size_t>(w) * h, fill);
}

BoundingBox BoundingBox::clamped(int w, int h) const {
    BoundingBox b;
    b.x0 = std::max(0, x0);
    b.y0 = std::max(0, y0);
    b.x1 = std::min(w, x1);
    b.y1 = std::min(h, y1);
    return b;
}

BoundingBox BoundingBox::scaled_about_center(double fx, double fy) const {
    const double cx = 0.5 * (x0 + x1);
    const double cy = 0.5 * (y0 + y1);
    const int nw = std::max(1, static_cast<int>(std::llround(width() * fx)));
    const int nh = std::max(1, static_cast<int>(std::llround(height() * fy)));
    BoundingBox b;
    b.x0 = static_cast<int>(std::llround(cx - 0.5 * nw));
    b.y0 = static_cast<int>(std::llround(cy - 0.5 * nh));
    b.x1 = b.x0 + nw;
    b.y1 = b.y0 + nh;
    return b;
}

BinaryMask threshold_map(const ProbabilityMap& p, double threshold) {
    BinaryMask m(p.width, p.height);
    for (std::size_t i = 0; i < p.values.size(); ++i)
        m.bits[i] = p.values[i] >= threshold ? 1 : 0;
    return m;
}

ProbabilityMap mask_to_map(const BinaryMask& m) {
    ProbabilityMap p(m.width, m.height);
    for (std::size_t i = 0; i < m.bits.size(); ++i)
        p.values[i] = m.bits[i] ? 1.0f : 0.0f;
    return p;
}

std::optional<BoundingBox> mask_bbox(const BinaryMask& m) {
    int minx = m.width, miny = m.height, maxx = -1, maxy = -1;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            minx = std::min(minx, x);
            miny = std::min(miny, y);
            maxx = std::max(maxx, x);
            maxy = std::max(maxy, y);
        }
    }
    if (maxx < 0) return std::nullopt;
    return BoundingBox{minx, miny, maxx + 1, maxy + 1};
}

}  // namespace derm
