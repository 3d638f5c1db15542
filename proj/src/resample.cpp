#include "derm/resample.hpp"

#include <cmath>
#include <stdexcept>

#include "derm/errors.hpp"

namespace derm {

namespace {

// Bilinear resample of one interleaved plane group. Works for any channel
// count; `src` and `dst` are channel-interleaved.
void bilinear_plane(const float* src, int in_w, int in_h, int channels,
                    float* dst, int out_w, int out_h) {
    const double sx = static_cast<double>(in_w) / out_w;
    const double sy = static_cast<double>(in_h) / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        const double fy = (oy + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        int y1 = y0 + 1;
        y0 = std::clamp(y0, 0, in_h - 1);
        y1 = std::clamp(y1, 0, in_h - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = (ox + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            int x1 = x0 + 1;
            x0 = std::clamp(x0, 0, in_w - 1);
            x1 = std::clamp(x1, 0, in_w - 1);
            const float* r0 = src + (static_cast<std::size_t>(y0) * in_w) * channels;
            const float* r1 = src + (static_cast<std::size_t>(y1) * in_w) * channels;
            float* out = dst + (static_cast<std::size_t>(oy) * out_w + ox) * channels;
            for (int c = 0; c < channels; ++c) {
                const double v00 = r0[static_cast<std::size_t>(x0) * channels + c];
                const double v01 = r0[static_cast<std::size_t>(x1) * channels + c];
                const double v10 = r1[static_cast<std::size_t>(x0) * channels + c];
                const double v11 = r1[static_cast<std::size_t>(x1) * channels + c];
                const double top = v00 + (v01 - v00) * wx;
                const double bot = v10 + (v11 - v10) * wx;
                out[c] = static_cast<float>(top + (bot - top) * wy);
            }
        }
    }
}

void check_out_dims(int out_w, int out_h) {
    if (out_w < 1 || out_h < 1)
        throw std::invalid_argument("resize: output dimensions must be >= 1");
}

BoundingBox clamp_nonempty(const BoundingBox& box, int w, int h) {
    const BoundingBox b = box.clamped(w, h);
    if (!b.valid())
        throw DataError("crop: box has zero area after clamping to image");
    return b;
}

}  // namespace

RasterImage resize_bilinear(const RasterImage& img, int out_w, int out_h) {
    check_out_dims(out_w, out_h);
    if (img.width == out_w && img.height == out_h) return img;
    RasterImage out(out_w, out_h, img.channels, img.space);
    bilinear_plane(img.data.data(), img.width, img.height, img.channels,
                   out.data.data(), out_w, out_h);
    return out;
}

ProbabilityMap resize_bilinear(const ProbabilityMap& map, int out_w, int out_h) {
    check_out_dims(out_w, out_h);
    if (map.width == out_w && map.height == out_h) return map;
    ProbabilityMap out(out_w, out_h);
    bilinear_plane(map.values.data(), map.width, map.height, 1,
                   out.values.data(), out_w, out_h);
    return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int out_w, int out_h) {
    check_out_dims(out_w, out_h);
    if (mask.width == out_w && mask.height == out_h) return mask;
    BinaryMask out(out_w, out_h);
    const double sx = static_cast<double>(mask.width) / out_w;
    const double sy = static_cast<double>(mask.height) / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        const int y = std::clamp(
            static_cast<int>(std::floor((oy + 0.5) * sy - 0.5 + 0.5)), 0,
            mask.height - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const int x = std::clamp(
                static_cast<int>(std::floor((ox + 0.5) * sx - 0.5 + 0.5)), 0,
                mask.width - 1);
            out.bits[out.index(ox, oy)] = mask.bits[mask.index(x, y)];
        }
    }
    return out;
}

RasterImage crop(const RasterImage& img, const BoundingBox& box) {
    const BoundingBox b = clamp_nonempty(box, img.width, img.height);
    RasterImage out(b.width(), b.height(), img.channels, img.space);
    const std::size_t row_len =
        static_cast<std::size_t>(b.width()) * img.channels;
    for (int y = 0; y < b.height(); ++y) {
        const float* src = img.data.data() + img.index(b.x0, b.y0 + y, 0);
        std::copy(src, src + row_len, out.data.data() + out.index(0, y, 0));
    }
    return out;
}

ProbabilityMap crop(const ProbabilityMap& map, const BoundingBox& box) {
    const BoundingBox b = clamp_nonempty(box, map.width, map.height);
    ProbabilityMap out(b.width(), b.height());
    for (int y = 0; y < b.height(); ++y) {
        const float* src = map.values.data() + map.index(b.x0, b.y0 + y);
        std::copy(src, src + b.width(), out.values.data() + out.index(0, y));
    }
    return out;
}

BinaryMask crop(const BinaryMask& mask, const BoundingBox& box) {
    const BoundingBox b = clamp_nonempty(box, mask.width, mask.height);
    BinaryMask out(b.width(), b.height());
    for (int y = 0; y < b.height(); ++y) {
        const std::uint8_t* src = mask.bits.data() + mask.index(b.x0, b.y0 + y);
        std::copy(src, src + b.width(), out.bits.data() + out.index(0, y));
    }
    return out;
}

ProbabilityMap paste_back(const ProbabilityMap& prob, const BoundingBox& box,
                          int full_w, int full_h) {
    if (full_w < 1 || full_h < 1)
        throw std::invalid_argument("paste_back: bad canvas dimensions");
    const BoundingBox b = box.clamped(full_w, full_h);
    if (!b.valid())
        throw DataError("paste_back: box has zero area after clamping");
    const ProbabilityMap scaled = resize_bilinear(prob, b.width(), b.height());
    ProbabilityMap out(full_w, full_h, 0.0f);
    for (int y = 0; y < b.height(); ++y) {
        const float* src = scaled.values.data() + scaled.index(0, y);
        std::copy(src, src + b.width(),
                  out.values.data() + out.index(b.x0, b.y0 + y));
    }
    return out;
}

}  // namespace derm
