#pragma once

#include <array>
#include <span>

#include "derm/image.hpp"

namespace derm {

// 3-channel L,a,b raster (interleaved, unscaled: L in [0,100], a/b roughly
// [-128,127]). Kept separate from RasterImage, whose samples are [0,1].
struct LabImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    LabImage() = default;
    LabImage(int w, int h)
        : width(w), height(h),
          data(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * 3 + c;
    }
    float at(int x, int y, int c) const { return data[index(x, y, c)]; }
};

// How a raw channel was mapped into [0,1]: stored = (raw + offset) / divisor.
struct ChannelScaling {
    const char* name;
    double offset;
    double divisor;
};

// The 8-channel segmenter input, planar storage (channel-major), every
// sample in [0,1]. Channel order: R, G, B, S, V, L/100, (a+128)/255,
// (b+128)/255.
struct ChannelStack {
    static constexpr int kChannels = 8;
    static const std::array<ChannelScaling, kChannels>& scalings();

    int width = 0;
    int height = 0;
    std::vector<float> data;

    ChannelStack() = default;
    ChannelStack(int w, int h)
        : width(w), height(h),
          data(static_cast<std::size_t>(w) * h * kChannels, 0.0f) {}

    std::size_t plane_size() const {
        return static_cast<std::size_t>(width) * height;
    }
    std::span<float> plane(int c) {
        return {data.data() + c * plane_size(), plane_size()};
    }
    std::span<const float> plane(int c) const {
        return {data.data() + c * plane_size(), plane_size()};
    }
    float at(int x, int y, int c) const {
        return data[c * plane_size() + static_cast<std::size_t>(y) * width + x];
    }
    float& at(int x, int y, int c) {
        return data[c * plane_size() + static_cast<std::size_t>(y) * width + x];
    }
};

// Scalar conversions, double precision. Inputs in [0,1].
void rgb_to_hsv_pixel(double r, double g, double b, double& h, double& s,
                      double& v);
void hsv_to_rgb_pixel(double h, double s, double v, double& r, double& g,
                      double& b);
void rgb_to_lab_pixel(double r, double g, double b, double& ll, double& la,
                      double& lb);

// Hexcone HSV. H is stored scaled to [0,1] (degrees/360); S = (max-min)/max
// with S = 0 when max = 0; V = max.
RasterImage srgb_to_hsv(const RasterImage& img);
RasterImage hsv_to_srgb(const RasterImage& hsv);

// sRGB -> XYZ (D65) -> CIELAB. Computed in double, stored in float.
LabImage srgb_to_lab(const RasterImage& img);

// Build the 8-channel stack from a 3-channel sRGB image.
ChannelStack assemble_channels(const RasterImage& img);

}  // namespace derm
