#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

namespace derm {

enum class ColorSpace : std::uint8_t { Srgb, MultiChannel, Gray };

// W x H x C float raster, row-major, channel-interleaved, samples in [0,1].
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    ColorSpace space = ColorSpace::Srgb;
    std::vector<float> data;

    RasterImage() = default;
    RasterImage(int w, int h, int c, ColorSpace s, float fill = 0.0f);

    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    float at(int x, int y, int c) const { return data[index(x, y, c)]; }
    float& at(int x, int y, int c) { return data[index(x, y, c)]; }

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * height;
    }
};

// W x H boolean mask, row-major.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int w, int h, bool fill = false);

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * width + x;
    }
    bool at(int x, int y) const { return bits[index(x, y)] != 0; }
    void set(int x, int y, bool v) { bits[index(x, y)] = v ? 1 : 0; }

    std::size_t count_true() const {
        return static_cast<std::size_t>(
            std::count(bits.begin(), bits.end(), std::uint8_t{1}));
    }

    bool operator==(const BinaryMask& o) const = default;
};

// W x H per-pixel probabilities in [0,1], row-major.
struct ProbabilityMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    ProbabilityMap() = default;
    ProbabilityMap(int w, int h, float fill = 0.0f);

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * width + x;
    }
    float at(int x, int y) const { return values[index(x, y)]; }
    float& at(int x, int y) { return values[index(x, y)]; }
};

// Axis-aligned pixel rectangle, inclusive top-left, exclusive bottom-right.
struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    long long area() const {
        return static_cast<long long>(width()) * height();
    }
    bool valid() const { return x0 < x1 && y0 < y1; }

    // Intersect with [0,w) x [0,h). May produce an empty (invalid) box.
    BoundingBox clamped(int w, int h) const;

    // Same center, sides scaled by (fx, fy) and rounded; never empty.
    BoundingBox scaled_about_center(double fx, double fy) const;

    bool operator==(const BoundingBox& o) const = default;
};

// Binarize at `threshold` (inclusive).
BinaryMask threshold_map(const ProbabilityMap& p, double threshold);

// 0/1 probability map from a mask.
ProbabilityMap mask_to_map(const BinaryMask& m);

// Tight box around true pixels; nullopt for an all-false mask.
std::optional<BoundingBox> mask_bbox(const BinaryMask& m);

}  // namespace derm
