#pragma once

#include <utility>

#include "derm/image.hpp"
#include "derm/rng.hpp"

namespace derm {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    bool is_identity(double identity_value) const {
        return lo == identity_value && hi == identity_value;
    }
};

// Training-time augmentation parameters. Geometric draws are taken in a
// fixed order (rotation, shear, hflip, vflip, crop fraction, crop x, crop y,
// brightness, saturation) so a seed pins the whole transform.
struct AugmentSpec {
    Range rotation_deg{-45.0, 45.0};
    double hflip_prob = 0.5;
    double vflip_prob = 0.0;
    Range shear_deg{-5.0, 5.0};
    Range jitter_brightness{0.9, 1.1};
    Range jitter_saturation{0.9, 1.1};
    Range crop_fraction{0.9, 1.0};  // retained area

    // No-op spec: all ranges collapsed, probabilities zero.
    static AugmentSpec identity();

    void validate() const;
};

// Per-axis linear scale factors for the randomized bounding-box expansion;
// the default [0.9, 1.1] bounds the retained area to [81%, 121%].
struct ExpansionRange {
    double lo = 0.9;
    double hi = 1.1;

    void validate() const;
};

// Apply one random transform drawn from `spec` to the pair: geometry
// (rotation, shear, flips, crop) hits image and mask identically (bilinear
// for the image, nearest for the mask), and color jitter hits the image
// only. Exposed corners fill with 0 / false.
std::pair<RasterImage, BinaryMask> augment_pair(const RasterImage& img,
                                                const BinaryMask& mask,
                                                const AugmentSpec& spec,
                                                SeededRng& rng);

// Same center, width and height scaled by independent Uniform[lo,hi] draws,
// rounded, clamped to the image, never empty.
BoundingBox expand_bbox(const BoundingBox& box, const ExpansionRange& range,
                        SeededRng& rng, int img_w, int img_h);

struct SampleSummary {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

SampleSummary sample_statistics(const ExpansionRange& range, std::size_t n,
                                SeededRng& rng);

}  // namespace derm
