#pragma once

#include "derm/image.hpp"

namespace derm {

// Half-pixel-center convention throughout: the source coordinate of output
// pixel i is (i + 0.5) * in/out - 0.5. Bilinear taps are clamped to the
// image edges. Resizing to the identical size reproduces the input
// bit-exactly.

RasterImage resize_bilinear(const RasterImage& img, int out_w, int out_h);
ProbabilityMap resize_bilinear(const ProbabilityMap& map, int out_w, int out_h);

// Nearest-neighbor with half-pixel centers; output stays strictly binary.
BinaryMask resize_nearest(const BinaryMask& mask, int out_w, int out_h);

// Copy the boxed region. The box is clamped to the image first; a box that
// is empty after clamping is an error.
RasterImage crop(const RasterImage& img, const BoundingBox& box);
ProbabilityMap crop(const ProbabilityMap& map, const BoundingBox& box);
BinaryMask crop(const BinaryMask& mask, const BoundingBox& box);

// Resize `prob` to the (clamped) box dimensions and write it into a
// zero-initialized full_w x full_h canvas at the box position.
ProbabilityMap paste_back(const ProbabilityMap& prob, const BoundingBox& box,
                          int full_w, int full_h);

}  // namespace derm
