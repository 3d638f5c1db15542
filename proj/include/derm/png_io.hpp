#pragma once

#include <filesystem>
#include <variant>

#include "derm/image.hpp"

namespace derm {

using LoadedPixels = std::variant<RasterImage, BinaryMask>;

// Load an 8- or 16-bit PNG. RGB(A) files yield an Srgb RasterImage with
// samples = stored/255 (or /65535); alpha is dropped. Grayscale files come
// back as a BinaryMask when every pixel is 0 or full-scale, otherwise as a
// Gray RasterImage. Palette images and other bit depths are rejected.
LoadedPixels load_png(const std::filesystem::path& path);

// 8-bit grayscale PNG, true -> 255, false -> 0.
void save_mask_png(const BinaryMask& mask, const std::filesystem::path& path);

// Quantized 8-bit PNG of a raster (grayscale for 1 channel, RGB for 3).
void save_image_png(const RasterImage& img, const std::filesystem::path& path);

// Baseline JPEG decode to an Srgb RasterImage. Decode fidelity follows the
// linked libjpeg; no byte-exactness promise.
RasterImage load_jpeg(const std::filesystem::path& path);

// Dispatch on extension (.png / .jpg / .jpeg), always yielding a raster;
// a PNG that decodes to a mask is widened to a Gray image.
RasterImage load_image_any(const std::filesystem::path& path);

// Load a PNG that must be a strictly binary mask.
BinaryMask load_mask_png(const std::filesystem::path& path);

}  // namespace derm
