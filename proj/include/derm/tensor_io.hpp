#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "derm/colorspace.hpp"
#include "derm/image.hpp"

namespace derm {

// On-disk tensor: magic "DST1", then u32 ndim, then ndim u32 dims, then the
// row-major float32 payload. Every integer and float is little-endian
// regardless of host byte order.
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;

    std::size_t element_count() const;
};

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& tensor);

// Channel stacks are stored C x H x W (planar, matching ChannelStack memory),
// probability maps H x W, raster images C x H x W (planarized).
Tensor to_tensor(const ChannelStack& stack);
Tensor to_tensor(const ProbabilityMap& map);
Tensor to_tensor(const RasterImage& img);
ChannelStack stack_from_tensor(const Tensor& tensor);
ProbabilityMap map_from_tensor(const Tensor& tensor);
RasterImage raster_from_tensor(const Tensor& tensor, ColorSpace space);

}  // namespace derm
