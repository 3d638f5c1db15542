#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace derm::testsupport {

// 16-bit grayscale PNG writer, for exercising the 16-bit read path (the
// library itself only writes 8-bit).
void write_png_gray16(const std::filesystem::path& path,
                      const std::vector<std::uint16_t>& pixels, int w, int h);

}  // namespace derm::testsupport
