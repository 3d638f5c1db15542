#include "derm/tensor_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>
#include <string>

#include "derm/errors.hpp"

namespace derm {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'T', '1'};
constexpr std::uint32_t kMaxNdim = 8;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

[[noreturn]] void fail(const std::filesystem::path& path, const char* what) {
    throw DataError("tensor file '" + path.string() + "': " + what);
}

}  // namespace

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

Tensor read_tensor(const std::filesystem::path& path) {
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f) fail(path, "cannot open");

    unsigned char header[8];
    if (std::fread(header, 1, 8, f.get()) != 8) fail(path, "truncated header");
    if (std::memcmp(header, kMagic, 4) != 0) fail(path, "bad magic");
    const std::uint32_t ndim = get_u32(header + 4);
    if (ndim == 0 || ndim > kMaxNdim) fail(path, "unreasonable ndim");

    Tensor t;
    t.dims.resize(ndim);
    std::vector<unsigned char> raw(static_cast<std::size_t>(ndim) * 4);
    if (std::fread(raw.data(), 1, raw.size(), f.get()) != raw.size())
        fail(path, "truncated dims");
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
        t.dims[i] = get_u32(raw.data() + i * 4);
        if (t.dims[i] == 0) fail(path, "zero dimension");
        if (count > std::numeric_limits<std::size_t>::max() / t.dims[i])
            fail(path, "dimension overflow");
        count *= t.dims[i];
    }
    if (count > (1u << 28)) fail(path, "payload too large");

    raw.resize(count * 4);
    if (std::fread(raw.data(), 1, raw.size(), f.get()) != raw.size())
        fail(path, "truncated payload");
    unsigned char extra;
    if (std::fread(&extra, 1, 1, f.get()) == 1) fail(path, "trailing bytes");

    t.values.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        t.values[i] = std::bit_cast<float>(get_u32(raw.data() + i * 4));
    return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
    if (tensor.dims.empty() || tensor.dims.size() > kMaxNdim)
        throw std::invalid_argument("write_tensor: bad ndim");
    if (tensor.element_count() != tensor.values.size())
        throw std::invalid_argument(
            "write_tensor: dims do not match value count");

    std::vector<unsigned char> out;
    out.reserve(8 + tensor.dims.size() * 4 + tensor.values.size() * 4);
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
    for (std::uint32_t d : tensor.dims) put_u32(out, d);
    for (float v : tensor.values) put_u32(out, std::bit_cast<std::uint32_t>(v));

    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f) fail(path, "cannot open for writing");
    if (std::fwrite(out.data(), 1, out.size(), f.get()) != out.size())
        fail(path, "short write");
    if (std::fflush(f.get()) != 0) fail(path, "flush failed");
}

Tensor to_tensor(const ChannelStack& stack) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(ChannelStack::kChannels),
              static_cast<std::uint32_t>(stack.height),
              static_cast<std::uint32_t>(stack.width)};
    t.values = stack.data;
    return t;
}

Tensor to_tensor(const ProbabilityMap& map) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(map.height),
              static_cast<std::uint32_t>(map.width)};
    t.values = map.values;
    return t;
}

Tensor to_tensor(const RasterImage& img) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(img.channels),
              static_cast<std::uint32_t>(img.height),
              static_cast<std::uint32_t>(img.width)};
    t.values.resize(img.data.size());
    const std::size_t plane = img.pixel_count();
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < img.channels; ++c)
            t.values[c * plane + i] = img.data[i * img.channels + c];
    return t;
}

ChannelStack stack_from_tensor(const Tensor& tensor) {
    if (tensor.dims.size() != 3 ||
        tensor.dims[0] != static_cast<std::uint32_t>(ChannelStack::kChannels))
        throw DataError("tensor is not an 8-channel stack");
    ChannelStack s(static_cast<int>(tensor.dims[2]),
                   static_cast<int>(tensor.dims[1]));
    s.data = tensor.values;
    return s;
}

ProbabilityMap map_from_tensor(const Tensor& tensor) {
    if (tensor.dims.size() != 2)
        throw DataError("tensor is not a 2-d probability map");
    ProbabilityMap m(static_cast<int>(tensor.dims[1]),
                     static_cast<int>(tensor.dims[0]));
    m.values = tensor.values;
    return m;
}

RasterImage raster_from_tensor(const Tensor& tensor, ColorSpace space) {
    if (tensor.dims.size() != 3 || tensor.dims[0] < 1 || tensor.dims[0] > 8)
        throw DataError("tensor is not a C x H x W raster");
    const int channels = static_cast<int>(tensor.dims[0]);
    RasterImage img(static_cast<int>(tensor.dims[2]),
                    static_cast<int>(tensor.dims[1]), channels, space);
    const std::size_t plane = img.pixel_count();
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < channels; ++c)
            img.data[i * channels + c] = tensor.values[c * plane + i];
    return img;
}

}  // namespace derm
