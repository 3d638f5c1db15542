#include "derm/png_io.hpp"

#include <png.h>

#include <bit>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <cstring>
#include <memory>

#include <jpeglib.h>

#include "derm/errors.hpp"

namespace derm {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f)
        throw DataError("cannot open '" + path.string() + "'");
    return f;
}

[[noreturn]] void png_error_fn(png_structp, png_const_charp msg) {
    // Route libpng's longjmp path into our exception type. The struct is
    // cleaned up by the caller's unique owner before the throw unwinds past
    // it, so we throw from here directly.
    throw DataError(std::string("corrupt PNG: ") + msg);
}

void png_warn_fn(png_structp, png_const_charp) {}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

}  // namespace

LoadedPixels load_png(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw DataError("corrupt PNG: bad signature in '" + path.string() + "'");
    std::rewind(f.get());

    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                   png_error_fn, png_warn_fn);
    if (!r.png) throw DataError("libpng init failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw DataError("libpng init failed");

    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);

    const png_uint_32 w = png_get_image_width(r.png, r.info);
    const png_uint_32 h = png_get_image_height(r.png, r.info);
    const int depth = png_get_bit_depth(r.png, r.info);
    const int color = png_get_color_type(r.png, r.info);

    if (color == PNG_COLOR_TYPE_PALETTE)
        throw DataError("unsupported PNG: palette images not accepted ('" +
                        path.string() + "')");
    if (depth != 8 && depth != 16)
        throw DataError("unsupported PNG: bit depth " + std::to_string(depth) +
                        " ('" + path.string() + "')");

    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
    // PNG stores 16-bit samples big-endian; swap so the uint16_t view works.
    if (depth == 16 && std::endian::native == std::endian::little)
        png_set_swap(r.png);
    png_read_update_info(r.png, r.info);

    const int channels = png_get_channels(r.png, r.info);
    if (channels != 1 && channels != 3)
        throw DataError("unsupported PNG: channel count " +
                        std::to_string(channels));

    const std::size_t row_len = static_cast<std::size_t>(w) * channels *
                                (depth == 16 ? 2 : 1);
    std::vector<unsigned char> pixels(row_len * h);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + y * row_len;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);

    const double scale = depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
    const std::size_t n = static_cast<std::size_t>(w) * h * channels;
    std::vector<float> samples(n);
    if (depth == 8) {
        for (std::size_t i = 0; i < n; ++i)
            samples[i] = static_cast<float>(pixels[i] * scale);
    } else {
        const auto* p16 = reinterpret_cast<const std::uint16_t*>(pixels.data());
        for (std::size_t i = 0; i < n; ++i)
            samples[i] = static_cast<float>(p16[i] * scale);
    }

    if (channels == 3) {
        RasterImage img(static_cast<int>(w), static_cast<int>(h), 3,
                        ColorSpace::Srgb);
        img.data = std::move(samples);
        return img;
    }

    // Grayscale: binary when every pixel is 0 or full scale.
    bool binary = true;
    for (float s : samples) {
        if (s != 0.0f && s != 1.0f) {
            binary = false;
            break;
        }
    }
    if (binary) {
        BinaryMask m(static_cast<int>(w), static_cast<int>(h));
        for (std::size_t i = 0; i < n; ++i) m.bits[i] = samples[i] != 0.0f;
        return m;
    }
    RasterImage img(static_cast<int>(w), static_cast<int>(h), 1,
                    ColorSpace::Gray);
    img.data = std::move(samples);
    return img;
}

namespace {

void write_png_gray8(const std::vector<unsigned char>& pixels, int w, int h,
                     int channels, const std::filesystem::path& path) {
    FilePtr f = open_file(path, "wb");
    PngWriter wr;
    wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                     png_error_fn, png_warn_fn);
    if (!wr.png) throw DataError("libpng init failed");
    wr.info = png_create_info_struct(wr.png);
    if (!wr.info) throw DataError("libpng init failed");

    png_init_io(wr.png, f.get());
    const int color =
        channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(wr.png, wr.info, w, h, 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);

    const std::size_t row_len = static_cast<std::size_t>(w) * channels;
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = const_cast<png_bytep>(pixels.data() + y * row_len);
    png_write_image(wr.png, rows.data());
    png_write_end(wr.png, nullptr);
    if (std::fflush(f.get()) != 0)
        throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace

void save_mask_png(const BinaryMask& mask, const std::filesystem::path& path) {
    std::vector<unsigned char> pixels(mask.bits.size());
    for (std::size_t i = 0; i < mask.bits.size(); ++i)
        pixels[i] = mask.bits[i] ? 255 : 0;
    write_png_gray8(pixels, mask.width, mask.height, 1, path);
}

void save_image_png(const RasterImage& img, const std::filesystem::path& path) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("save_image_png: 1 or 3 channels only");
    std::vector<unsigned char> pixels(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const float s = std::clamp(img.data[i], 0.0f, 1.0f);
        pixels[i] = static_cast<unsigned char>(std::lround(s * 255.0));
    }
    write_png_gray8(pixels, img.width, img.height, img.channels, path);
}

namespace {

[[noreturn]] void jpeg_error_exit(j_common_ptr cinfo) {
    char buf[JMSG_LENGTH_MAX];
    (*cinfo->err->format_message)(cinfo, buf);
    throw DataError(std::string("corrupt JPEG: ") + buf);
}

}  // namespace

RasterImage load_jpeg(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");

    jpeg_decompress_struct cinfo{};
    jpeg_error_mgr err{};
    cinfo.err = jpeg_std_error(&err);
    err.error_exit = jpeg_error_exit;

    jpeg_create_decompress(&cinfo);
    struct Guard {
        jpeg_decompress_struct* c;
        ~Guard() { jpeg_destroy_decompress(c); }
    } guard{&cinfo};

    jpeg_stdio_src(&cinfo, f.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    if (cinfo.output_components != 3)
        throw DataError("unsupported JPEG: component count " +
                        std::to_string(cinfo.output_components));

    RasterImage img(w, h, 3, ColorSpace::Srgb);
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    unsigned char* rowp = row.data();
    for (int y = 0; y < h; ++y) {
        jpeg_read_scanlines(&cinfo, &rowp, 1);
        for (std::size_t i = 0; i < row.size(); ++i)
            img.data[static_cast<std::size_t>(y) * w * 3 + i] =
                static_cast<float>(row[i] / 255.0);
    }
    jpeg_finish_decompress(&cinfo);
    return img;
}

RasterImage load_image_any(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == ".jpg" || ext == ".jpeg") return load_jpeg(path);
    LoadedPixels loaded = load_png(path);
    if (auto* img = std::get_if<RasterImage>(&loaded)) return std::move(*img);
    const auto& m = std::get<BinaryMask>(loaded);
    RasterImage img(m.width, m.height, 1, ColorSpace::Gray);
    for (std::size_t i = 0; i < m.bits.size(); ++i)
        img.data[i] = m.bits[i] ? 1.0f : 0.0f;
    return img;
}

BinaryMask load_mask_png(const std::filesystem::path& path) {
    LoadedPixels loaded = load_png(path);
    if (auto* m = std::get_if<BinaryMask>(&loaded)) return std::move(*m);
    throw DataError("'" + path.string() +
                    "' is not a binary mask (found intermediate gray or RGB "
                    "pixel values)");
}

}  // namespace derm
