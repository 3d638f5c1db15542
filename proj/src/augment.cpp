#include "derm/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "derm/colorspace.hpp"

namespace derm {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Row-major 2x3 affine on continuous pixel-center coordinates.
struct Affine {
    double m00 = 1, m01 = 0, m02 = 0;
    double m10 = 0, m11 = 1, m12 = 0;

    void apply(double x, double y, double& ox, double& oy) const {
        ox = m00 * x + m01 * y + m02;
        oy = m10 * x + m11 * y + m12;
    }

    // Composition: (this.then(next))(p) == next(this(p)).
    Affine then(const Affine& n) const {
        Affine r;
        r.m00 = n.m00 * m00 + n.m01 * m10;
        r.m01 = n.m00 * m01 + n.m01 * m11;
        r.m02 = n.m00 * m02 + n.m01 * m12 + n.m02;
        r.m10 = n.m10 * m00 + n.m11 * m10;
        r.m11 = n.m10 * m01 + n.m11 * m11;
        r.m12 = n.m10 * m02 + n.m11 * m12 + n.m12;
        return r;
    }
};

// Snap trig values so that draws of exactly 90/180/270 degrees become exact
// pixel permutations instead of picking up ~1e-16 round-off.
double snap_unit(double v) {
    if (std::abs(v) < 1e-12) return 0.0;
    if (std::abs(v - 1.0) < 1e-12) return 1.0;
    if (std::abs(v + 1.0) < 1e-12) return -1.0;
    return v;
}

Affine rotation_about(double cx, double cy, double deg) {
    const double rad = deg * kPi / 180.0;
    const double c = snap_unit(std::cos(rad));
    const double s = snap_unit(std::sin(rad));
    Affine a;
    a.m00 = c;
    a.m01 = -s;
    a.m02 = cx - c * cx + s * cy;
    a.m10 = s;
    a.m11 = c;
    a.m12 = cy - s * cx - c * cy;
    return a;
}

Affine shear_x_about(double cy, double deg) {
    const double t = std::tan(deg * kPi / 180.0);
    Affine a;
    a.m01 = t;
    a.m02 = -t * cy;
    return a;
}

Affine flip_x_about(double cx) {
    Affine a;
    a.m00 = -1;
    a.m02 = 2.0 * cx;
    return a;
}

Affine flip_y_about(double cy) {
    Affine a;
    a.m11 = -1;
    a.m12 = 2.0 * cy;
    return a;
}

// Bilinear with zero padding; integer-aligned samples copy bit-exactly.
float sample_bilinear_zero(const RasterImage& img, int c, double fx,
                           double fy) {
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const double wx = fx - x0;
    const double wy = fy - y0;
    auto tap = [&](int x, int y) -> double {
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) return 0.0;
        return img.at(x, y, c);
    };
    if (wx == 0.0 && wy == 0.0) {
        if (x0 < 0 || y0 < 0 || x0 >= img.width || y0 >= img.height)
            return 0.0f;
        return img.at(x0, y0, c);
    }
    const double top = tap(x0, y0) + (tap(x0 + 1, y0) - tap(x0, y0)) * wx;
    const double bot =
        tap(x0, y0 + 1) + (tap(x0 + 1, y0 + 1) - tap(x0, y0 + 1)) * wx;
    return static_cast<float>(top + (bot - top) * wy);
}

RasterImage warp_image(const RasterImage& img, const Affine& map) {
    RasterImage out(img.width, img.height, img.channels, img.space);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double fx, fy;
            map.apply(x, y, fx, fy);
            for (int c = 0; c < img.channels; ++c)
                out.at(x, y, c) = sample_bilinear_zero(img, c, fx, fy);
        }
    }
    return out;
}

BinaryMask warp_mask(const BinaryMask& mask, const Affine& map) {
    BinaryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            double fx, fy;
            map.apply(x, y, fx, fy);
            const int xi = static_cast<int>(std::floor(fx + 0.5));
            const int yi = static_cast<int>(std::floor(fy + 0.5));
            const bool v = xi >= 0 && yi >= 0 && xi < mask.width &&
                           yi < mask.height && mask.at(xi, yi);
            out.set(x, y, v);
        }
    }
    return out;
}

void validate_range(const Range& r, const char* name) {
    if (!(r.lo <= r.hi))
        throw std::invalid_argument(std::string("AugmentSpec: ") + name +
                                    " range has lo > hi");
}

}  // namespace

AugmentSpec AugmentSpec::identity() {
    AugmentSpec s;
    s.rotation_deg = {0.0, 0.0};
    s.hflip_prob = 0.0;
    s.vflip_prob = 0.0;
    s.shear_deg = {0.0, 0.0};
    s.jitter_brightness = {1.0, 1.0};
    s.jitter_saturation = {1.0, 1.0};
    s.crop_fraction = {1.0, 1.0};
    return s;
}

void AugmentSpec::validate() const {
    validate_range(rotation_deg, "rotation_deg");
    validate_range(shear_deg, "shear_deg");
    validate_range(jitter_brightness, "jitter_brightness");
    validate_range(jitter_saturation, "jitter_saturation");
    validate_range(crop_fraction, "crop_fraction");
    if (hflip_prob < 0.0 || hflip_prob > 1.0 || vflip_prob < 0.0 ||
        vflip_prob > 1.0)
        throw std::invalid_argument("AugmentSpec: flip probability outside [0,1]");
    if (crop_fraction.lo <= 0.0 || crop_fraction.hi > 1.0)
        throw std::invalid_argument("AugmentSpec: crop_fraction outside (0,1]");
}

void ExpansionRange::validate() const {
    if (!(0.0 < lo && lo <= hi))
        throw std::invalid_argument("ExpansionRange: need 0 < lo <= hi");
}

std::pair<RasterImage, BinaryMask> augment_pair(const RasterImage& img,
                                                const BinaryMask& mask,
                                                const AugmentSpec& spec,
                                                SeededRng& rng) {
    if (img.width != mask.width || img.height != mask.height)
        throw std::invalid_argument("augment_pair: dimension mismatch");
    spec.validate();

    const double rot = rng.uniform(spec.rotation_deg.lo, spec.rotation_deg.hi);
    const double shear = rng.uniform(spec.shear_deg.lo, spec.shear_deg.hi);
    const bool hflip = rng.bernoulli(spec.hflip_prob);
    const bool vflip = rng.bernoulli(spec.vflip_prob);
    const double crop_frac =
        rng.uniform(spec.crop_fraction.lo, spec.crop_fraction.hi);
    const double side = std::sqrt(crop_frac);
    const double cw = img.width * side;
    const double ch = img.height * side;
    const double cx0 = rng.uniform(0.0, img.width - cw);
    const double cy0 = rng.uniform(0.0, img.height - ch);
    const double brightness =
        rng.uniform(spec.jitter_brightness.lo, spec.jitter_brightness.hi);
    const double saturation =
        rng.uniform(spec.jitter_saturation.lo, spec.jitter_saturation.hi);

    const double ccx = (img.width - 1) / 2.0;
    const double ccy = (img.height - 1) / 2.0;

    // Output pixel -> crop window -> inverse of the forward geometry
    // (rotation o shear o flips on the content).
    Affine crop_map;
    crop_map.m00 = cw / img.width;
    crop_map.m02 = cx0 + 0.5 * crop_map.m00 - 0.5;
    crop_map.m11 = ch / img.height;
    crop_map.m12 = cy0 + 0.5 * crop_map.m11 - 0.5;

    Affine to_src = crop_map.then(rotation_about(ccx, ccy, -rot))
                        .then(shear_x_about(ccy, -shear));
    if (vflip) to_src = to_src.then(flip_y_about(ccy));
    if (hflip) to_src = to_src.then(flip_x_about(ccx));

    RasterImage out_img = warp_image(img, to_src);
    BinaryMask out_mask = warp_mask(mask, to_src);

    if ((brightness != 1.0 || saturation != 1.0) && out_img.channels == 3 &&
        out_img.space == ColorSpace::Srgb) {
        RasterImage hsv = srgb_to_hsv(out_img);
        for (std::size_t i = 0; i < hsv.pixel_count(); ++i) {
            hsv.data[i * 3 + 1] = static_cast<float>(
                std::clamp(hsv.data[i * 3 + 1] * saturation, 0.0, 1.0));
            hsv.data[i * 3 + 2] = static_cast<float>(
                std::clamp(hsv.data[i * 3 + 2] * brightness, 0.0, 1.0));
        }
        out_img = hsv_to_srgb(hsv);
    }

    return {std::move(out_img), std::move(out_mask)};
}

BoundingBox expand_bbox(const BoundingBox& box, const ExpansionRange& range,
                        SeededRng& rng, int img_w, int img_h) {
    range.validate();
    if (!box.valid())
        throw std::invalid_argument("expand_bbox: invalid box");
    const double sx = rng.uniform(range.lo, range.hi);
    const double sy = rng.uniform(range.lo, range.hi);
    BoundingBox scaled = box.scaled_about_center(sx, sy);
    BoundingBox clamped = scaled.clamped(img_w, img_h);
    if (!clamped.valid()) {
        clamped = box.clamped(img_w, img_h);
        if (!clamped.valid()) {
            const int px = std::clamp(scaled.x0, 0, img_w - 1);
            const int py = std::clamp(scaled.y0, 0, img_h - 1);
            clamped = BoundingBox{px, py, px + 1, py + 1};
        }
    }
    return clamped;
}

SampleSummary sample_statistics(const ExpansionRange& range, std::size_t n,
                                SeededRng& rng) {
    range.validate();
    if (n < 1) throw std::invalid_argument("sample_statistics: n must be >= 1");
    SampleSummary s;
    s.min = range.hi;
    s.max = range.lo;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = rng.uniform(range.lo, range.hi);
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
        sum += v;
    }
    s.mean = sum / static_cast<double>(n);
    return s;
}

}  // namespace derm
