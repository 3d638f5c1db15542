#include "derm/colorspace.hpp"

#include <cmath>
#include <stdexcept>

namespace derm {

namespace {

// sRGB primaries and D65 white, CIE 1931 2-degree observer.
constexpr double kRx = 0.64, kRy = 0.33;
constexpr double kGx = 0.30, kGy = 0.60;
constexpr double kBx = 0.15, kBy = 0.06;
constexpr double kWx = 0.3127, kWy = 0.3290;

struct Mat3 {
    double m[3][3];
};

// Solve the 3x3 system A x = b by Gaussian elimination with partial
// pivoting. The system is tiny and well conditioned.
std::array<double, 3> solve3(Mat3 a, std::array<double, 3> b) {
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(a.m[r][col]) > std::abs(a.m[piv][col])) piv = r;
        std::swap(a.m[col], a.m[piv]);
        std::swap(b[col], b[piv]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = a.m[r][col] / a.m[col][col];
            for (int c = col; c < 3; ++c) a.m[r][c] -= f * a.m[col][c];
            b[r] -= f * b[col];
        }
    }
    std::array<double, 3> x{};
    for (int r = 2; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < 3; ++c) s -= a.m[r][c] * x[c];
        x[r] = s / a.m[r][r];
    }
    return x;
}

struct SrgbToXyz {
    Mat3 m;           // linear RGB -> XYZ
    double wx, wy, wz;  // white point, = m * (1,1,1)
};

// Derive the RGB->XYZ matrix from the chromaticities so that (1,1,1) maps
// onto the white point exactly; hard-coding a rounded published matrix
// would leave white a few 1e-5 away from achromatic.
SrgbToXyz make_srgb_to_xyz() {
    const std::array<double, 3> xs{kRx, kGx, kBx};
    const std::array<double, 3> ys{kRy, kGy, kBy};
    Mat3 a;
    for (int i = 0; i < 3; ++i) {
        a.m[0][i] = xs[i] / ys[i];
        a.m[1][i] = 1.0;
        a.m[2][i] = (1.0 - xs[i] - ys[i]) / ys[i];
    }
    const std::array<double, 3> white{kWx / kWy, 1.0,
                                      (1.0 - kWx - kWy) / kWy};
    const std::array<double, 3> s = solve3(a, white);
    SrgbToXyz out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.m.m[r][c] = a.m[r][c] * s[c];
    out.wx = white[0];
    out.wy = white[1];
    out.wz = white[2];
    return out;
}

const SrgbToXyz& srgb_to_xyz() {
    static const SrgbToXyz instance = make_srgb_to_xyz();
    return instance;
}

double srgb_expand(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    constexpr double delta3 = delta * delta * delta;
    if (t > delta3) return std::cbrt(t);
    return t / (3.0 * delta * delta) + 4.0 / 29.0;
}

void require_srgb3(const RasterImage& img, const char* op) {
    if (img.channels != 3)
        throw std::invalid_argument(std::string(op) +
                                    ": expected a 3-channel image");
}

float clamp01(double v) {
    return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

}  // namespace

const std::array<ChannelScaling, ChannelStack::kChannels>&
ChannelStack::scalings() {
    static const std::array<ChannelScaling, kChannels> table{{
        {"R", 0.0, 1.0},
        {"G", 0.0, 1.0},
        {"B", 0.0, 1.0},
        {"S", 0.0, 1.0},
        {"V", 0.0, 1.0},
        {"L", 0.0, 100.0},
        {"a", 128.0, 255.0},
        {"b", 128.0, 255.0},
    }};
    return table;
}

void rgb_to_hsv_pixel(double r, double g, double b, double& h, double& s,
                      double& v) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    v = mx;
    s = mx > 0.0 ? delta / mx : 0.0;
    if (delta <= 0.0) {
        h = 0.0;
        return;
    }
    double hh;
    if (mx == r)
        hh = (g - b) / delta;
    else if (mx == g)
        hh = (b - r) / delta + 2.0;
    else
        hh = (r - g) / delta + 4.0;
    hh /= 6.0;
    if (hh < 0.0) hh += 1.0;
    h = hh;
}

void hsv_to_rgb_pixel(double h, double s, double v, double& r, double& g,
                      double& b) {
    if (s <= 0.0) {
        r = g = b = v;
        return;
    }
    double hh = (h - std::floor(h)) * 6.0;
    const int sector = std::min(5, static_cast<int>(hh));
    const double f = hh - sector;
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

void rgb_to_lab_pixel(double r, double g, double b, double& ll, double& la,
                      double& lb) {
    const SrgbToXyz& cs = srgb_to_xyz();
    const double rl = srgb_expand(r);
    const double gl = srgb_expand(g);
    const double bl = srgb_expand(b);
    const double x = cs.m.m[0][0] * rl + cs.m.m[0][1] * gl + cs.m.m[0][2] * bl;
    const double y = cs.m.m[1][0] * rl + cs.m.m[1][1] * gl + cs.m.m[1][2] * bl;
    const double z = cs.m.m[2][0] * rl + cs.m.m[2][1] * gl + cs.m.m[2][2] * bl;
    const double fx = lab_f(x / cs.wx);
    const double fy = lab_f(y / cs.wy);
    const double fz = lab_f(z / cs.wz);
    ll = 116.0 * fy - 16.0;
    la = 500.0 * (fx - fy);
    lb = 200.0 * (fy - fz);
}

RasterImage srgb_to_hsv(const RasterImage& img) {
    require_srgb3(img, "srgb_to_hsv");
    RasterImage out(img.width, img.height, 3, ColorSpace::MultiChannel);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        double h, s, v;
        rgb_to_hsv_pixel(img.data[i * 3], img.data[i * 3 + 1],
                         img.data[i * 3 + 2], h, s, v);
        out.data[i * 3] = static_cast<float>(h);
        out.data[i * 3 + 1] = static_cast<float>(s);
        out.data[i * 3 + 2] = static_cast<float>(v);
    }
    return out;
}

RasterImage hsv_to_srgb(const RasterImage& hsv) {
    require_srgb3(hsv, "hsv_to_srgb");
    RasterImage out(hsv.width, hsv.height, 3, ColorSpace::Srgb);
    const std::size_t n = hsv.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        double r, g, b;
        hsv_to_rgb_pixel(hsv.data[i * 3], hsv.data[i * 3 + 1],
                         hsv.data[i * 3 + 2], r, g, b);
        out.data[i * 3] = clamp01(r);
        out.data[i * 3 + 1] = clamp01(g);
        out.data[i * 3 + 2] = clamp01(b);
    }
    return out;
}

LabImage srgb_to_lab(const RasterImage& img) {
    require_srgb3(img, "srgb_to_lab");
    LabImage out(img.width, img.height);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        double ll, la, lb;
        rgb_to_lab_pixel(img.data[i * 3], img.data[i * 3 + 1],
                         img.data[i * 3 + 2], ll, la, lb);
        out.data[i * 3] = static_cast<float>(ll);
        out.data[i * 3 + 1] = static_cast<float>(la);
        out.data[i * 3 + 2] = static_cast<float>(lb);
    }
    return out;
}

ChannelStack assemble_channels(const RasterImage& img) {
    require_srgb3(img, "assemble_channels");
    ChannelStack stack(img.width, img.height);
    const std::size_t n = img.pixel_count();
    float* planes[ChannelStack::kChannels];
    for (int c = 0; c < ChannelStack::kChannels; ++c)
        planes[c] = stack.plane(c).data();
    for (std::size_t i = 0; i < n; ++i) {
        const double r = img.data[i * 3];
        const double g = img.data[i * 3 + 1];
        const double b = img.data[i * 3 + 2];
        double h, s, v, ll, la, lb;
        rgb_to_hsv_pixel(r, g, b, h, s, v);
        rgb_to_lab_pixel(r, g, b, ll, la, lb);
        planes[0][i] = clamp01(r);
        planes[1][i] = clamp01(g);
        planes[2][i] = clamp01(b);
        planes[3][i] = clamp01(s);
        planes[4][i] = clamp01(v);
        planes[5][i] = clamp01(ll / 100.0);
        planes[6][i] = clamp01((la + 128.0) / 255.0);
        planes[7][i] = clamp01((lb + 128.0) / 255.0);
    }
    return stack;
}

}  // namespace derm
