#include "derm/backend.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>

#include "derm/errors.hpp"

namespace derm {

namespace {

constexpr int kBins = 256;

int bin_of(float v) {
    int b = static_cast<int>(v * kBins);
    return std::clamp(b, 0, kBins - 1);
}

// True when `exe` resolves the way execvp will resolve it.
bool executable_exists(const std::string& exe) {
    namespace fs = std::filesystem;
    auto runnable = [](const fs::path& p) {
        std::error_code ec;
        if (!fs::is_regular_file(p, ec)) return false;
        const auto perms = fs::status(p, ec).permissions();
        return (perms & (fs::perms::owner_exec | fs::perms::group_exec |
                         fs::perms::others_exec)) != fs::perms::none;
    };
    if (exe.find('/') != std::string::npos) return runnable(exe);
    const char* path = std::getenv("PATH");
    if (!path) return false;
    std::string dirs(path);
    std::size_t start = 0;
    while (start <= dirs.size()) {
        const std::size_t end = dirs.find(':', start);
        const std::string dir =
            dirs.substr(start, end == std::string::npos ? end : end - start);
        if (!dir.empty() && runnable(fs::path(dir) / exe)) return true;
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return false;
}

}  // namespace

std::optional<double> otsu_threshold(std::span<const float> values) {
    if (values.empty()) return std::nullopt;
    std::array<std::size_t, kBins> hist{};
    for (float v : values) ++hist[bin_of(v)];

    int occupied = 0;
    for (std::size_t h : hist)
        if (h > 0) ++occupied;
    if (occupied < 2) return std::nullopt;

    const double total = static_cast<double>(values.size());
    double sum_all = 0.0;
    for (int b = 0; b < kBins; ++b) sum_all += b * static_cast<double>(hist[b]);

    // Maximize between-class variance over split "bin <= k vs bin > k";
    // average tied argmaxes so symmetric histograms give the symmetric cut.
    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    long tie_sum = 0, tie_count = 0;
    for (int k = 0; k < kBins - 1; ++k) {
        w0 += static_cast<double>(hist[k]);
        sum0 += k * static_cast<double>(hist[k]);
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0;
        const double m1 = (sum_all - sum0) / w1;
        const double var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (var > best) {
            best = var;
            tie_sum = k;
            tie_count = 1;
        } else if (var == best) {
            tie_sum += k;
            ++tie_count;
        }
    }
    const double k_star =
        static_cast<double>(tie_sum) / static_cast<double>(tie_count);
    return (k_star + 1.0) / kBins;
}

std::vector<Detection> baseline_detector(const RasterImage& img,
                                         const BaselineParams& params) {
    const std::size_t n = img.pixel_count();
    std::vector<float> darkness(n);
    for (std::size_t i = 0; i < n; ++i) {
        float v = 0.0f;
        for (int c = 0; c < img.channels; ++c)
            v = std::max(v, img.data[i * img.channels + c]);
        darkness[i] = 1.0f - v;
    }

    const std::optional<double> t = otsu_threshold(darkness);
    if (!t) return {};

    std::vector<char> fg(n);
    for (std::size_t i = 0; i < n; ++i) fg[i] = darkness[i] >= *t ? 1 : 0;

    // 4-connected components via BFS; drop specks below the area floor.
    const std::size_t min_area = static_cast<std::size_t>(
        std::ceil(params.min_component_fraction * static_cast<double>(n)));
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> queue;
    std::vector<Detection> out;
    for (std::size_t start = 0; start < n; ++start) {
        if (!fg[start] || seen[start]) continue;
        queue.assign(1, start);
        seen[start] = 1;
        std::size_t head = 0;
        int x0 = img.width, y0 = img.height, x1 = -1, y1 = -1;
        while (head < queue.size()) {
            const std::size_t p = queue[head++];
            const int x = static_cast<int>(p % img.width);
            const int y = static_cast<int>(p / img.width);
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
            const std::size_t nbr[4] = {p - 1, p + 1, p - img.width,
                                        p + img.width};
            const bool ok[4] = {x > 0, x + 1 < img.width, y > 0,
                                y + 1 < img.height};
            for (int d = 0; d < 4; ++d) {
                if (!ok[d] || seen[nbr[d]] || !fg[nbr[d]]) continue;
                seen[nbr[d]] = 1;
                queue.push_back(nbr[d]);
            }
        }
        if (queue.size() < min_area) continue;
        Detection det;
        det.box = BoundingBox{x0, y0, x1 + 1, y1 + 1};
        det.score = static_cast<double>(queue.size()) / static_cast<double>(n);
        out.push_back(det);
    }

    std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.box.y0 != b.box.y0) return a.box.y0 < b.box.y0;
        return a.box.x0 < b.box.x0;
    });
    return out;
}

ProbabilityMap baseline_segmenter(const ChannelStack& stack,
                                  const BaselineParams& params) {
    const std::span<const float> lum = stack.plane(5);
    ProbabilityMap out(stack.width, stack.height);

    double mean = 0.0;
    for (float v : lum) mean += v;
    mean /= static_cast<double>(lum.size());
    double var = 0.0;
    for (float v : lum) var += (v - mean) * (v - mean);
    var /= static_cast<double>(lum.size());
    const std::optional<double> t = otsu_threshold(lum);
    if (!t || var <= 0.0) return out;  // degenerate: all zeros

    const double sigma = std::sqrt(var);
    const double gain = params.logistic_gain / sigma;
    for (std::size_t i = 0; i < lum.size(); ++i) {
        const double z = gain * (*t - lum[i]);
        out.values[i] = static_cast<float>(1.0 / (1.0 + std::exp(-z)));
    }
    return out;
}

BackendHandle BackendHandle::baseline(const BaselineParams& params) {
    BackendHandle h;
    h.kind_ = BackendKind::InProcessBaseline;
    h.params_ = params;
    h.detect_fn_ = [params](const RasterImage& img) {
        return baseline_detector(img, params);
    };
    h.segment_fn_ = [params](const ChannelStack& stack) {
        return baseline_segmenter(stack, params);
    };
    return h;
}

BackendHandle BackendHandle::subprocess(std::string exe,
                                        std::vector<std::string> args,
                                        double timeout_secs) {
    BackendHandle h;
    h.kind_ = BackendKind::Subprocess;
    h.exe_ = std::move(exe);
    h.args_ = std::move(args);
    h.timeout_secs_ = timeout_secs;
    return h;
}

BackendHandle BackendHandle::in_process(DetectFn detect, InferFn segment) {
    BackendHandle h;
    h.kind_ = BackendKind::InProcessBaseline;
    h.detect_fn_ = std::move(detect);
    h.segment_fn_ = std::move(segment);
    return h;
}

double BackendHandle::timeout_secs() const {
    if (timeout_secs_ > 0.0) return timeout_secs_;
    if (const char* env = std::getenv("DERM_BACKEND_TIMEOUT_SECS")) {
        char* end = nullptr;
        const double v = std::strtod(env, &end);
        if (end != env && v > 0.0) return v;
    }
    return 60.0;
}

void BackendHandle::health_check() const {
    if (kind_ == BackendKind::Subprocess && !executable_exists(exe_))
        throw BackendError("backend executable not found or not executable: " +
                           exe_);
    checked_ = true;
}

std::vector<Detection> BackendHandle::detect(const RasterImage& img) const {
    if (!checked_) health_check();
    std::vector<Detection> dets;
    if (kind_ == BackendKind::InProcessBaseline) {
        if (!detect_fn_)
            throw BackendError("backend has no detection function");
        dets = detect_fn_(img);
    } else {
        SubprocessReply reply =
            subprocess_roundtrip(*this, to_tensor(img), "detect");
        if (!reply.response.contains("detections") ||
            !reply.response["detections"].is_array())
            throw BackendError(
                "backend response: missing 'detections' array");
        for (const auto& d : reply.response["detections"]) {
            Detection det;
            try {
                det.box = BoundingBox{d.at("x0").get<int>(),
                                      d.at("y0").get<int>(),
                                      d.at("x1").get<int>(),
                                      d.at("y1").get<int>()};
                det.score = d.at("score").get<double>();
            } catch (const nlohmann::json::exception& e) {
                throw BackendError(std::string("backend response: bad "
                                               "detection entry: ") +
                                   e.what());
            }
            dets.push_back(det);
        }
    }
    for (const Detection& d : dets) {
        if (!d.box.valid())
            throw BackendError("backend returned an invalid detection box");
        if (!(d.score >= 0.0 && d.score <= 1.0))
            throw BackendError("backend returned a score outside [0,1]");
    }
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) {
                         return a.score > b.score;
                     });
    return dets;
}

ProbabilityMap BackendHandle::segment(const ChannelStack& stack) const {
    if (!checked_) health_check();
    ProbabilityMap map;
    if (kind_ == BackendKind::InProcessBaseline) {
        if (!segment_fn_)
            throw BackendError("backend has no segmentation function");
        map = segment_fn_(stack);
    } else {
        SubprocessReply reply =
            subprocess_roundtrip(*this, to_tensor(stack), "segment");
        if (!reply.output)
            throw BackendError("backend response: missing output tensor");
        try {
            map = map_from_tensor(*reply.output);
        } catch (const DataError& e) {
            throw BackendError(std::string("backend response: ") + e.what());
        }
    }
    if (map.width != stack.width || map.height != stack.height)
        throw BackendError("backend returned wrong probability-map size");
    for (float v : map.values)
        if (!(v >= 0.0f && v <= 1.0f))
            throw BackendError("backend returned values outside [0,1]");
    return map;
}

}  // namespace derm
