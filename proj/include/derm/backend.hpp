#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "derm/colorspace.hpp"
#include "derm/image.hpp"
#include "derm/tensor_io.hpp"

namespace derm {

struct Detection {
    BoundingBox box;
    double score = 0.0;  // confidence in [0,1]
};

// Reference baseline knobs. min_component_fraction drops detector components
// smaller than that share of the image; logistic_gain sharpens the
// segmenter's probabilities around the threshold.
struct BaselineParams {
    double min_component_fraction = 0.001;
    double logistic_gain = 4.0;
};

enum class BackendKind { InProcessBaseline, Subprocess };

using DetectFn = std::function<std::vector<Detection>(const RasterImage&)>;
using InferFn = std::function<ProbabilityMap(const ChannelStack&)>;

// An inference backend: either in-process (the reference baselines, or any
// callable for tests) or an external executable speaking the DST1 file
// protocol. Handles are cheap to copy; each worker thread should own its own
// copy, since the lazy health check is not synchronized.
class BackendHandle {
public:
    static BackendHandle baseline(const BaselineParams& params = {});
    // Child invocation: `<exe> <args...> <workdir>`. timeout_secs <= 0 means
    // use DERM_BACKEND_TIMEOUT_SECS if set, else 60.
    static BackendHandle subprocess(std::string exe,
                                    std::vector<std::string> args = {},
                                    double timeout_secs = 0.0);
    // Arbitrary in-process callables; the test seam.
    static BackendHandle in_process(DetectFn detect, InferFn segment);

    BackendKind kind() const { return kind_; }
    double timeout_secs() const;  // resolved value
    const std::string& exe() const { return exe_; }
    const std::vector<std::string>& args() const { return args_; }

    // Throws BackendError when the descriptor cannot answer (missing or
    // non-executable binary). Also invoked lazily before the first inference.
    void health_check() const;

    std::vector<Detection> detect(const RasterImage& img) const;
    ProbabilityMap segment(const ChannelStack& stack) const;

private:
    BackendHandle() = default;

    BackendKind kind_ = BackendKind::InProcessBaseline;
    BaselineParams params_;
    DetectFn detect_fn_;
    InferFn segment_fn_;
    std::string exe_;
    std::vector<std::string> args_;
    double timeout_secs_ = 0.0;
    mutable bool checked_ = false;
};

inline std::vector<Detection> detect(const RasterImage& img,
                                     const BackendHandle& handle) {
    return handle.detect(img);
}
inline ProbabilityMap segment(const ChannelStack& stack,
                              const BackendHandle& handle) {
    return handle.segment(stack);
}

// Reference baselines, also reachable without a handle.
// Detector: Otsu on 1-V, drop components under min_component_fraction,
// one detection per surviving 4-connected component, score = area fraction,
// sorted by score descending. Constant input yields no detections.
std::vector<Detection> baseline_detector(const RasterImage& img,
                                         const BaselineParams& params = {});
// Segmenter: Otsu on the L plane, p = logistic(gain * (t - v) / stddev).
// Zero variance yields an all-zero map.
ProbabilityMap baseline_segmenter(const ChannelStack& stack,
                                  const BaselineParams& params = {});

// Otsu over a 256-bin histogram of values in [0,1]. Ties in the between-class
// variance argmax are averaged. Empty when fewer than two bins are occupied.
std::optional<double> otsu_threshold(std::span<const float> values);

// One protocol exchange with a subprocess handle: input.dst + request.json
// written to a fresh temp dir, child run, response.json (and output.dst if
// the child wrote one) read back. Semantic validation is the caller's job.
struct SubprocessReply {
    nlohmann::json response;
    std::optional<Tensor> output;
};
SubprocessReply subprocess_roundtrip(const BackendHandle& handle,
                                     const Tensor& input,
                                     const std::string& task);

}  // namespace derm
