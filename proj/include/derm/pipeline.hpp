#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "derm/augment.hpp"
#include "derm/backend.hpp"
#include "derm/colorspace.hpp"
#include "derm/image.hpp"
#include "derm/metrics.hpp"
#include "derm/rng.hpp"

namespace derm {

struct PipelineConfig {
    int input_size = 512;
    double inference_expansion = 1.0;
    bool tta = true;
    double binarize_threshold = 0.5;
    bool fallback_whole_image = true;
    std::uint64_t seed = 0;

    void validate() const;
};

struct RunImageResult {
    BinaryMask mask;       // full input resolution
    BoundingBox used_box;  // expanded, clamped detection (or whole image)
    bool no_detection = false;
};

// Detect, take the top-score box, expand and clamp it, crop, normalize to
// input_size^2, assemble the 8 channels, segment (TTA-averaged unless
// disabled), paste back, binarize. `img` must be 3-channel sRGB.
RunImageResult run_image(const RasterImage& img, const BackendHandle& detector,
                         const BackendHandle& segmenter,
                         const PipelineConfig& cfg);

struct DatasetEntry {
    std::string id;
    std::filesystem::path image;
    std::optional<std::filesystem::path> truth;
};

// `dir/images/<id>.(png|jpg|jpeg)` plus optional
// `dir/masks/<id>_segmentation.png`, sorted by id.
std::vector<DatasetEntry> enumerate_dataset(const std::filesystem::path& dir);

struct ImageFailure {
    std::string id;
    std::string message;
};

struct DatasetRunReport {
    std::optional<ScoreReport> scores;      // present when any pair was scored
    std::vector<std::string> missing_truth;  // ids without a ground-truth mask
    std::vector<ImageFailure> failures;
    std::size_t images_processed = 0;
};

// Run every image, writing `<id>_segmentation.png` into out_dir. Per-image
// failures are recorded and the batch continues. Output is byte-identical
// for any worker count; workers <= 0 uses the hardware thread count.
DatasetRunReport run_dataset(const std::filesystem::path& dataset_dir,
                             const BackendHandle& detector,
                             const BackendHandle& segmenter,
                             const PipelineConfig& cfg,
                             const std::filesystem::path& out_dir,
                             int workers = 0);

// One training sample: expand the ground-truth box by a random factor pair,
// crop image and mask, normalize both, assemble channels.
std::pair<ChannelStack, BinaryMask> training_crop_sampler(
    const RasterImage& img, const BinaryMask& mask, const BoundingBox& gt_box,
    const ExpansionRange& range, SeededRng& rng, int input_size = 512);

// Grayscale inputs replicate to three channels; 3-channel inputs pass
// through unchanged.
RasterImage ensure_rgb(RasterImage img);

}  // namespace derm
