#include "derm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <stdexcept>
#include <thread>

#include "derm/errors.hpp"
#include "derm/png_io.hpp"
#include "derm/resample.hpp"
#include "derm/tta.hpp"

namespace derm {

namespace fs = std::filesystem;

void PipelineConfig::validate() const {
    if (input_size < 32)
        throw std::invalid_argument("pipeline: input_size must be >= 32");
    if (!(inference_expansion > 0.0 && inference_expansion <= 2.0))
        throw std::invalid_argument(
            "pipeline: inference_expansion must be in (0, 2]");
    if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0))
        throw std::invalid_argument(
            "pipeline: binarize_threshold must be in (0, 1)");
}

RasterImage ensure_rgb(RasterImage img) {
    if (img.channels == 3) {
        img.space = ColorSpace::Srgb;
        return img;
    }
    if (img.channels != 1)
        throw DataError("expected a 1- or 3-channel image");
    RasterImage rgb(img.width, img.height, 3, ColorSpace::Srgb);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const float v = img.data[i];
        rgb.data[i * 3 + 0] = v;
        rgb.data[i * 3 + 1] = v;
        rgb.data[i * 3 + 2] = v;
    }
    return rgb;
}

RunImageResult run_image(const RasterImage& img, const BackendHandle& detector,
                         const BackendHandle& segmenter,
                         const PipelineConfig& cfg) {
    cfg.validate();
    if (img.channels != 3 || img.space != ColorSpace::Srgb)
        throw DataError("run_image: input must be a 3-channel sRGB image");

    RunImageResult result;
    const BoundingBox whole{0, 0, img.width, img.height};

    std::vector<Detection> detections;
    try {
        detections = detector.detect(img);
    } catch (const BackendError& e) {
        throw BackendError(std::string("detection stage: ") + e.what());
    }

    BoundingBox box = whole;
    if (detections.empty()) {
        result.no_detection = true;
        if (!cfg.fallback_whole_image) {
            result.mask = BinaryMask(img.width, img.height, false);
            result.used_box = whole;
            return result;
        }
    } else {
        box = detections.front()
                  .box.scaled_about_center(cfg.inference_expansion,
                                           cfg.inference_expansion)
                  .clamped(img.width, img.height);
        if (!box.valid())
            throw BackendError(
                "detection stage: top box lies outside the image");
    }
    result.used_box = box;

    const RasterImage cropped = crop(img, box);
    const RasterImage normalized =
        resize_bilinear(cropped, cfg.input_size, cfg.input_size);
    const ChannelStack stack = assemble_channels(normalized);

    ProbabilityMap prob;
    try {
        if (cfg.tta) {
            prob = tta_segment(stack, [&](const ChannelStack& s) {
                return segmenter.segment(s);
            });
        } else {
            prob = segmenter.segment(stack);
        }
    } catch (const BackendError& e) {
        throw BackendError(std::string("segmentation stage: ") + e.what());
    }

    const ProbabilityMap canvas = paste_back(prob, box, img.width, img.height);
    result.mask = threshold_map(canvas, cfg.binarize_threshold);
    return result;
}

std::vector<DatasetEntry> enumerate_dataset(const fs::path& dir) {
    const fs::path images = dir / "images";
    if (!fs::is_directory(images))
        throw DataError("dataset: missing images directory under " +
                        dir.string());

    std::vector<DatasetEntry> entries;
    for (const auto& item : fs::directory_iterator(images)) {
        if (!item.is_regular_file()) continue;
        std::string ext = item.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext != ".png" && ext != ".jpg" && ext != ".jpeg") continue;
        DatasetEntry e;
        e.id = item.path().stem().string();
        e.image = item.path();
        const fs::path truth = dir / "masks" / (e.id + "_segmentation.png");
        if (fs::is_regular_file(truth)) e.truth = truth;
        entries.push_back(std::move(e));
    }
    if (entries.empty())
        throw DataError("dataset: no images found under " + images.string());
    std::sort(entries.begin(), entries.end(),
              [](const DatasetEntry& a, const DatasetEntry& b) {
                  return a.id < b.id;
              });
    return entries;
}

namespace {

struct EntryOutcome {
    std::optional<ScoredPair> pair;
    bool missing_truth = false;
    std::optional<std::string> failure;
};

EntryOutcome process_entry(const DatasetEntry& entry,
                           const BackendHandle& detector,
                           const BackendHandle& segmenter,
                           const PipelineConfig& cfg,
                           const fs::path& out_dir) {
    EntryOutcome outcome;
    try {
        const RasterImage img = ensure_rgb(load_image_any(entry.image));
        RunImageResult run = run_image(img, detector, segmenter, cfg);
        save_mask_png(run.mask, out_dir / (entry.id + "_segmentation.png"));
        if (entry.truth) {
            ScoredPair pair;
            pair.id = entry.id;
            pair.truth = load_mask_png(*entry.truth);
            pair.predicted = std::move(run.mask);
            outcome.pair = std::move(pair);
        } else {
            outcome.missing_truth = true;
        }
    } catch (const std::exception& e) {
        outcome.failure = e.what();
    }
    return outcome;
}

}  // namespace

DatasetRunReport run_dataset(const fs::path& dataset_dir,
                             const BackendHandle& detector,
                             const BackendHandle& segmenter,
                             const PipelineConfig& cfg, const fs::path& out_dir,
                             int workers) {
    cfg.validate();
    const std::vector<DatasetEntry> entries = enumerate_dataset(dataset_dir);
    fs::create_directories(out_dir);

    if (workers <= 0)
        workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<int>(workers, static_cast<int>(entries.size()));

    // Work is claimed by index; outcomes land in per-entry slots, so the
    // merged report does not depend on the worker count.
    std::vector<EntryOutcome> outcomes(entries.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        const BackendHandle det = detector;  // per-worker copies
        const BackendHandle seg = segmenter;
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= entries.size()) return;
            outcomes[i] = process_entry(entries[i], det, seg, cfg, out_dir);
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }

    DatasetRunReport report;
    report.images_processed = entries.size();
    std::vector<ScoredPair> pairs;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        EntryOutcome& o = outcomes[i];
        if (o.failure) {
            report.failures.push_back({entries[i].id, *o.failure});
        } else if (o.missing_truth) {
            report.missing_truth.push_back(entries[i].id);
        } else if (o.pair) {
            pairs.push_back(std::move(*o.pair));
        }
    }
    if (!pairs.empty()) report.scores = aggregate(pairs);
    return report;
}

std::pair<ChannelStack, BinaryMask> training_crop_sampler(
    const RasterImage& img, const BinaryMask& mask, const BoundingBox& gt_box,
    const ExpansionRange& range, SeededRng& rng, int input_size) {
    if (img.width != mask.width || img.height != mask.height)
        throw std::invalid_argument(
            "training_crop_sampler: image/mask dimension mismatch");
    if (img.channels != 3 || img.space != ColorSpace::Srgb)
        throw DataError(
            "training_crop_sampler: input must be a 3-channel sRGB image");
    if (input_size < 32)
        throw std::invalid_argument(
            "training_crop_sampler: input_size must be >= 32");

    const BoundingBox box =
        expand_bbox(gt_box, range, rng, img.width, img.height);
    const RasterImage img_crop =
        resize_bilinear(crop(img, box), input_size, input_size);
    const BinaryMask mask_crop =
        resize_nearest(crop(mask, box), input_size, input_size);
    return {assemble_channels(img_crop), mask_crop};
}

}  // namespace derm
