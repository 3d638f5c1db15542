// Command-line front end: dataset splitting, channel preprocessing, the
// detect/segment pipeline, mask evaluation, and augmentation utilities.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "derm/augment.hpp"
#include "derm/backend.hpp"
#include "derm/errors.hpp"
#include "derm/metrics.hpp"
#include "derm/pipeline.hpp"
#include "derm/png_io.hpp"
#include "derm/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace derm;

namespace {

std::vector<std::string> read_id_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open id file: " + path.string());
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
            line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    if (ids.empty()) throw DataError("id file is empty: " + path.string());
    return ids;
}

// "baseline" gives the in-process reference backend; anything else is an
// executable plus arguments, split on spaces.
BackendHandle make_backend(const std::string& descriptor, double timeout) {
    if (descriptor == "baseline") return BackendHandle::baseline();
    std::istringstream ss(descriptor);
    std::string exe;
    ss >> exe;
    if (exe.empty()) throw DataError("empty backend descriptor");
    std::vector<std::string> args;
    std::string a;
    while (ss >> a) args.push_back(a);
    return BackendHandle::subprocess(exe, args, timeout);
}

ExpansionRange parse_range(const std::string& text) {
    const std::size_t colon = text.find(':');
    ExpansionRange r;
    try {
        if (colon == std::string::npos) throw std::invalid_argument("");
        r.lo = std::stod(text.substr(0, colon));
        r.hi = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
        throw std::invalid_argument("range must look like 0.9:1.1, got '" +
                                    text + "'");
    }
    r.validate();
    return r;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) throw DataError("cannot write " + path.string());
}

int cmd_split(const fs::path& ids_path, std::uint64_t seed,
              const fs::path& out_dir) {
    const SplitAssignment split = split_dataset(read_id_file(ids_path), seed);
    fs::create_directories(out_dir);
    write_split(split, out_dir / "train.txt", out_dir / "val.txt");
    std::printf("split %zu ids -> %zu train / %zu val (seed %llu)\n",
                split.train_ids.size() + split.val_ids.size(),
                split.train_ids.size(), split.val_ids.size(),
                static_cast<unsigned long long>(split.seed));
    return 0;
}

int cmd_preprocess(const fs::path& input, const fs::path& dump_dir) {
    const RasterImage img = ensure_rgb(load_image_any(input));
    const ChannelStack stack = assemble_channels(img);
    fs::create_directories(dump_dir);
    const auto& scalings = ChannelStack::scalings();
    for (int c = 0; c < ChannelStack::kChannels; ++c) {
        RasterImage plane(stack.width, stack.height, 1, ColorSpace::Gray);
        const auto src = stack.plane(c);
        std::copy(src.begin(), src.end(), plane.data.begin());
        const std::string name =
            "ch" + std::to_string(c) + "_" + scalings[c].name + ".png";
        save_image_png(plane, dump_dir / name);
    }
    write_tensor(dump_dir / "stack.dst", to_tensor(stack));
    std::printf("wrote 8 channel planes + stack.dst (%dx%d) to %s\n",
                stack.width, stack.height, dump_dir.string().c_str());
    return 0;
}

int cmd_run(const fs::path& dataset, const std::string& detector_desc,
            const std::string& segmenter_desc, const fs::path& out_dir,
            const PipelineConfig& cfg, int workers, double timeout,
            const std::string& report_path, const std::string& csv_path) {
    const BackendHandle detector = make_backend(detector_desc, timeout);
    const BackendHandle segmenter = make_backend(segmenter_desc, timeout);
    detector.health_check();
    segmenter.health_check();

    const DatasetRunReport report =
        run_dataset(dataset, detector, segmenter, cfg, out_dir, workers);

    std::printf("processed %zu images -> %s\n", report.images_processed,
                out_dir.string().c_str());
    for (const std::string& id : report.missing_truth)
        std::printf("  no ground truth for %s\n", id.c_str());
    for (const ImageFailure& f : report.failures)
        std::fprintf(stderr, "  FAILED %s: %s\n", f.id.c_str(),
                     f.message.c_str());
    if (report.scores) {
        std::printf("mean jaccard %.4f, mean thresholded %.4f (%zu below %.2f)\n",
                    report.scores->mean_raw, report.scores->mean_thresholded,
                    report.scores->n_below_threshold,
                    report.scores->threshold);
        if (!report_path.empty())
            write_text(report_path, report_to_json(*report.scores));
        if (!csv_path.empty())
            write_text(csv_path, report_to_csv(*report.scores));
    } else if (!report_path.empty() || !csv_path.empty()) {
        std::fprintf(stderr, "no ground truth was scored; report not written\n");
    }
    return report.failures.empty() ? 0 : 3;
}

int cmd_eval(const fs::path& pred_dir, const fs::path& truth_dir,
             const std::string& report_path, const std::string& csv_path) {
    static const std::string suffix = "_segmentation.png";
    std::vector<ScoredPair> pairs;
    std::vector<fs::path> files;
    for (const auto& item : fs::directory_iterator(pred_dir)) {
        const std::string name = item.path().filename().string();
        if (item.is_regular_file() && name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) ==
                0)
            files.push_back(item.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw DataError("no *_segmentation.png under " + pred_dir.string());
    for (const fs::path& pred : files) {
        const std::string name = pred.filename().string();
        ScoredPair pair;
        pair.id = name.substr(0, name.size() - suffix.size());
        const fs::path truth = truth_dir / name;
        if (!fs::is_regular_file(truth))
            throw DataError("missing ground truth " + truth.string());
        pair.predicted = load_mask_png(pred);
        pair.truth = load_mask_png(truth);
        pairs.push_back(std::move(pair));
    }
    const ScoreReport report = aggregate(pairs);
    if (!report_path.empty()) write_text(report_path, report_to_json(report));
    if (!csv_path.empty()) write_text(csv_path, report_to_csv(report));
    std::printf("%zu masks: mean jaccard %.4f, mean thresholded %.4f (%zu below %.2f)\n",
                report.per_image.size(), report.mean_raw,
                report.mean_thresholded, report.n_below_threshold,
                report.threshold);
    return 0;
}

int cmd_augment_preview(const fs::path& input, const fs::path& mask_path,
                        std::uint64_t seed, int count, const fs::path& out_dir) {
    const RasterImage img = ensure_rgb(load_image_any(input));
    const BinaryMask mask = load_mask_png(mask_path);
    const AugmentSpec spec;  // defaults
    fs::create_directories(out_dir);
    SeededRng root(seed);
    for (int i = 0; i < count; ++i) {
        SeededRng rng = root.split(static_cast<std::uint64_t>(i));
        auto [aug_img, aug_mask] = augment_pair(img, mask, spec, rng);
        save_image_png(aug_img,
                       out_dir / ("aug_" + std::to_string(i) + ".png"));
        save_mask_png(aug_mask,
                      out_dir / ("aug_" + std::to_string(i) + "_mask.png"));
    }
    std::printf("wrote %d augmented pairs to %s\n", count,
                out_dir.string().c_str());
    return 0;
}

int cmd_sample_crops(const fs::path& dataset, const std::string& range_text,
                     std::uint64_t seed, int size, const fs::path& out_dir) {
    const ExpansionRange range = parse_range(range_text);
    const std::vector<DatasetEntry> entries = enumerate_dataset(dataset);
    fs::create_directories(out_dir);
    SeededRng root(seed);
    std::size_t written = 0, skipped = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const DatasetEntry& e = entries[i];
        if (!e.truth) {
            ++skipped;
            continue;
        }
        const RasterImage img = ensure_rgb(load_image_any(e.image));
        const BinaryMask mask = load_mask_png(*e.truth);
        const auto box = mask_bbox(mask);
        if (!box) {
            std::fprintf(stderr, "  %s: empty mask, skipped\n", e.id.c_str());
            ++skipped;
            continue;
        }
        SeededRng rng = root.split(i);
        auto [stack, crop_mask] =
            training_crop_sampler(img, mask, *box, range, rng, size);
        write_tensor(out_dir / (e.id + "_crop.dst"), to_tensor(stack));
        save_mask_png(crop_mask, out_dir / (e.id + "_crop_mask.png"));
        ++written;
    }
    std::printf("wrote %zu crop samples to %s (%zu skipped)\n", written,
                out_dir.string().c_str(), skipped);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage lesion segmentation harness"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Config file (key=value; flags win)");

    // split
    auto* split = app.add_subcommand("split", "Split ids into train/val 10:1");
    std::string split_ids;
    std::uint64_t split_seed = 0;
    std::string split_out = ".";
    split->add_option("--ids", split_ids, "File with one id per line")
        ->required();
    split->add_option("--seed", split_seed, "Shuffle seed")
        ->capture_default_str();
    split->add_option("--out", split_out, "Output directory")
        ->capture_default_str();

    // preprocess
    auto* preprocess =
        app.add_subcommand("preprocess", "Dump the 8 input channels");
    std::string pre_in, pre_dump;
    preprocess->add_option("--in", pre_in, "Input image")->required();
    preprocess
        ->add_option("--dump-channels", pre_dump, "Output directory")
        ->required();

    // run
    auto* run = app.add_subcommand("run", "Segment a dataset");
    std::string run_dataset_dir, run_detector, run_segmenter, run_out;
    std::string run_report, run_csv;
    PipelineConfig cfg;
    int run_workers = 0;
    double run_timeout = 0.0;
    bool no_tta = false, no_fallback = false;
    run->add_option("--dataset", run_dataset_dir,
                    "Dataset dir (images/ + masks/)")
        ->required();
    run->add_option("--detector", run_detector,
                    "'baseline' or backend command line")
        ->required();
    run->add_option("--segmenter", run_segmenter,
                    "'baseline' or backend command line")
        ->required();
    run->add_option("--out", run_out, "Directory for predicted masks")
        ->required();
    run->add_flag("--no-tta", no_tta, "Disable test-time augmentation");
    run->add_option("--expansion", cfg.inference_expansion,
                    "Box expansion factor (0,2]")
        ->capture_default_str();
    run->add_option("--threshold", cfg.binarize_threshold,
                    "Binarization threshold (0,1)")
        ->capture_default_str();
    run->add_option("--input-size", cfg.input_size, "Network input size")
        ->capture_default_str();
    run->add_option("--seed", cfg.seed, "Pipeline seed")->capture_default_str();
    run->add_flag("--no-fallback", no_fallback,
                  "Do not fall back to the whole image when nothing is "
                  "detected");
    run->add_option("--workers", run_workers,
                    "Worker threads (0 = hardware)")
        ->capture_default_str();
    run->add_option("--timeout", run_timeout,
                    "Backend timeout seconds (0 = env or 60)")
        ->capture_default_str();
    run->add_option("--report", run_report, "Write JSON score report here");
    run->add_option("--csv", run_csv, "Write CSV score report here");

    // eval
    auto* eval = app.add_subcommand("eval", "Score predicted masks");
    std::string eval_pred, eval_truth, eval_report, eval_csv;
    eval->add_option("--pred", eval_pred, "Directory of predicted masks")
        ->required();
    eval->add_option("--truth", eval_truth, "Directory of ground-truth masks")
        ->required();
    eval->add_option("--report", eval_report, "Write JSON report here");
    eval->add_option("--csv", eval_csv, "Write CSV report here");

    // augment-preview
    auto* preview =
        app.add_subcommand("augment-preview", "Write augmented samples");
    std::string prev_in, prev_mask, prev_out;
    std::uint64_t prev_seed = 0;
    int prev_count = 4;
    preview->add_option("--in", prev_in, "Input image")->required();
    preview->add_option("--mask", prev_mask, "Input mask")->required();
    preview->add_option("--seed", prev_seed, "Seed")->capture_default_str();
    preview->add_option("--count", prev_count, "Number of samples")
        ->capture_default_str();
    preview->add_option("--out", prev_out, "Output directory")->required();

    // sample-crops
    auto* crops = app.add_subcommand(
        "sample-crops", "Emit training crops with random box expansion");
    std::string crops_dataset, crops_range = "0.9:1.1", crops_out;
    std::uint64_t crops_seed = 0;
    int crops_size = 512;
    crops->add_option("--dataset", crops_dataset,
                      "Dataset dir (images/ + masks/)")
        ->required();
    crops->add_option("--range", crops_range, "Expansion range lo:hi")
        ->capture_default_str();
    crops->add_option("--seed", crops_seed, "Seed")->capture_default_str();
    crops->add_option("--size", crops_size, "Crop output size")
        ->capture_default_str();
    crops->add_option("--out", crops_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Collapse CLI11's per-error codes onto the documented contract:
        // 0 for --help/--version, 1 for any usage mistake.
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*split) return cmd_split(split_ids, split_seed, split_out);
        if (*preprocess) return cmd_preprocess(pre_in, pre_dump);
        if (*run) {
            cfg.tta = !no_tta;
            cfg.fallback_whole_image = !no_fallback;
            cfg.validate();
            return cmd_run(run_dataset_dir, run_detector, run_segmenter,
                           run_out, cfg, run_workers, run_timeout, run_report,
                           run_csv);
        }
        if (*eval) return cmd_eval(eval_pred, eval_truth, eval_report, eval_csv);
        if (*preview)
            return cmd_augment_preview(prev_in, prev_mask, prev_seed,
                                       prev_count, prev_out);
        if (*crops)
            return cmd_sample_crops(crops_dataset, crops_range, crops_seed,
                                    crops_size, crops_out);
    } catch (const BackendError& e) {
        std::fprintf(stderr, "backend error: %s\n", e.what());
        return 3;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid arguments: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
