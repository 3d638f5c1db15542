#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "derm/errors.hpp"
#include "derm/pipeline.hpp"
#include "derm/png_io.hpp"
#include "derm/resample.hpp"
#include "derm/tta.hpp"
#include "support/synthetic.hpp"
#include "support/tmpdir.hpp"

using namespace derm;
using namespace derm::testsupport;

namespace {

PipelineConfig small_config() {
    PipelineConfig cfg;
    cfg.input_size = 64;
    return cfg;
}

// Writes a little disk dataset: images/<id>.png plus, unless excluded,
// masks/<id>_segmentation.png with the generator truth.
void write_disk_dataset(const std::filesystem::path& root,
                        const std::vector<std::string>& ids,
                        const std::vector<std::string>& skip_truth) {
    std::filesystem::create_directories(root / "images");
    std::filesystem::create_directories(root / "masks");
    int offset = 0;
    for (const std::string& id : ids) {
        const int r = 30 + 4 * offset;
        const int cx = 64 + 3 * offset;
        ++offset;
        const RasterImage img =
            dark_disk_image(128, 128, cx, 64, r, 0.85f, 0.2f);
        save_image_png(img, root / "images" / (id + ".png"));
        if (std::find(skip_truth.begin(), skip_truth.end(), id) ==
            skip_truth.end())
            save_mask_png(disk_mask(128, 128, cx, 64, r),
                          root / "masks" / (id + "_segmentation.png"));
    }
}

std::vector<char> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in),
            std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("ensure_rgb widens grayscale and passes rgb through") {
    RasterImage gray(4, 3, 1, ColorSpace::Gray);
    for (std::size_t i = 0; i < gray.data.size(); ++i)
        gray.data[i] = static_cast<float>(i) / 12.0f;
    const RasterImage rgb = ensure_rgb(gray);
    CHECK(rgb.channels == 3);
    CHECK(rgb.space == ColorSpace::Srgb);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(rgb.at(x, y, c) == gray.at(x, y, 0));

    RasterImage color(4, 3, 3, ColorSpace::Srgb, 0.5f);
    const RasterImage same = ensure_rgb(color);
    CHECK(same.data == color.data);

    RasterImage two(4, 3, 2, ColorSpace::MultiChannel);
    CHECK_THROWS_AS(ensure_rgb(two), DataError);
}

TEST_CASE("pipeline config validation") {
    CHECK_NOTHROW(PipelineConfig{}.validate());

    PipelineConfig c1;
    c1.input_size = 31;
    CHECK_THROWS_AS(c1.validate(), std::invalid_argument);

    PipelineConfig c2;
    c2.inference_expansion = 0.0;
    CHECK_THROWS_AS(c2.validate(), std::invalid_argument);
    c2.inference_expansion = 2.5;
    CHECK_THROWS_AS(c2.validate(), std::invalid_argument);

    PipelineConfig c3;
    c3.binarize_threshold = 0.0;
    CHECK_THROWS_AS(c3.validate(), std::invalid_argument);
    c3.binarize_threshold = 1.0;
    CHECK_THROWS_AS(c3.validate(), std::invalid_argument);
}

TEST_CASE("run_image segments a synthetic lesion well") {
    SeededRng rng(311);
    const SyntheticLesion sample = make_lesion(rng);
    const BackendHandle baseline = BackendHandle::baseline();
    PipelineConfig cfg;  // full 512 path with TTA
    const RunImageResult res =
        run_image(sample.image, baseline, baseline, cfg);

    REQUIRE(res.mask.width == sample.image.width);
    REQUIRE(res.mask.height == sample.image.height);
    CHECK_FALSE(res.no_detection);

    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < res.mask.bits.size(); ++i) {
        const bool a = res.mask.bits[i] != 0;
        const bool b = sample.mask.bits[i] != 0;
        inter += (a && b) ? 1 : 0;
        uni += (a || b) ? 1 : 0;
    }
    REQUIRE(uni > 0);
    const double j = static_cast<double>(inter) / static_cast<double>(uni);
    CHECK(j >= 0.65);
}

TEST_CASE("predicted pixels never escape the inference box") {
    SeededRng rng(313);
    const SyntheticLesion sample = make_lesion(rng);
    const BackendHandle baseline = BackendHandle::baseline();
    PipelineConfig cfg = small_config();
    cfg.inference_expansion = 1.1;
    const RunImageResult res =
        run_image(sample.image, baseline, baseline, cfg);
    for (int y = 0; y < res.mask.height; ++y)
        for (int x = 0; x < res.mask.width; ++x)
            if (res.mask.at(x, y)) {
                CHECK(x >= res.used_box.x0);
                CHECK(x < res.used_box.x1);
                CHECK(y >= res.used_box.y0);
                CHECK(y < res.used_box.y1);
            }
}

TEST_CASE("no detection falls back to the whole frame when allowed") {
    const RasterImage flat(96, 80, 3, ColorSpace::Srgb, 0.8f);
    const BackendHandle baseline = BackendHandle::baseline();

    PipelineConfig cfg = small_config();
    const RunImageResult res = run_image(flat, baseline, baseline, cfg);
    CHECK(res.no_detection);
    CHECK(res.used_box == BoundingBox{0, 0, 96, 80});
    // flat crop -> constant stack -> baseline outputs all zeros
    CHECK(res.mask.count_true() == 0);
}

TEST_CASE("no detection with fallback disabled skips segmentation") {
    const RasterImage flat(64, 64, 3, ColorSpace::Srgb, 0.8f);
    auto no_det = BackendHandle::in_process(
        [](const RasterImage&) { return std::vector<Detection>{}; },
        [](const ChannelStack&) -> ProbabilityMap {
            throw BackendError("segmenter must not run");
        });
    PipelineConfig cfg = small_config();
    cfg.fallback_whole_image = false;
    const RunImageResult res = run_image(flat, no_det, no_det, cfg);
    CHECK(res.no_detection);
    CHECK(res.mask.count_true() == 0);
    CHECK(res.mask.width == 64);
    CHECK(res.used_box == BoundingBox{0, 0, 64, 64});
}

TEST_CASE("tta on and off agree for an equivariant segmenter") {
    SeededRng rng(317);
    RasterImage img(100, 100, 3, ColorSpace::Srgb);
    for (float& v : img.data) v = static_cast<float>(rng.uniform01());

    auto fixed_box = [](const RasterImage&) {
        return std::vector<Detection>{{{10, 10, 90, 90}, 0.9}};
    };
    auto channel_mean = [](const ChannelStack& s) {
        ProbabilityMap out(s.width, s.height);
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) {
                double acc = 0.0;
                for (int c = 0; c < ChannelStack::kChannels; ++c)
                    acc += s.at(x, y, c);
                out.at(x, y) =
                    static_cast<float>(acc / ChannelStack::kChannels);
            }
        return out;
    };
    const auto handle = BackendHandle::in_process(fixed_box, channel_mean);

    PipelineConfig with_tta = small_config();
    PipelineConfig without = small_config();
    without.tta = false;
    const RunImageResult a = run_image(img, handle, handle, with_tta);
    const RunImageResult b = run_image(img, handle, handle, without);
    CHECK(a.mask == b.mask);
    CHECK(a.used_box == b.used_box);
}

TEST_CASE("backend errors carry the pipeline stage") {
    const RasterImage img(64, 64, 3, ColorSpace::Srgb, 0.5f);

    auto bad_detect = BackendHandle::in_process(
        [](const RasterImage&) -> std::vector<Detection> {
            throw BackendError("boom");
        },
        [](const ChannelStack& s) {
            return ProbabilityMap(s.width, s.height, 0.5f);
        });
    try {
        run_image(img, bad_detect, bad_detect, small_config());
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("detection stage: ") != std::string::npos);
        CHECK(msg.find("boom") != std::string::npos);
    }

    auto bad_segment = BackendHandle::in_process(
        [](const RasterImage&) {
            return std::vector<Detection>{{{8, 8, 56, 56}, 0.9}};
        },
        [](const ChannelStack&) -> ProbabilityMap {
            throw BackendError("squelch");
        });
    try {
        run_image(img, bad_segment, bad_segment, small_config());
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("segmentation stage: ") != std::string::npos);
        CHECK(msg.find("squelch") != std::string::npos);
    }
}

TEST_CASE("a detection outside the frame is a detector fault") {
    const RasterImage img(64, 64, 3, ColorSpace::Srgb, 0.5f);
    auto outside = BackendHandle::in_process(
        [](const RasterImage&) {
            return std::vector<Detection>{{{-50, -50, -10, -10}, 0.9}};
        },
        [](const ChannelStack& s) {
            return ProbabilityMap(s.width, s.height, 0.5f);
        });
    try {
        run_image(img, outside, outside, small_config());
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(std::string(e.what()).find("outside") != std::string::npos);
    }
}

TEST_CASE("run_image rejects non-rgb input") {
    const RasterImage gray(64, 64, 1, ColorSpace::Gray, 0.5f);
    const BackendHandle baseline = BackendHandle::baseline();
    CHECK_THROWS_AS(run_image(gray, baseline, baseline, small_config()),
                    DataError);
}

TEST_CASE("run_dataset scores, skips, and records failures per image") {
    TempDir tmp;
    const auto root = tmp.path / "data";
    write_disk_dataset(root, {"ISIC_a", "ISIC_b", "ISIC_c", "ISIC_d"},
                       {"ISIC_c"});
    // Corrupt one truth file after the fact: the image still segments and
    // its mask is written, but scoring it fails.
    {
        std::ofstream bad(root / "masks" / "ISIC_d_segmentation.png",
                          std::ios::binary | std::ios::trunc);
        bad << "not a png";
    }

    const BackendHandle baseline = BackendHandle::baseline();
    const auto out = tmp.path / "out";
    const DatasetRunReport report =
        run_dataset(root, baseline, baseline, small_config(), out, 1);

    CHECK(report.images_processed == 4);
    REQUIRE(report.missing_truth.size() == 1);
    CHECK(report.missing_truth[0] == "ISIC_c");
    REQUIRE(report.failures.size() == 1);
    CHECK(report.failures[0].id == "ISIC_d");

    REQUIRE(report.scores.has_value());
    REQUIRE(report.scores->per_image.size() == 2);
    CHECK(report.scores->per_image[0].id == "ISIC_a");
    CHECK(report.scores->per_image[1].id == "ISIC_b");
    CHECK(report.scores->mean_thresholded <= report.scores->mean_raw);
    CHECK(report.scores->per_image[0].raw_jaccard > 0.8);

    for (const char* id : {"ISIC_a", "ISIC_b", "ISIC_c"})
        CHECK(std::filesystem::is_regular_file(
            out / (std::string(id) + "_segmentation.png")));
}

TEST_CASE("run_dataset output does not depend on the worker count") {
    TempDir tmp;
    const auto root = tmp.path / "data";
    write_disk_dataset(root, {"ISIC_p", "ISIC_q", "ISIC_r"}, {});

    const BackendHandle baseline = BackendHandle::baseline();
    const auto out1 = tmp.path / "run1";
    const auto out3 = tmp.path / "run3";
    const auto r1 =
        run_dataset(root, baseline, baseline, small_config(), out1, 1);
    const auto r3 =
        run_dataset(root, baseline, baseline, small_config(), out3, 3);

    REQUIRE(r1.scores.has_value());
    REQUIRE(r3.scores.has_value());
    CHECK(r1.scores->mean_raw == r3.scores->mean_raw);
    for (const char* id : {"ISIC_p", "ISIC_q", "ISIC_r"}) {
        const std::string name = std::string(id) + "_segmentation.png";
        CHECK(slurp(out1 / name) == slurp(out3 / name));
    }
}

TEST_CASE("run_dataset rejects missing or empty layouts") {
    TempDir tmp;
    const BackendHandle baseline = BackendHandle::baseline();
    CHECK_THROWS_AS(run_dataset(tmp.path / "nowhere", baseline, baseline,
                                small_config(), tmp.path / "o", 1),
                    DataError);

    std::filesystem::create_directories(tmp.path / "bare" / "images");
    CHECK_THROWS_AS(run_dataset(tmp.path / "bare", baseline, baseline,
                                small_config(), tmp.path / "o", 1),
                    DataError);
}

TEST_CASE("training_crop_sampler at unit range equals the manual crop") {
    SeededRng gen(331);
    const SyntheticLesion sample = make_lesion(gen);

    SeededRng rng(1);
    const auto [stack, mask] = training_crop_sampler(
        sample.image, sample.mask, sample.bbox, ExpansionRange{1.0, 1.0},
        rng, 64);
    CHECK(stack.width == 64);
    CHECK(stack.height == 64);
    CHECK(mask.width == 64);
    CHECK(mask.height == 64);

    const ChannelStack manual = assemble_channels(
        resize_bilinear(crop(sample.image, sample.bbox), 64, 64));
    const BinaryMask manual_mask =
        resize_nearest(crop(sample.mask, sample.bbox), 64, 64);
    CHECK(stack.data == manual.data);
    CHECK(mask == manual_mask);

    // The resampled mask still covers most of the crop frame: the gt box
    // is tight, so its center region is lesion.
    CHECK(mask.count_true() > 0);
}

TEST_CASE("training crop expansion stays inside the area bounds") {
    // Sides of 100 scale to exact integers at the range ends, so rounding
    // cannot push the area ratio outside [0.81, 1.21].
    const RasterImage img(1000, 1000, 3, ColorSpace::Srgb, 0.5f);
    const BoundingBox gt{450, 450, 550, 550};
    SeededRng rng(337);
    const ExpansionRange range{0.9, 1.1};
    for (int i = 0; i < 500; ++i) {
        const BoundingBox box = expand_bbox(gt, range, rng, 1000, 1000);
        const double ratio =
            static_cast<double>(box.area()) / static_cast<double>(gt.area());
        CHECK(ratio >= 0.81);
        CHECK(ratio <= 1.21);
    }
}

TEST_CASE("training_crop_sampler validates its input") {
    const RasterImage img(100, 100, 3, ColorSpace::Srgb, 0.5f);
    const BinaryMask mask(90, 100);
    SeededRng rng(1);
    CHECK_THROWS_AS(training_crop_sampler(img, mask, {10, 10, 50, 50},
                                          ExpansionRange{}, rng, 64),
                    std::invalid_argument);

    const BinaryMask ok(100, 100);
    CHECK_THROWS_AS(training_crop_sampler(img, ok, {10, 10, 50, 50},
                                          ExpansionRange{}, rng, 8),
                    std::invalid_argument);
}

#ifdef DERM_CLI

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DERM_CLI) + " " + args +
                            " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli: help, usage errors, and data errors use distinct codes") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("definitely-not-a-subcommand") == 1);
    CHECK(run_cli("split") == 1);  // missing required --ids
    CHECK(run_cli("split --ids /no/such/file.txt") == 2);
}

TEST_CASE("cli: split writes the two id files") {
    TempDir tmp;
    const auto ids = tmp.path / "ids.txt";
    {
        std::ofstream out(ids);
        for (int i = 0; i < 22; ++i) out << "ISIC_" << i << "\n";
    }
    const int code = run_cli("split --ids " + ids.string() + " --seed 5 --out " +
                             tmp.path.string());
    CHECK(code == 0);

    std::ifstream train(tmp.path / "train.txt"), val(tmp.path / "val.txt");
    REQUIRE(train.good());
    REQUIRE(val.good());
    int train_n = 0, val_n = 0;
    std::string line;
    while (std::getline(train, line)) ++train_n;
    while (std::getline(val, line)) ++val_n;
    CHECK(train_n == 20);
    CHECK(val_n == 2);
}

#endif  // DERM_CLI
