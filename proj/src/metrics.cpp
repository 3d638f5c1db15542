#include "derm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "derm/errors.hpp"
#include "derm/rng.hpp"

namespace derm {

namespace {

void require_same_dims(const BinaryMask& a, const BinaryMask& b,
                       const char* op) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument(std::string(op) + ": dimension mismatch");
}

}  // namespace

double jaccard(const BinaryMask& a, const BinaryMask& b) {
    require_same_dims(a, b, "jaccard");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        const bool av = a.bits[i] != 0;
        const bool bv = b.bits[i] != 0;
        inter += av && bv;
        uni += av || bv;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double thresholded_jaccard(const BinaryMask& a, const BinaryMask& b, double t) {
    const double j = jaccard(a, b);
    return j >= t ? j : 0.0;
}

double dice_loss(const ProbabilityMap& p, const BinaryMask& g) {
    if (p.width != g.width || p.height != g.height)
        throw std::invalid_argument("dice_loss: dimension mismatch");
    double isum = 0.0, psum = 0.0, gsum = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double pv = p.values[i];
        const double gv = g.bits[i] ? 1.0 : 0.0;
        isum += pv * gv;
        psum += pv;
        gsum += gv;
    }
    const double denom = psum + gsum - isum;
    if (denom == 0.0) return 0.0;
    return -isum / denom;
}

std::vector<double> dice_loss_gradient(const ProbabilityMap& p,
                                       const BinaryMask& g) {
    if (p.width != g.width || p.height != g.height)
        throw std::invalid_argument("dice_loss_gradient: dimension mismatch");
    double isum = 0.0, psum = 0.0, gsum = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double pv = p.values[i];
        const double gv = g.bits[i] ? 1.0 : 0.0;
        isum += pv * gv;
        psum += pv;
        gsum += gv;
    }
    const double u = psum + gsum - isum;
    if (u <= 0.0)
        throw std::invalid_argument(
            "dice_loss_gradient: degenerate denominator");
    const double u2 = u * u;
    std::vector<double> grad(p.values.size());
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double gv = g.bits[i] ? 1.0 : 0.0;
        grad[i] = -(gv * u - isum * (1.0 - gv)) / u2;
    }
    return grad;
}

ScoreReport aggregate(const std::vector<ScoredPair>& pairs, double threshold) {
    if (pairs.empty()) throw DataError("aggregate: no pairs");
    ScoreReport report;
    report.threshold = threshold;
    report.per_image.reserve(pairs.size());
    for (const auto& pair : pairs) {
        if (pair.predicted.width != pair.truth.width ||
            pair.predicted.height != pair.truth.height)
            throw DataError("aggregate: dimension mismatch for id '" +
                            pair.id + "'");
        ImageScore s;
        s.id = pair.id;
        s.raw_jaccard = jaccard(pair.predicted, pair.truth);
        s.thresholded_jaccard =
            s.raw_jaccard >= threshold ? s.raw_jaccard : 0.0;
        report.per_image.push_back(std::move(s));
    }
    std::sort(report.per_image.begin(), report.per_image.end(),
              [](const ImageScore& a, const ImageScore& b) {
                  return a.id < b.id;
              });
    double raw = 0.0, thr = 0.0;
    for (const auto& s : report.per_image) {
        raw += s.raw_jaccard;
        thr += s.thresholded_jaccard;
        if (s.raw_jaccard < threshold) ++report.n_below_threshold;
    }
    report.mean_raw = raw / static_cast<double>(report.per_image.size());
    report.mean_thresholded =
        thr / static_cast<double>(report.per_image.size());
    return report;
}

SplitAssignment split_dataset(const std::vector<std::string>& ids,
                              std::uint64_t seed) {
    if (ids.size() < 2)
        throw DataError("split_dataset: need at least 2 ids");
    std::vector<std::string> shuffled = ids;
    SeededRng rng(seed);
    // Fisher-Yates with our own generator; std::shuffle's permutation is
    // not pinned across standard libraries.
    for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.bounded(i + 1));
        std::swap(shuffled[i], shuffled[j]);
    }
    const std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(static_cast<double>(ids.size()) / 11.0)));
    SplitAssignment split;
    split.seed = seed;
    split.val_ids.assign(shuffled.begin(), shuffled.begin() + n_val);
    split.train_ids.assign(shuffled.begin() + n_val, shuffled.end());
    return split;
}

std::string report_to_json(const ScoreReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : report.per_image) {
        rows.push_back({{"id", s.id},
                        {"raw_jaccard", s.raw_jaccard},
                        {"thresholded_jaccard", s.thresholded_jaccard}});
    }
    nlohmann::json j{{"threshold", report.threshold},
                     {"mean_raw", report.mean_raw},
                     {"mean_thresholded", report.mean_thresholded},
                     {"n_below_threshold", report.n_below_threshold},
                     {"per_image", std::move(rows)}};
    return j.dump(2);
}

std::string report_to_csv(const ScoreReport& report) {
    std::string out = "id,raw_jaccard,thresholded_jaccard\n";
    char line[160];
    for (const auto& s : report.per_image) {
        std::snprintf(line, sizeof(line), "%s,%.9f,%.9f\n", s.id.c_str(),
                      s.raw_jaccard, s.thresholded_jaccard);
        out += line;
    }
    return out;
}

void write_split(const SplitAssignment& split,
                 const std::filesystem::path& train_path,
                 const std::filesystem::path& val_path) {
    auto write_ids = [](const std::filesystem::path& path,
                        const std::vector<std::string>& ids) {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write '" + path.string() + "'");
        for (const auto& id : ids) out << id << '\n';
    };
    write_ids(train_path, split.train_ids);
    write_ids(val_path, split.val_ids);
}

}  // namespace derm
