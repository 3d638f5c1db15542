#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "derm/image.hpp"

namespace derm {

constexpr double kJaccardPenaltyThreshold = 0.65;

struct ImageScore {
    std::string id;
    double raw_jaccard = 0.0;
    double thresholded_jaccard = 0.0;
};

struct ScoreReport {
    std::vector<ImageScore> per_image;  // sorted by id
    double mean_raw = 0.0;
    double mean_thresholded = 0.0;
    std::size_t n_below_threshold = 0;
    double threshold = kJaccardPenaltyThreshold;
};

struct SplitAssignment {
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::uint64_t seed = 0;
};

// |A n B| / |A u B|, computed in double from integer pixel counts.
// Two empty masks agree perfectly and score 1.
double jaccard(const BinaryMask& a, const BinaryMask& b);

// J when J >= t, else 0. The boundary is kept: J == t scores J.
double thresholded_jaccard(const BinaryMask& a, const BinaryMask& b,
                           double t = kJaccardPenaltyThreshold);

// Soft overlap loss in [-1, 0]: with I = sum(p*g), P = sum(p), G = sum(g),
// L = -I / (P + G - I). Returns 0 when p and g are both identically zero.
double dice_loss(const ProbabilityMap& p, const BinaryMask& g);

// Per-pixel dL/dp_k = -(g_k*U - I*(1-g_k)) / U^2 with U = P + G - I.
// U must be positive.
std::vector<double> dice_loss_gradient(const ProbabilityMap& p,
                                       const BinaryMask& g);

struct ScoredPair {
    BinaryMask predicted;
    BinaryMask truth;
    std::string id;
};

ScoreReport aggregate(const std::vector<ScoredPair>& pairs,
                      double threshold = kJaccardPenaltyThreshold);

// Seeded shuffle, first round(n/11) ids (at least 1) to validation.
SplitAssignment split_dataset(const std::vector<std::string>& ids,
                              std::uint64_t seed);

std::string report_to_json(const ScoreReport& report);
std::string report_to_csv(const ScoreReport& report);

void write_split(const SplitAssignment& split,
                 const std::filesystem::path& train_path,
                 const std::filesystem::path& val_path);

}  // namespace derm
