#pragma once

#include <array>
#include <functional>
#include <vector>

#include "derm/colorspace.hpp"
#include "derm/image.hpp"

namespace derm {

// Test-time augmentation variants, in the order they are inferred and merged.
enum class TtaKind { Identity, Rot90, Rot180, HFlip };

constexpr std::array<TtaKind, 4> kTtaVariants = {
    TtaKind::Identity, TtaKind::Rot90, TtaKind::Rot180, TtaKind::HFlip};

const char* tta_name(TtaKind kind);

// Forward transform of the model input. Rot90 is a quarter turn
// counterclockwise and requires a square input; the hot-pixel check is
// (0,0) -> (0, H-1).
ChannelStack tta_forward(const ChannelStack& stack, TtaKind kind);
ProbabilityMap tta_forward(const ProbabilityMap& map, TtaKind kind);

// Inverse transform of the model output, so each variant's prediction is
// expressed in the original frame before merging.
ProbabilityMap tta_inverse(const ProbabilityMap& map, TtaKind kind);

// All four forward variants of one stack, Identity first.
std::vector<ChannelStack> make_variants(const ChannelStack& stack);

// Per-pixel mean. Accumulates in double, so merging four identical maps
// reproduces them bit-exactly.
ProbabilityMap merge_mean(const std::vector<ProbabilityMap>& maps);

using SegmentFn = std::function<ProbabilityMap(const ChannelStack&)>;

// Run `infer` on every variant sequentially, undo each transform, merge.
// The inference order is fixed so results do not depend on scheduling.
ProbabilityMap tta_segment(const ChannelStack& stack, const SegmentFn& infer);

}  // namespace derm
