#include "derm/tta.hpp"

#include <stdexcept>
#include <string>

#include "derm/errors.hpp"

namespace derm {

namespace {

// Gather maps: out(x, y) = in(sx(x, y), sy(x, y)). Rot90 means the content
// turns a quarter counterclockwise, so the gather reads from the clockwise
// position.
void source_of(TtaKind kind, int w, int h, int x, int y, int& sx, int& sy) {
    switch (kind) {
        case TtaKind::Identity:
            sx = x;
            sy = y;
            return;
        case TtaKind::Rot90:
            sx = w - 1 - y;
            sy = x;
            return;
        case TtaKind::Rot180:
            sx = w - 1 - x;
            sy = h - 1 - y;
            return;
        case TtaKind::HFlip:
            sx = w - 1 - x;
            sy = y;
            return;
    }
    throw std::logic_error("unreachable");
}

// Inverse gathers: Rot90's inverse is a quarter turn clockwise; the other
// three are involutions.
void inverse_source_of(TtaKind kind, int w, int h, int x, int y, int& sx,
                       int& sy) {
    if (kind == TtaKind::Rot90) {
        sx = y;
        sy = h - 1 - x;
        return;
    }
    source_of(kind, w, h, x, y, sx, sy);
}

void require_square(TtaKind kind, int w, int h) {
    if (kind == TtaKind::Rot90 && w != h)
        throw std::invalid_argument(
            "tta: quarter-turn variant requires a square input");
}

template <typename Source>
ProbabilityMap gather_map(const ProbabilityMap& in, TtaKind kind,
                          Source source) {
    require_square(kind, in.width, in.height);
    if (kind == TtaKind::Identity) return in;
    ProbabilityMap out(in.width, in.height);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            int sx, sy;
            source(kind, in.width, in.height, x, y, sx, sy);
            out.values[static_cast<std::size_t>(y) * in.width + x] =
                in.at(sx, sy);
        }
    }
    return out;
}

}  // namespace

const char* tta_name(TtaKind kind) {
    switch (kind) {
        case TtaKind::Identity: return "identity";
        case TtaKind::Rot90: return "rot90";
        case TtaKind::Rot180: return "rot180";
        case TtaKind::HFlip: return "hflip";
    }
    return "?";
}

ChannelStack tta_forward(const ChannelStack& stack, TtaKind kind) {
    require_square(kind, stack.width, stack.height);
    if (kind == TtaKind::Identity) return stack;
    ChannelStack out(stack.width, stack.height);
    for (int c = 0; c < ChannelStack::kChannels; ++c) {
        for (int y = 0; y < stack.height; ++y) {
            for (int x = 0; x < stack.width; ++x) {
                int sx, sy;
                source_of(kind, stack.width, stack.height, x, y, sx, sy);
                out.at(x, y, c) = stack.at(sx, sy, c);
            }
        }
    }
    return out;
}

ProbabilityMap tta_forward(const ProbabilityMap& map, TtaKind kind) {
    return gather_map(map, kind, source_of);
}

ProbabilityMap tta_inverse(const ProbabilityMap& map, TtaKind kind) {
    return gather_map(map, kind, inverse_source_of);
}

std::vector<ChannelStack> make_variants(const ChannelStack& stack) {
    if (stack.width != stack.height)
        throw std::invalid_argument("make_variants: input must be square");
    std::vector<ChannelStack> out;
    out.reserve(kTtaVariants.size());
    for (TtaKind kind : kTtaVariants) out.push_back(tta_forward(stack, kind));
    return out;
}

ProbabilityMap merge_mean(const std::vector<ProbabilityMap>& maps) {
    if (maps.empty())
        throw std::invalid_argument("merge_mean: no maps");
    const int w = maps.front().width;
    const int h = maps.front().height;
    for (const ProbabilityMap& m : maps)
        if (m.width != w || m.height != h)
            throw std::invalid_argument("merge_mean: dimension mismatch");
    ProbabilityMap out(w, h);
    const double inv = 1.0 / static_cast<double>(maps.size());
    const std::size_t n = out.values.size();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (const ProbabilityMap& m : maps) acc += m.values[i];
        out.values[i] = static_cast<float>(acc * inv);
    }
    return out;
}

ProbabilityMap tta_segment(const ChannelStack& stack, const SegmentFn& infer) {
    std::vector<ProbabilityMap> restored;
    restored.reserve(kTtaVariants.size());
    for (TtaKind kind : kTtaVariants) {
        ProbabilityMap pred;
        try {
            pred = infer(tta_forward(stack, kind));
        } catch (const std::exception& e) {
            throw BackendError(std::string("tta variant '") + tta_name(kind) +
                               "' failed: " + e.what());
        }
        if (pred.width != stack.width || pred.height != stack.height)
            throw BackendError(std::string("tta variant '") + tta_name(kind) +
                               "' returned wrong dimensions");
        restored.push_back(tta_inverse(pred, kind));
    }
    return merge_mean(restored);
}

}  // namespace derm
