#include "scarq/qc.hpp"

#include "scarq/rng.hpp"

namespace scarq {

namespace {

/// Flags for every complement component id: true when it touches the border.
std::vector<bool> border_touching(const ComponentSet& cc) {
    std::vector<bool> touches(cc.count() + 1, false);
    const auto& lab = cc.labels;
    for (int x = 0; x < lab.width; ++x) {
        touches[lab(x, 0)] = true;
        touches[lab(x, lab.height - 1)] = true;
    }
    for (int y = 0; y < lab.height; ++y) {
        touches[lab(0, y)] = true;
        touches[lab(lab.width - 1, y)] = true;
    }
    return touches;
}

}  // namespace

bool is_closed_myocardium(const Mask2D& myo_mask) {
    if (myo_mask.empty() || count_nonzero(myo_mask) == 0) return false;
    if (connected_components(myo_mask, Connectivity::eight).count() != 1) return false;
    const auto complement = connected_components(invert(myo_mask), Connectivity::four);
    const auto touches = border_touching(complement);
    for (std::size_t id = 1; id <= complement.count(); ++id) {
        if (!touches[id]) return true;
    }
    return false;
}

Mask2D interior_of(const Mask2D& myo_mask) {
    if (!is_closed_myocardium(myo_mask)) throw DegenerateInputError("interior_of: myocardium is not closed");
    const auto complement = connected_components(invert(myo_mask), Connectivity::four);
    const auto touches = border_touching(complement);
    Mask2D out(myo_mask.width, myo_mask.height, 0, myo_mask.dx, myo_mask.dy);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto id = complement.labels.data[i];
        out.data[i] = id != 0 && !touches[id];
    }
    return out;
}

std::vector<BoundingBox> jitter_boxes(const BoundingBox& box, int count, std::uint64_t seed,
                                      const JitterParams& params) {
    if (count < 1) throw InvalidArgument("jitter_boxes: count must be at least 1");
    if (!(params.min_fraction >= 0.0 && params.min_fraction <= params.max_fraction)) {
        throw InvalidArgument("jitter_boxes: bad translation range");
    }
    validate_box(box);
    Rng rng(seed);
    std::vector<BoundingBox> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double ux = rng.uniform(params.min_fraction, params.max_fraction) * (rng.coin() ? 1.0 : -1.0);
        const double uy = rng.uniform(params.min_fraction, params.max_fraction) * (rng.coin() ? 1.0 : -1.0);
        out.push_back({box.cx + ux * box.w, box.cy + uy * box.h, box.w, box.h});
    }
    return out;
}

Image2D<int> vote_counts(std::span<const Mask2D> predictions) {
    if (predictions.empty()) throw InvalidArgument("vote_counts: no predictions");
    const auto& first = predictions.front();
    Image2D<int> votes(first.width, first.height, 0, first.dx, first.dy);
    for (const auto& p : predictions) {
        require_same_shape(first, p, "vote_counts: prediction shapes differ");
        for (std::size_t i = 0; i < p.size(); ++i) votes.data[i] += p.data[i] != 0;
    }
    return votes;
}

VoteResult ensemble_revote(std::span<const Mask2D> predictions, const Mask2D& original, const VoteOptions& options) {
    if (predictions.size() < 2) throw InvalidArgument("ensemble_revote: need at least two predictions");
    const auto votes = vote_counts(predictions);
    require_same_shape(votes, original, "ensemble_revote: original shape differs from predictions");
    const int n = static_cast<int>(predictions.size());

    // greater_than with k = n can never select a pixel, so its k range stops at n - 1.
    const int k_max = options.rule == VoteRule::at_least ? n : n - 1;
    const int k_min = options.rule == VoteRule::at_least ? 1 : 0;
    const bool ascending = options.search == VoteSearch::smallest_k;
    for (int step = 0; step <= k_max - k_min; ++step) {
        const int k = ascending ? k_min + step : k_max - step;
        Mask2D candidate(votes.width, votes.height, 0, votes.dx, votes.dy);
        for (std::size_t i = 0; i < candidate.size(); ++i) {
            candidate.data[i] = options.rule == VoteRule::at_least ? votes.data[i] >= k : votes.data[i] > k;
        }
        if (is_closed_myocardium(candidate)) return {std::move(candidate), k, true, false};
    }
    return {original, 0, is_closed_myocardium(original), true};
}

Mask2D scar_ratio_filter(const Mask2D& scar, const Mask2D& myocardium, double min_ratio) {
    require_same_shape(scar, myocardium, "scar_ratio_filter: mask shapes differ");
    if (min_ratio < 0.0) throw InvalidArgument("scar_ratio_filter: negative ratio");
    std::size_t wall = 0;
    for (std::size_t i = 0; i < scar.size(); ++i) wall += scar.data[i] || myocardium.data[i];
    if (wall == 0) throw DegenerateInputError("scar_ratio_filter: empty myocardium");

    const auto cc = connected_components(scar, Connectivity::eight);
    // Ratio compared as a quotient so that e.g. 30/1000 equals the literal 0.03 exactly.
    std::vector<bool> keep(cc.count() + 1, false);
    for (std::size_t id = 1; id <= cc.count(); ++id) {
        keep[id] = static_cast<double>(cc.sizes[id - 1]) / static_cast<double>(wall) >= min_ratio;
    }

    Mask2D out(scar.width, scar.height, 0, scar.dx, scar.dy);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = keep[cc.labels.data[i]];
    return out;
}

}  // namespace scarq
