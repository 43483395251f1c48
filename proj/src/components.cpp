#include "scarq/components.hpp"

#include <numeric>

namespace scarq {

namespace {

class UnionFind {
public:
    std::int32_t make() {
        parent_.push_back(static_cast<std::int32_t>(parent_.size()));
        return parent_.back();
    }

    std::int32_t find(std::int32_t a) {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]];
            a = parent_[a];
        }
        return a;
    }

    void unite(std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) {
            parent_[b] = a;
        } else {
            parent_[a] = b;
        }
    }

    std::size_t size() const { return parent_.size(); }

private:
    std::vector<std::int32_t> parent_;
};

}  // namespace

Mask2D ComponentSet::component_mask(std::int32_t id) const {
    Mask2D out(labels.width, labels.height, 0, labels.dx, labels.dy);
    for (std::size_t i = 0; i < labels.size(); ++i) out.data[i] = labels.data[i] == id;
    return out;
}

std::int32_t ComponentSet::largest() const {
    std::int32_t best = 0;
    std::size_t best_size = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] > best_size) {
            best_size = sizes[i];
            best = static_cast<std::int32_t>(i + 1);
        }
    }
    return best;
}

ComponentSet connected_components(const Mask2D& mask, Connectivity connectivity) {
    const int w = mask.width;
    const int h = mask.height;
    ComponentSet result;
    result.connectivity = connectivity;
    result.labels = Image2D<std::int32_t>(w, h, 0, mask.dx, mask.dy);
    auto& lab = result.labels;

    // Provisional labels are 1-based; union-find index = label - 1.
    UnionFind uf;
    const bool diag = connectivity == Connectivity::eight;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask(x, y)) continue;
            std::int32_t neighbours[4];
            int n = 0;
            if (x > 0 && lab(x - 1, y)) neighbours[n++] = lab(x - 1, y);
            if (y > 0 && lab(x, y - 1)) neighbours[n++] = lab(x, y - 1);
            if (diag && y > 0) {
                if (x > 0 && lab(x - 1, y - 1)) neighbours[n++] = lab(x - 1, y - 1);
                if (x + 1 < w && lab(x + 1, y - 1)) neighbours[n++] = lab(x + 1, y - 1);
            }
            if (n == 0) {
                lab(x, y) = uf.make() + 1;
                continue;
            }
            std::int32_t smallest = neighbours[0];
            for (int i = 1; i < n; ++i) smallest = std::min(smallest, neighbours[i]);
            lab(x, y) = smallest;
            for (int i = 0; i < n; ++i) uf.unite(smallest - 1, neighbours[i] - 1);
        }
    }

    // Second pass: resolve equivalences and renumber densely in raster order.
    std::vector<std::int32_t> dense(uf.size(), 0);
    std::int32_t next = 0;
    for (auto& v : lab.data) {
        if (!v) continue;
        const auto root = uf.find(v - 1);
        if (!dense[root]) {
            dense[root] = ++next;
            result.sizes.push_back(0);
        }
        v = dense[root];
        ++result.sizes[v - 1];
    }
    return result;
}

Mask2D invert(const Mask2D& mask) {
    Mask2D out = mask;
    for (auto& v : out.data) v = v ? 0 : 1;
    return out;
}

Mask2D fill_holes(const Mask2D& mask) {
    const auto background = connected_components(invert(mask), Connectivity::four);
    std::vector<bool> touches(background.count() + 1, false);
    const auto& lab = background.labels;
    for (int x = 0; x < lab.width; ++x) {
        touches[lab(x, 0)] = true;
        touches[lab(x, lab.height - 1)] = true;
    }
    for (int y = 0; y < lab.height; ++y) {
        touches[lab(0, y)] = true;
        touches[lab(lab.width - 1, y)] = true;
    }
    Mask2D out = mask;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (lab.data[i] && !touches[lab.data[i]]) out.data[i] = 1;
    }
    return out;
}

}  // namespace scarq
