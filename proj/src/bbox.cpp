#include "scarq/bbox.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "scarq/components.hpp"
#include "scarq/log.hpp"
#include "scarq/segment.hpp"

namespace scarq {

BoundingBox::PixelRange BoundingBox::pixels() const {
    return {static_cast<int>(std::ceil(left())), static_cast<int>(std::ceil(top())),
            static_cast<int>(std::floor(right())), static_cast<int>(std::floor(bottom()))};
}

bool BoundingBox::covers(int x, int y) const {
    return x >= left() && x <= right() && y >= top() && y <= bottom();
}

void validate_box(const BoundingBox& box) {
    if (!(box.w > 0.0) || !(box.h > 0.0) || !std::isfinite(box.w) || !std::isfinite(box.h) ||
        !std::isfinite(box.cx) || !std::isfinite(box.cy)) {
        throw InvalidArgument("bounding box sides must be positive and finite");
    }
}

BoundingBox proposal_box(int image_w, int image_h) {
    return {image_w / 2.0, image_h / 2.0, proposal_side, proposal_side};
}

BoxTransform encode_transform(const BoundingBox& proposal, const BoundingBox& target) {
    validate_box(proposal);
    validate_box(target);
    return {target.cx - proposal.cx, target.cy - proposal.cy, target.w / proposal.w, target.h / proposal.h};
}

BoundingBox apply_transform(const BoundingBox& proposal, const BoxTransform& t) {
    validate_box(proposal);
    if (!(t.sx > 0.0) || !(t.sy > 0.0)) throw InvalidArgument("box transform scalings must be positive");
    return {proposal.cx + t.dx, proposal.cy + t.dy, proposal.w * t.sx, proposal.h * t.sy};
}

BoundingBox expand_box(const BoundingBox& box, double margin) {
    if (margin < 0.0) throw InvalidArgument("box margin must be non-negative");
    return {box.cx, box.cy, box.w * (1.0 + 2.0 * margin), box.h * (1.0 + 2.0 * margin)};
}

namespace {

struct Extent {
    int x0 = std::numeric_limits<int>::max();
    int y0 = std::numeric_limits<int>::max();
    int x1 = std::numeric_limits<int>::min();
    int y1 = std::numeric_limits<int>::min();

    void add(int x, int y) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
    }
    bool empty() const { return x1 < x0; }

    BoundingBox box() const {
        // Pixel-edge convention: pixels x0..x1 span [x0 - 0.5, x1 + 0.5].
        return {0.5 * (x0 + x1), 0.5 * (y0 + y1), static_cast<double>(x1 - x0 + 1),
                static_cast<double>(y1 - y0 + 1)};
    }
};

}  // namespace

BoundingBox mask_box(const Mask2D& mask, double margin) {
    Extent e;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask(x, y)) e.add(x, y);
        }
    }
    if (e.empty()) throw DegenerateInputError("mask_box: empty mask");
    return expand_box(e.box(), margin);
}

BoundingBox gt_box_from_labels(const LabelMap& labels, double margin) {
    const auto& d = labels.dims();
    Extent e;
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                if (labels.at(x, y, z) != label::background) e.add(x, y);
            }
        }
    }
    if (e.empty()) throw DegenerateInputError("gt_box_from_labels: no LV voxels");
    return expand_box(e.box(), margin);
}

int select_reference_slice(int slice_count) {
    if (slice_count < 1) throw InvalidArgument("select_reference_slice: empty stack");
    if (slice_count == 1) {
        warn("single-slice stack: using slice 0 for box prediction");
        return 0;
    }
    return 1;
}

BoxTransform heuristic_regressor(const Slice2D& normalized, const HeuristicRegressorParams& params) {
    const BoundingBox proposal = proposal_box(normalized.width, normalized.height);
    const auto [lo, hi] = std::minmax_element(normalized.data.begin(), normalized.data.end());
    if (normalized.empty() || !(*hi > *lo)) {
        warn("heuristic_regressor: empty foreground, returning identity transform");
        return {};
    }
    const double threshold = otsu_threshold(normalized.data).threshold;
    Mask2D fg(normalized.width, normalized.height, 0);
    for (std::size_t i = 0; i < fg.size(); ++i) fg.data[i] = normalized.data[i] > threshold;
    const auto cc = connected_components(fg, Connectivity::eight);
    if (cc.count() == 0) {
        warn("heuristic_regressor: empty foreground, returning identity transform");
        return {};
    }
    return encode_transform(proposal, mask_box(cc.component_mask(cc.largest()), params.margin));
}

double iou(const BoundingBox& a, const BoundingBox& b) {
    validate_box(a);
    validate_box(b);
    const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
    const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
    const double inter = ix * iy;
    return inter / (a.w * a.h + b.w * b.h - inter);
}

BoxTransform HeuristicBoxRegressor::predict(std::string_view, const Slice2D& reference, const LabelMap*) const {
    return heuristic_regressor(reference, params_);
}

BoxTransform LabelBoxRegressor::predict(std::string_view subject_id, const Slice2D& reference,
                                        const LabelMap* labels) const {
    if (!labels) throw InvalidArgument("oracle box regressor: subject " + std::string(subject_id) + " has no labels");
    return encode_transform(proposal_box(reference.width, reference.height), gt_box_from_labels(*labels, margin_));
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

ExternalBoxRegressor ExternalBoxRegressor::from_csv_text(std::string_view text) {
    std::map<std::string, BoxTransform> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(trim(f));
        if (fields.size() != 5) throw FormatError("box CSV line " + std::to_string(line_no) + ": expected 5 fields");
        BoxTransform t;
        const bool ok = parse_double(fields[1], t.dx) && parse_double(fields[2], t.dy) &&
                        parse_double(fields[3], t.sx) && parse_double(fields[4], t.sy);
        if (!ok) {
            if (line_no == 1 && fields[0] == "subject_id") continue;
            throw FormatError("box CSV line " + std::to_string(line_no) + ": non-numeric field");
        }
        if (!(t.sx > 0.0) || !(t.sy > 0.0)) {
            throw FormatError("box CSV line " + std::to_string(line_no) + ": scalings must be positive");
        }
        rows[fields[0]] = t;
    }
    return ExternalBoxRegressor(std::move(rows));
}

ExternalBoxRegressor ExternalBoxRegressor::from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open box prediction file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_csv_text(ss.str());
}

BoxTransform ExternalBoxRegressor::predict(std::string_view subject_id, const Slice2D&, const LabelMap*) const {
    const auto it = predictions_.find(std::string(subject_id));
    if (it == predictions_.end()) {
        throw InvalidArgument("no external box prediction for subject " + std::string(subject_id));
    }
    return it->second;
}

std::unique_ptr<BoxRegressor> make_box_regressor(std::string_view spec, double gt_margin) {
    if (spec == "heuristic") return std::make_unique<HeuristicBoxRegressor>();
    if (spec == "oracle") return std::make_unique<LabelBoxRegressor>(gt_margin);
    constexpr std::string_view external = "external:";
    if (spec.substr(0, external.size()) == external) {
        return std::make_unique<ExternalBoxRegressor>(
            ExternalBoxRegressor::from_csv(std::filesystem::path(std::string(spec.substr(external.size())))));
    }
    throw ConfigError("unknown box regressor '" + std::string(spec) + "'");
}

}  // namespace scarq
