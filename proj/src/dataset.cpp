#include "scarq/dataset.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace scarq {

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// File name without ".nii" or ".nii.gz"; empty when neither applies.
std::string nifti_stem(const std::string& name) {
    if (ends_with(name, ".nii.gz")) return name.substr(0, name.size() - 7);
    if (ends_with(name, ".nii")) return name.substr(0, name.size() - 4);
    return {};
}

std::optional<std::filesystem::path> find_nifti(const std::filesystem::path& dir, const std::string& stem) {
    for (const char* ext : {".nii", ".nii.gz"}) {
        const auto p = dir / (stem + ext);
        if (std::filesystem::is_regular_file(p)) return p;
    }
    return std::nullopt;
}

std::optional<bool> emidec_pathology(const std::string& id) {
    const auto pos = id.find("Case_");
    if (pos == std::string::npos || pos + 5 >= id.size()) return std::nullopt;
    const char c = id[pos + 5];
    if (c == 'P' || c == 'p') return true;
    if (c == 'N' || c == 'n') return false;
    return std::nullopt;
}

}  // namespace

std::vector<DatasetEntry> discover_dataset(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());

    std::map<std::string, DatasetEntry> found;
    for (const auto& item : std::filesystem::directory_iterator(dir, ec)) {
        const std::string name = item.path().filename().string();
        if (item.is_regular_file()) {
            const std::string stem = nifti_stem(name);
            if (!ends_with(stem, "_image")) continue;
            const std::string id = stem.substr(0, stem.size() - 6);
            DatasetEntry e;
            e.id = id;
            e.image = item.path();
            e.labels = find_nifti(dir, id + "_label");
            found[id] = e;
        } else if (item.is_directory()) {
            const auto image = find_nifti(item.path() / "Images", name);
            if (!image) continue;
            DatasetEntry e;
            e.id = name;
            e.image = *image;
            e.labels = find_nifti(item.path() / "Contours", name);
            e.pathological = emidec_pathology(name);
            found[name] = e;
        }
    }
    if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
    std::vector<DatasetEntry> out;
    for (auto& [id, e] : found) out.push_back(std::move(e));
    return out;
}

SubjectRecord load_subject(const DatasetEntry& entry, SliceOrder order) {
    SubjectRecord s;
    s.id = entry.id;
    s.image = load_volume(entry.image, order);
    if (entry.labels) s.labels = load_label_map(*entry.labels, order);
    s.pathological = entry.pathological;
    if (!s.pathological && s.labels) s.pathological = scar_mask(*s.labels).count_nonzero() > 0;
    s.validate();
    return s;
}

std::vector<SubjectRecord> load_dataset(const std::filesystem::path& dir, SliceOrder order) {
    std::vector<SubjectRecord> out;
    for (const auto& e : discover_dataset(dir)) out.push_back(load_subject(e, order));
    return out;
}

std::string format_dataset_manifest(const std::vector<DatasetEntry>& entries) {
    std::ostringstream out;
    out << "id,image,labels,pathological\n";
    for (const auto& e : entries) {
        out << e.id << ',' << e.image.string() << ',' << (e.labels ? e.labels->string() : "") << ',';
        if (e.pathological) out << (*e.pathological ? "1" : "0");
        out << '\n';
    }
    return out.str();
}

void save_dataset(const std::filesystem::path& dir, const std::vector<SubjectRecord>& subjects) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create " + dir.string());
    for (const auto& s : subjects) {
        save_volume(dir / (s.id + "_image.nii"), s.image, NiftiDatatype::float32);
        if (s.labels) save_label_map(dir / (s.id + "_label.nii"), *s.labels);
    }
}

}  // namespace scarq
