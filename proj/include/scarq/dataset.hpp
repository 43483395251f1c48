#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scarq/nifti.hpp"
#include "scarq/volume.hpp"

namespace scarq {

struct DatasetEntry {
    std::string id;
    std::filesystem::path image;
    std::optional<std::filesystem::path> labels;
    std::optional<bool> pathological;
};

/// Finds subjects under `dir`. Two layouts are recognised:
///  flat:   <id>_image.nii[.gz] with optional <id>_label.nii[.gz]
///  EMIDEC: <Case>/Images/<Case>.nii[.gz] with optional <Case>/Contours/<Case>.nii[.gz];
///          a 'P' or 'N' after "Case_" marks pathological or normal.
/// Entries are sorted by id. Throws IoError if `dir` is not a directory.
std::vector<DatasetEntry> discover_dataset(const std::filesystem::path& dir);

/// Loads one entry. When the layout carries no pathology flag it is taken from
/// the presence of scar in the labels.
SubjectRecord load_subject(const DatasetEntry& entry, SliceOrder order = SliceOrder::stored);

std::vector<SubjectRecord> load_dataset(const std::filesystem::path& dir, SliceOrder order = SliceOrder::stored);

/// "id,image,labels,pathological" CSV.
std::string format_dataset_manifest(const std::vector<DatasetEntry>& entries);

/// Writes `<id>_image.nii` (float32) and `<id>_label.nii` for each subject.
void save_dataset(const std::filesystem::path& dir, const std::vector<SubjectRecord>& subjects);

}  // namespace scarq
