#pragma once

// On-disk dataset layout: a directory of drive files named drive_<seed>.rkd and
// a parallel directory of label files sharing the stem.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "radkd/error.hpp"
#include "radkd/io.hpp"
#include "radkd/train.hpp"

namespace radkd {

inline constexpr const char* kDriveExt = ".rkd";
inline constexpr const char* kLabelExt = ".labels";

inline std::string drive_file_name(std::uint64_t seed) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "drive_%06llu%s", static_cast<unsigned long long>(seed), kDriveExt);
    return buf;
}

/// Regular files in `dir` with the given extension, sorted by name.
inline std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir, const std::string& ext) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) fail(ErrorKind::Io, dir.string() + ": not a directory");
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<std::filesystem::path> list_drives(const std::filesystem::path& dir) {
    auto drives = list_files(dir, kDriveExt);
    if (drives.empty()) fail(ErrorKind::UnusableDataset, dir.string() + ": no drive files");
    return drives;
}

inline std::filesystem::path labels_path_for(const std::filesystem::path& labels_dir,
                                             const std::filesystem::path& drive_path) {
    return labels_dir / (drive_path.stem().string() + kLabelExt);
}

/// Drive files selected by `split` ("all", "train", "val" or "test").
inline std::vector<std::filesystem::path> select_split(const std::vector<std::filesystem::path>& drives,
                                                       const TrainConfig& cfg, const std::string& split) {
    if (split == "all") return drives;
    const auto s = split_drives(drives.size(), cfg);
    const std::vector<std::size_t>* idx = nullptr;
    if (split == "train") idx = &s.train;
    else if (split == "val") idx = &s.val;
    else if (split == "test") idx = &s.test;
    else fail(ErrorKind::Config, "unknown split '" + split + "' (all, train, val, test)");
    std::vector<std::filesystem::path> out;
    for (auto i : *idx) out.push_back(drives[i]);
    return out;
}

/// Selectively filtered training samples from every drive in `drives`, loaded one at a time.
inline std::vector<LabeledSample> load_samples(const std::vector<std::filesystem::path>& drives,
                                               const std::filesystem::path& labels_dir, std::size_t crop_offset) {
    std::vector<LabeledSample> out;
    for (const auto& p : drives) {
        const Drive d = read_drive(p);
        const auto labels = read_labels_for(labels_path_for(labels_dir, p), d);
        auto s = make_samples(d, labels, crop_offset);
        for (auto& x : s) out.push_back(std::move(x));
    }
    return out;
}

} // namespace radkd
