#pragma once

#include <string>

#include "rfseg/types.hpp"

namespace rfseg {

// Containers: NIfTI-1 (.nii / .nii.gz) and the RFV1 fixture format (.rfv).
// Both layouts are documented byte-exactly in docs/formats.md.

Volume load_volume(const std::string& path);
void save_volume(const std::string& path, const Volume& volume);

LabelVolume load_labels(const std::string& path);
void save_labels(const std::string& path, const LabelVolume& labels);

}  // namespace rfseg
