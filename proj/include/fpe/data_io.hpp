#pragma once

#include <string>
#include <vector>

#include "fpe/matrix.hpp"

namespace fpe {

/// Real-valued inputs with integer class labels, as loaded from disk.
struct LabeledMatrixDataset {
    Matrix x;                     // n x d
    std::vector<int> y;           // class indices in [0, class_count)
    std::size_t class_count = 0;
    std::string source;
};

/// IDX image/label pair (MNIST family). Pixels are scaled to [0,1] by /255.
/// Throws FormatError with a byte offset on any header or length violation.
LabeledMatrixDataset load_idx(const std::string& images_path, const std::string& labels_path);

/// FPEE container: magic "FPEE", u16 version 1, u32 n/d/C (little-endian),
/// n*d little-endian f32 features row-major, then n u32 labels.
LabeledMatrixDataset load_fpee(const std::string& path);
void save_fpee(const LabeledMatrixDataset& dataset, const std::string& path);

/// CSV fallback with header row "label,f0,f1,...".
LabeledMatrixDataset load_csv(const std::string& path);

}  // namespace fpe
