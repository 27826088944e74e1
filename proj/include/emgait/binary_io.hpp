#pragma once

// Little-endian f64 array container:
//   bytes 0-3   magic "EMGA"
//   u32         format version (1)
//   u32         dtype (1 = f64)
//   u32         rank
//   u64 x rank  dimensions
//   f64 x prod(dims) row-major payload
// Window tensors and feature matrices write a JSON sidecar next to the
// container (<path>.json) holding names, labels, subject ids and groups.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "emgait/windowing_features.hpp"

namespace emgait::io {

struct F64Array {
  std::vector<std::uint64_t> dims;
  std::vector<double> values;
};

void write_f64_array(const std::filesystem::path& path, const F64Array& array);
F64Array read_f64_array(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& container);

void write_window_tensor(const std::filesystem::path& path, const features::WindowTensor& tensor);
features::WindowTensor read_window_tensor(const std::filesystem::path& path);

void write_feature_matrix(const std::filesystem::path& path, const features::FeatureMatrix& fm);
features::FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

}  // namespace emgait::io
