#include <cstdio>
#include <cstring>

#include "emgait/error.hpp"
#include "emgait/matrix.hpp"
#include "emgait/rng.hpp"

namespace emgait {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::malformed_file: return "MalformedFile";
    case Errc::non_monotonic_events: return "NonMonotonicEvents";
    case Errc::empty_channel: return "EmptyChannel";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::too_few_events: return "TooFewEvents";
    case Errc::out_of_cycle: return "OutOfCycle";
    case Errc::invalid_band: return "InvalidBand";
    case Errc::signal_too_short: return "SignalTooShort";
    case Errc::invalid_factor: return "InvalidFactor";
    case Errc::not_fitted: return "NotFitted";
    case Errc::degenerate_input: return "DegenerateInput";
    case Errc::bad_k: return "BadK";
    case Errc::missing_class: return "MissingClass";
    case Errc::empty_input: return "EmptyInput";
    case Errc::singular_covariance: return "SingularCovariance";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::non_finite_gradient: return "NonFiniteGradient";
    case Errc::empty_split: return "EmptySplit";
    case Errc::corrupt_blob: return "CorruptBlob";
    case Errc::too_few_subjects: return "TooFewSubjects";
    case Errc::io_error: return "IoError";
  }
  return "Unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(Errc::shape_mismatch, "matrix data size does not match rows*cols");
  }
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = row(indices[i]);
    std::memcpy(out.data_.data() + i * cols_, src.data(), cols_ * sizeof(double));
  }
  return out;
}

Matrix Matrix::left_cols(std::size_t k) const {
  if (k > cols_) throw Error(Errc::shape_mismatch, "left_cols: k exceeds column count");
  Matrix out(rows_, k);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < k; ++c) out(r, c) = (*this)(r, c);
  }
  return out;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) noexcept {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex_digest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace emgait
