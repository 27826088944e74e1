#include "emgait/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "emgait/error.hpp"

namespace fs = std::filesystem;

namespace emgait::io {
namespace {

constexpr char kMagic[4] = {'E', 'M', 'G', 'A'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kDtypeF64 = 1;

template <class T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void put(std::ofstream& out, T v) {
  v = to_le(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const fs::path& p) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error(Errc::malformed_file, p.string() + ": truncated");
  return to_le(v);
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::io_error, "cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_file, p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  if (!out) throw Error(Errc::io_error, "cannot write " + p.string());
  out << j.dump() << '\n';
}

std::vector<int> label_ints(const std::vector<features::PhaseLabel>& labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (auto l : labels) out.push_back(static_cast<int>(l));
  return out;
}

std::vector<features::PhaseLabel> parse_labels(const nlohmann::json& j) {
  std::vector<features::PhaseLabel> out;
  for (int v : j.get<std::vector<int>>()) {
    if (v != 0 && v != 1) throw Error(Errc::malformed_file, "label must be 0 or 1");
    out.push_back(static_cast<features::PhaseLabel>(v));
  }
  return out;
}

}  // namespace

void write_f64_array(const fs::path& path, const F64Array& array) {
  std::uint64_t count = 1;
  for (auto d : array.dims) count *= d;
  if (count != array.values.size()) throw Error(Errc::shape_mismatch, "dims do not match payload size");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, kDtypeF64);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(array.dims.size()));
  for (auto d : array.dims) put<std::uint64_t>(out, d);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(array.values.data()),
              static_cast<std::streamsize>(array.values.size() * sizeof(double)));
  } else {
    for (double v : array.values) put<double>(out, v);
  }
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

F64Array read_f64_array(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(Errc::malformed_file, path.string() + ": bad magic");
  }
  if (get<std::uint32_t>(in, path) != kVersion) throw Error(Errc::malformed_file, path.string() + ": bad version");
  if (get<std::uint32_t>(in, path) != kDtypeF64) throw Error(Errc::malformed_file, path.string() + ": dtype not f64");
  const auto rank = get<std::uint32_t>(in, path);
  if (rank > 8) throw Error(Errc::malformed_file, path.string() + ": implausible rank");
  F64Array a;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    a.dims.push_back(get<std::uint64_t>(in, path));
    count *= a.dims.back();
  }
  a.values.resize(count);
  for (auto& v : a.values) v = get<double>(in, path);
  return a;
}

fs::path sidecar_path(const fs::path& container) {
  fs::path p = container;
  p += ".json";
  return p;
}

void write_window_tensor(const fs::path& path, const features::WindowTensor& t) {
  write_f64_array(path, {{t.size(), t.window_len, kNumChannels}, t.data});
  nlohmann::json j;
  j["kind"] = "window_tensor";
  j["window_len"] = t.window_len;
  j["stride"] = t.stride;
  j["channel_names"] = std::vector<std::string>(kChannelNames.begin(), kChannelNames.end());
  j["labels"] = label_ints(t.labels);
  j["subject_ids"] = t.subject_ids;
  j["group"] = t.group;
  j["group_thresholds"] = nlohmann::json::array();
  for (const auto& th : t.group_thresholds) j["group_thresholds"].push_back(th.theta);
  write_json(sidecar_path(path), j);
}

features::WindowTensor read_window_tensor(const fs::path& path) {
  const F64Array a = read_f64_array(path);
  const nlohmann::json j = read_json(sidecar_path(path));
  if (a.dims.size() != 3 || a.dims[2] != kNumChannels || j.value("kind", "") != "window_tensor") {
    throw Error(Errc::malformed_file, path.string() + ": not an N x L x 5 window tensor");
  }
  features::WindowTensor t;
  try {
    t.window_len = a.dims[1];
    t.stride = j.at("stride").get<std::size_t>();
    t.data = a.values;
    t.labels = parse_labels(j.at("labels"));
    t.subject_ids = j.at("subject_ids").get<std::vector<std::string>>();
    t.group = j.at("group").get<std::vector<std::uint32_t>>();
    for (const auto& th : j.at("group_thresholds")) {
      features::ZcThresholds z;
      z.theta = th.get<std::array<double, kNumChannels>>();
      t.group_thresholds.push_back(z);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_file, path.string() + ": " + e.what());
  }
  if (t.labels.size() != a.dims[0] || t.subject_ids.size() != a.dims[0] || t.group.size() != a.dims[0]) {
    throw Error(Errc::malformed_file, path.string() + ": sidecar length mismatch");
  }
  return t;
}

void write_feature_matrix(const fs::path& path, const features::FeatureMatrix& fm) {
  write_f64_array(path, {{fm.X.rows(), fm.X.cols()}, fm.X.data()});
  nlohmann::json j;
  j["kind"] = "feature_matrix";
  j["feature_names"] = fm.feature_names;
  j["labels"] = label_ints(fm.labels);
  j["subject_ids"] = fm.subject_ids;
  write_json(sidecar_path(path), j);
}

features::FeatureMatrix read_feature_matrix(const fs::path& path) {
  F64Array a = read_f64_array(path);
  const nlohmann::json j = read_json(sidecar_path(path));
  if (a.dims.size() != 2 || j.value("kind", "") != "feature_matrix") {
    throw Error(Errc::malformed_file, path.string() + ": not a feature matrix");
  }
  features::FeatureMatrix fm;
  try {
    fm.X = Matrix(a.dims[0], a.dims[1], std::move(a.values));
    fm.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    fm.labels = parse_labels(j.at("labels"));
    fm.subject_ids = j.at("subject_ids").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_file, path.string() + ": " + e.what());
  }
  if (fm.labels.size() != fm.X.rows() || fm.subject_ids.size() != fm.X.rows()) {
    throw Error(Errc::malformed_file, path.string() + ": sidecar length mismatch");
  }
  return fm;
}

}  // namespace emgait::io
