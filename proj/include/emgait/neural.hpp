#pragma once

// 1D convolutional network trained on raw (window_len x channels) windows:
//   conv(F1,K1)+ReLU -> maxpool -> conv(F2,K2)+ReLU -> maxpool -> flatten
//   -> dense(D1)+ReLU -> dropout -> dense(D2)+ReLU -> dropout -> dense(2)
// All math is double precision. Parameters live in one flat vector whose
// layout is described by ParamLayout.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "emgait/matrix.hpp"
#include "emgait/rng.hpp"
#include "emgait/windowing_features.hpp"

namespace emgait::nn {

using Labels = std::vector<int>;

struct ConvSpec {
  int filters = 0;
  int kernel = 0;
  bool operator==(const ConvSpec&) const = default;
};

enum class Selection { test_accuracy, val_accuracy };

struct DcnnConfig {
  int input_len = static_cast<int>(features::kWindowLen);
  int input_channels = static_cast<int>(kNumChannels);
  ConvSpec conv1{32, 5};
  ConvSpec conv2{64, 3};
  int pool_size = 2;
  int dense1_units = 100;
  int dense2_units = 50;
  double dropout_rate = 0.30;
  int output_units = 2;
  double learning_rate = 1e-3;
  int batch_size = 256;
  int max_epochs = 1000;
  int patience = 100;
  std::uint64_t seed = 0;
  Selection selection = Selection::test_accuracy;
  double val_fraction = 0.1;

  bool operator==(const DcnnConfig&) const = default;
};

void validate(const DcnnConfig& cfg);
nlohmann::json to_json(const DcnnConfig& cfg);
DcnnConfig config_from_json(const nlohmann::json& j);

struct TensorSlot {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

struct ParamLayout {
  std::size_t conv1_len = 0, pool1_len = 0, conv2_len = 0, pool2_len = 0, flat = 0;
  TensorSlot conv1_w, conv1_b, conv2_w, conv2_b, dense1_w, dense1_b, dense2_w, dense2_b, out_w, out_b;
  std::size_t total = 0;

  std::vector<TensorSlot> tensors() const;
};

/// Throws ShapeMismatch when the time axis does not survive both stages.
ParamLayout layout_for(const DcnnConfig& cfg);

struct DcnnModel {
  DcnnConfig config;
  ParamLayout layout;
  std::vector<double> params;
  bool training = false;

  std::span<double> tensor(const TensorSlot& s) { return {params.data() + s.offset, s.size}; }
  std::span<const double> tensor(const TensorSlot& s) const { return {params.data() + s.offset, s.size}; }
};

/// He-uniform for the ReLU layers, Glorot-uniform for the output layer, zero biases.
DcnnModel init_model(const DcnnConfig& cfg);

// ---- layer primitives ----

/// Valid cross-correlation. input: L x C, weights: F x (K*C) holding F x K x C,
/// result (L-K+1) x F, optionally followed by ReLU.
Matrix conv1d_forward(const Matrix& input, const Matrix& weights, std::span<const double> bias, int kernel,
                      bool relu = true);

struct ConvGrads {
  Matrix d_input;
  Matrix d_weights;
  std::vector<double> d_bias;
};

/// `output` is the post-activation forward result; `relu` must match the forward call.
ConvGrads conv1d_backward(const Matrix& input, const Matrix& weights, int kernel, const Matrix& output,
                          const Matrix& d_output, bool relu = true);

struct PoolResult {
  Matrix output;
  std::vector<std::size_t> argmax;  // flat index into the input, per output element
};

PoolResult maxpool1d(const Matrix& input, int pool);
Matrix maxpool1d_backward(const PoolResult& fwd, std::size_t in_rows, std::size_t in_cols, const Matrix& d_output);

/// y = W x + b, W is out x in.
std::vector<double> dense_forward(std::span<const double> x, const Matrix& W, std::span<const double> b,
                                  bool relu);

struct DenseGrads {
  std::vector<double> d_x;
  Matrix d_W;
  std::vector<double> d_b;
};

DenseGrads dense_backward(std::span<const double> x, const Matrix& W, std::span<const double> y,
                          std::span<const double> d_y, bool relu);

struct DropoutResult {
  std::vector<double> output;
  std::vector<double> mask;  // 0 or 1/(1-rate)
};

DropoutResult dropout(std::span<const double> x, double rate, bool training, Rng& rng);

std::vector<double> softmax(std::span<const double> logits);

struct XentResult {
  double loss = 0.0;
  std::vector<double> grad;
};

XentResult softmax_xent(std::span<const double> logits, int label);

// ---- whole network ----

/// Logits for one window in eval mode.
std::vector<double> forward(const DcnnModel& model, std::span<const double> window);

/// Mean cross-entropy over the batch and its gradient with respect to every
/// parameter (same layout as model.params). Dropout is active when
/// `dropout_rng` is non-null. Throws NonFiniteGradient.
double loss_and_grad(const DcnnModel& model, std::span<const double> windows, std::span<const int> labels,
                     std::vector<double>& grad, Rng* dropout_rng);

/// Mean cross-entropy in eval mode.
double batch_loss(const DcnnModel& model, std::span<const double> windows, std::span<const int> labels);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<double> m, v;
};

/// Throws NonFiniteGradient before touching the parameters.
void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state, double lr);

Labels predict_dcnn(const DcnnModel& model, const features::WindowTensor& windows);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalResult evaluate_dcnn(const DcnnModel& model, const features::WindowTensor& windows);

struct EpochRecord {
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;      // epoch whose parameters were returned
  int best_val_epoch = -1;  // epoch with the lowest validation loss
  int stopped_epoch = -1;   // last epoch run
  Selection selection = Selection::test_accuracy;

  bool operator==(const TrainHistory&) const = default;
};

nlohmann::json to_json(const TrainHistory& h);

struct TrainResult {
  DcnnModel model;
  TrainHistory history;
};

/// Mini-batch Adam from `initial`. Shuffling and dropout draw from `seed`.
/// Throws EmptySplit when train or validation (or test, under test selection) is empty.
TrainResult train_dcnn(const DcnnModel& initial, const features::WindowTensor& train,
                       const features::WindowTensor& val, const features::WindowTensor& test, std::uint64_t seed);

// ---- checkpoint container ----
// "EMGN" | u32 version=1 | u32 config_json_len | config JSON bytes | u64 n_params | n_params x f64 LE

using Blob = std::vector<std::uint8_t>;

Blob serialize(const DcnnModel& model);
/// Throws CorruptBlob.
DcnnModel deserialize(std::span<const std::uint8_t> blob);

Blob save_initial_weights(const DcnnConfig& cfg);
inline DcnnModel restore(std::span<const std::uint8_t> blob) { return deserialize(blob); }
std::string blob_hash(std::span<const std::uint8_t> blob);

void write_blob(const Blob& blob, const std::string& path);
Blob read_blob(const std::string& path);

}  // namespace emgait::nn
