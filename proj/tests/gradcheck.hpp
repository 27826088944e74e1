#pragma once

// Central finite-difference check of the network gradient.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "emgait/neural.hpp"

namespace gradcheck {

struct Report {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
};

inline double rel_error(double a, double n) {
  const double scale = std::max(std::abs(a), std::abs(n));
  if (scale < 1e-8) return 0.0;
  return std::abs(a - n) / scale;
}

/// Checks every parameter when per_tensor == 0, otherwise that many sampled
/// entries per tensor. With dropout_seed set, each evaluation reuses the same
/// dropout draws.
inline Report run(const emgait::nn::DcnnModel& model, const std::vector<double>& windows,
                  const std::vector<int>& labels, double h, std::size_t per_tensor, const std::uint64_t* dropout_seed,
                  std::uint64_t sample_seed = 1) {
  using namespace emgait;
  auto eval = [&](const nn::DcnnModel& m, std::vector<double>& grad) {
    if (dropout_seed) {
      Rng r(*dropout_seed);
      return nn::loss_and_grad(m, windows, labels, grad, &r);
    }
    return nn::loss_and_grad(m, windows, labels, grad, nullptr);
  };
  std::vector<double> analytic, scratch;
  eval(model, analytic);
  nn::DcnnModel probe = model;
  std::mt19937_64 pick(sample_seed);
  Report rep;
  for (const auto& slot : model.layout.tensors()) {
    std::vector<std::size_t> idx;
    if (per_tensor == 0 || per_tensor >= slot.size) {
      for (std::size_t i = 0; i < slot.size; ++i) idx.push_back(i);
    } else {
      std::uniform_int_distribution<std::size_t> u(0, slot.size - 1);
      for (std::size_t i = 0; i < per_tensor; ++i) idx.push_back(u(pick));
    }
    for (std::size_t i : idx) {
      const std::size_t p = slot.offset + i;
      const double orig = probe.params[p];
      probe.params[p] = orig + h;
      const double up = eval(probe, scratch);
      probe.params[p] = orig - h;
      const double down = eval(probe, scratch);
      probe.params[p] = orig;
      const double err = rel_error(analytic[p], (up - down) / (2 * h));
      ++rep.checked;
      if (err > rep.max_rel_error) {
        rep.max_rel_error = err;
        rep.worst_tensor = slot.name;
      }
    }
  }
  return rep;
}

/// Five-point central difference of the cross-entropy loss in logit j.
inline double xent_numeric(const std::vector<double>& z, int label, std::size_t j, double h = 1e-3) {
  auto at = [&](double d) {
    auto p = z;
    p[j] += d;
    return emgait::nn::softmax_xent(p, label).loss;
  };
  return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
}

inline emgait::nn::DcnnConfig small_config() {
  emgait::nn::DcnnConfig c;
  c.input_len = 12;
  c.input_channels = 2;
  c.conv1 = {3, 3};
  c.conv2 = {4, 2};
  c.dense1_units = 6;
  c.dense2_units = 5;
  c.seed = 4;
  return c;
}

inline void random_batch(std::size_t n, std::size_t values, std::uint64_t seed, std::vector<double>& windows,
                         std::vector<int>& labels) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  windows.resize(n * values);
  for (double& v : windows) v = g(rng);
  labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(rng() & 1U);
}

}  // namespace gradcheck
