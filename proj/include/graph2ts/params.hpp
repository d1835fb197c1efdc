#pragma once

// Named parameter storage with Adam moments, and the Adam update itself.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "graph2ts/tape.hpp"
#include "graph2ts/tensor.hpp"

namespace graph2ts {

struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 m;  // first moment
  Tensor2 v;  // second moment
};

class ParamStore {
 public:
  Parameter& add(std::string name, Tensor2 value) {
    if (find(name) != nullptr) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    Tensor2 zeros(value.rows, value.cols, 0.0);
    params_.push_back(Parameter{std::move(name), std::move(value), zeros, zeros});
    return params_.back();
  }

  Parameter* find(const std::string& name) {
    for (auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }
  const Parameter* find(const std::string& name) const {
    for (const auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }
  Parameter& at(const std::string& name) {
    if (auto* p = find(name)) return *p;
    throw std::out_of_range("ParamStore: no parameter named " + name);
  }
  const Parameter& at(const std::string& name) const {
    if (const auto* p = find(name)) return *p;
    throw std::out_of_range("ParamStore: no parameter named " + name);
  }

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  std::uint64_t step = 0;

 private:
  std::vector<Parameter> params_;
};

/// Tape leaves for every parameter, in store order.
inline std::vector<Var> bind(Tape& tape, const ParamStore& store) {
  std::vector<Var> vars;
  vars.reserve(store.size());
  for (const auto& p : store.params()) vars.push_back(tape.leaf(p.value, true));
  return vars;
}

/// As bind, but the leaves read the store in place instead of copying it.
inline std::vector<Var> bind_view(Tape& tape, const ParamStore& store) {
  std::vector<Var> vars;
  vars.reserve(store.size());
  for (const auto& p : store.params()) vars.push_back(tape.view(p.value, true));
  return vars;
}

inline std::vector<Tensor2> collect_grads(const Tape& tape, const std::vector<Var>& vars) {
  std::vector<Tensor2> grads;
  grads.reserve(vars.size());
  for (auto v : vars) grads.push_back(tape.grad(v));
  return grads;
}

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over every parameter; grads are in store order.
inline void adam_step(ParamStore& store, const std::vector<Tensor2>& grads, const AdamConfig& cfg = {}) {
  if (grads.size() != store.size()) throw std::invalid_argument("adam_step: gradient count mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& p = store.params()[i];
    if (!grads[i].same_shape(p.value)) throw std::invalid_argument("adam_step: gradient shape mismatch for " + p.name);
    if (!all_finite(grads[i])) throw std::runtime_error("adam_step: non-finite gradient for " + p.name);
  }
  ++store.step;
  const double t = static_cast<double>(store.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& p = store.params()[i];
    const auto& g = grads[i].data;
    for (std::size_t k = 0; k < g.size(); ++k) {
      p.m.data[k] = cfg.beta1 * p.m.data[k] + (1.0 - cfg.beta1) * g[k];
      p.v.data[k] = cfg.beta2 * p.v.data[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = p.m.data[k] / c1;
      const double vhat = p.v.data[k] / c2;
      p.value.data[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

/// Glorot-uniform weights in [-sqrt(6/(in+out)), +sqrt(6/(in+out))].
inline Tensor2 glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor2 w(fan_in, fan_out);
  for (double& v : w.data) v = dist(rng);
  return w;
}

}  // namespace graph2ts
