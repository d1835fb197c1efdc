#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "graph2ts/params.hpp"
#include "graph2ts/tape.hpp"

namespace graph2ts {

/// Builds a scalar objective on a fresh tape from parameter leaves given in store order.
using Objective = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckOptions {
  double h = 1e-5;
  // Denominator floor for the relative error, so coordinates whose true
  // gradient is ~0 are judged on absolute error instead.
  double floor = 1e-3;
  // Check every stride-th coordinate of each parameter (1 = all).
  std::size_t stride = 1;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences against tape gradients, coordinate by coordinate.
/// Parameter values are restored before returning.
inline GradCheckReport grad_check(ParamStore& store, const Objective& f, const GradCheckOptions& opt = {}) {
  std::vector<Tensor2> analytic;
  {
    Tape tape;
    auto vars = bind_view(tape, store);
    Var out = f(tape, vars);
    tape.backward(out);
    analytic = collect_grads(tape, vars);
  }
  auto eval = [&] {
    Tape tape;
    auto vars = bind_view(tape, store);
    return tape.value(f(tape, vars)).item();
  };

  GradCheckReport rep;
  for (std::size_t pi = 0; pi < store.size(); ++pi) {
    auto& p = store.params()[pi];
    for (std::size_t k = 0; k < p.value.size(); k += std::max<std::size_t>(opt.stride, 1)) {
      const double orig = p.value.data[k];
      p.value.data[k] = orig + opt.h;
      const double up = eval();
      p.value.data[k] = orig - opt.h;
      const double down = eval();
      p.value.data[k] = orig;
      const double numeric = (up - down) / (2.0 * opt.h);
      const double a = analytic[pi].data[k];
      const double err = relative_error(a, numeric, opt.floor);
      ++rep.checked;
      if (err > rep.max_rel_error || rep.checked == 1) {
        rep.max_rel_error = err;
        rep.worst_param = p.name;
        rep.worst_index = k;
        rep.worst_analytic = a;
        rep.worst_numeric = numeric;
      }
    }
  }
  return rep;
}

}  // namespace graph2ts
