#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "amdnet/errors.hpp"
#include "amdnet/tape.hpp"

namespace amdnet {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
  std::size_t probe_failures = 0;  // non-finite f at a probe point
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed(double tol) const { return probe_failures == 0 && max_rel_err <= tol; }
};

/// Central-difference gradient oracle.
///
/// `forward` evaluates the scalar objective from the current parameter
/// values without touching gradients; `backward` populates param.grad (this
/// routine zeroes grads first). Relative error per coordinate is
/// |a - n| / max(|a|, |n|, 1e-4): the floor turns near-zero-gradient
/// coordinates into an absolute check instead of amplifying finite-difference
/// roundoff.
template <typename T>
GradCheckReport finite_diff_grad_check(ParamStore<T>& params,
                                       const std::function<T()>& forward,
                                       const std::function<void()>& backward,
                                       T h = T(1e-5), std::size_t coords = 200,
                                       std::uint64_t seed = 17) {
  if (!(h >= T(1e-6) && h <= T(1e-3))) throw input_error("finite_diff_grad_check: h outside [1e-6, 1e-3]");
  GradCheckReport rep;

  params.zero_grad();
  backward();

  std::size_t total = params.total_size();
  if (total == 0) return rep;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);

  for (std::size_t c = 0; c < coords; ++c) {
    std::size_t flat = pick(rng);
    std::size_t pi = 0;
    while (flat >= params[pi].value.size()) {
      flat -= params[pi].value.size();
      ++pi;
    }
    Parameter<T>& par = params[pi];
    const T saved = par.value[flat];

    par.value[flat] = saved + h;
    const T fp = forward();
    par.value[flat] = saved - h;
    const T fm = forward();
    par.value[flat] = saved;

    if (!std::isfinite(static_cast<double>(fp)) || !std::isfinite(static_cast<double>(fm))) {
      ++rep.probe_failures;
      ++rep.coords_checked;
      continue;
    }

    const double numeric = (static_cast<double>(fp) - static_cast<double>(fm)) / (2.0 * static_cast<double>(h));
    const double analytic = static_cast<double>(par.grad[flat]);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    const double rel = std::abs(analytic - numeric) / denom;
    ++rep.coords_checked;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_param = par.name;
      rep.worst_index = flat;
      rep.worst_analytic = analytic;
      rep.worst_numeric = numeric;
    }
  }
  return rep;
}

}  // namespace amdnet
