#pragma once

// Central finite-difference gradient checking against tape gradients.

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "spanev/encoder.hpp"

namespace testgrad {

struct CheckStats {
  long checked = 0;
  long failures = 0;
  double worst_abs_err = 0.0;
  std::string worst = "";
};

// `loss_value` recomputes the scalar loss from the current params. `analytic`
// holds the tape gradient per tensor name. Tolerance: |fd - an| <= atol +
// rtol * max(|fd|, |an|).
inline CheckStats fd_check(spanev::ParamStore& params,
                           const std::map<std::string, spanev::Mat>& analytic,
                           const std::function<double()>& loss_value, double h = 1e-5,
                           double rtol = 1e-4, double atol = 1e-6) {
  CheckStats stats;
  for (auto& [name, tensor] : params.tensors) {
    const spanev::Mat& grad = analytic.at(name);
    for (size_t k = 0; k < tensor.size(); ++k) {
      double saved = tensor.a[k];
      tensor.a[k] = saved + h;
      double up = loss_value();
      tensor.a[k] = saved - h;
      double down = loss_value();
      tensor.a[k] = saved;
      double fd = (up - down) / (2.0 * h);
      double an = grad.a[k];
      double err = std::fabs(fd - an);
      double tol = atol + rtol * std::max(std::fabs(fd), std::fabs(an));
      ++stats.checked;
      if (err > tol) {
        ++stats.failures;
        if (err > stats.worst_abs_err) {
          stats.worst_abs_err = err;
          stats.worst = name + "[" + std::to_string(k) + "]";
        }
      }
    }
  }
  return stats;
}

}  // namespace testgrad
