#include "hvf/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hvf/errors.hpp"

namespace hvf {
namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("gradient check: non-finite ") + what);
}

void fold(GradientCheckReport& r, double analytic, double numeric) {
  require_finite(analytic, "analytic gradient");
  require_finite(numeric, "finite-difference gradient");
  r.max_abs_err = std::max(r.max_abs_err, std::abs(analytic - numeric));
  r.max_rel_err = std::max(r.max_rel_err, gradient_relative_error(analytic, numeric));
  ++r.coordinates;
}

}  // namespace

double gradient_relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

GradientCheckReport gradient_check(const InputFunction& f, std::vector<Tensor> point, double step,
                                   double tol) {
  if (!(step > 0)) throw ConfigError("gradient check step must be positive");

  auto evaluate = [&](const std::vector<Tensor>& at) {
    Graph g;
    std::vector<Var> vars;
    for (const auto& t : at) vars.push_back(g.constant(t));
    const double v = f(g, vars).value().item();
    require_finite(v, "function value");
    return v;
  };

  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (const auto& t : point) vars.push_back(g.input(t));
    Var out = f(g, vars);
    require_finite(out.value().item(), "function value");
    g.backward(out);
    for (const auto& v : vars) analytic.push_back(g.grad(v));
  }

  GradientCheckReport report;
  for (std::size_t k = 0; k < point.size(); ++k) {
    for (std::size_t i = 0; i < point[k].size(); ++i) {
      const double x0 = point[k][i];
      point[k][i] = x0 + step;
      const double fp = evaluate(point);
      point[k][i] = x0 - step;
      const double fm = evaluate(point);
      point[k][i] = x0;
      fold(report, analytic[k][i], (fp - fm) / (2 * step));
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

GradientCheckReport gradient_check(const ParameterFunction& f, ParameterStore& store, double step,
                                   double tol, std::size_t stride) {
  if (!(step > 0)) throw ConfigError("gradient check step must be positive");
  stride = std::max<std::size_t>(stride, 1);

  auto evaluate = [&] {
    Graph g(&store);
    const double v = f(g).value().item();
    require_finite(v, "function value");
    return v;
  };

  {
    Graph g(&store);
    Var out = f(g);
    require_finite(out.value().item(), "function value");
    g.backward(out);
    g.write_parameter_grads(store);
  }

  GradientCheckReport report;
  for (auto& p : store) {
    for (std::size_t i = 0; i < p.value.size(); i += stride) {
      const double x0 = p.value[i];
      p.value[i] = x0 + step;
      const double fp = evaluate();
      p.value[i] = x0 - step;
      const double fm = evaluate();
      p.value[i] = x0;
      fold(report, p.grad[i], (fp - fm) / (2 * step));
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace hvf
