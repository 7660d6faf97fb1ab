#include "vdcnn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace vdcnn {

namespace {

template <typename T>
double evaluate(const ScalarFunction<T>& f, const std::string& name) {
  Tape<T> tape(false);
  const double v = static_cast<double>(tape.value(f(tape)).item());
  if (!std::isfinite(v)) {
    throw NonFiniteError(name, "non-finite objective while perturbing parameter '" + name + "'");
  }
  return v;
}

std::vector<std::size_t> pick_entries(std::size_t size, std::size_t limit, std::uint64_t seed,
                                      std::size_t ordinal) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= size) return idx;
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + ordinal);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

template <typename A, typename N>
GradCheckReport grad_check_mixed(const ScalarFunction<A>& analytic_f,
                                 std::span<Parameter<A>* const> analytic_params,
                                 const ScalarFunction<N>& numeric_f,
                                 std::span<Parameter<N>* const> numeric_params,
                                 const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0)) throw Error("grad_check: epsilon must be positive");
  if (analytic_params.size() != numeric_params.size()) {
    throw Error("grad_check: analytic and numeric parameter lists differ in length");
  }
  zero_grads(analytic_params);
  {
    Tape<A> tape;
    const Var loss = analytic_f(tape);
    if (!std::isfinite(static_cast<double>(tape.value(loss).item()))) {
      throw NonFiniteError("objective", "grad_check: objective is not finite");
    }
    tape.backward(loss);
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < analytic_params.size(); ++pi) {
    const Parameter<A>& pa = *analytic_params[pi];
    Parameter<N>& p = *numeric_params[pi];
    if (pa.value.shape() != p.value.shape()) {
      throw ShapeError("grad_check: twin parameters '" + pa.name + "' differ in shape");
    }
    if (!pa.grad.all_finite()) {
      throw NonFiniteError(pa.name, "non-finite analytic gradient for parameter '" + pa.name + "'");
    }
    ParameterCheck check{pa.name, 0.0, 0};
    for (std::size_t i : pick_entries(p.value.size(), options.max_entries_per_parameter,
                                      options.seed, pi)) {
      const N original = p.value[i];
      const N plus = static_cast<N>(original + options.epsilon);
      const N minus = static_cast<N>(original - options.epsilon);
      p.value[i] = plus;
      const double f_plus = evaluate(numeric_f, p.name);
      p.value[i] = minus;
      const double f_minus = evaluate(numeric_f, p.name);
      p.value[i] = original;

      const double step = static_cast<double>(plus) - static_cast<double>(minus);
      const double numeric = (f_plus - f_minus) / step;
      const double analytic = static_cast<double>(pa.grad[i]);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++check.entries_checked;
      check.max_rel_error = std::max(check.max_rel_error, rel);
      if (report.worst_parameter.empty() || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_parameter = pa.name;
        report.worst_index = i;
      }
    }
    report.per_parameter.push_back(std::move(check));
  }
  return report;
}

template <typename T>
GradCheckReport grad_check(const ScalarFunction<T>& f, std::span<Parameter<T>* const> params,
                           const GradCheckOptions& options) {
  return grad_check_mixed<T, T>(f, params, f, params, options);
}

template GradCheckReport grad_check<float>(const ScalarFunction<float>&,
                                           std::span<Parameter<float>* const>,
                                           const GradCheckOptions&);
template GradCheckReport grad_check<double>(const ScalarFunction<double>&,
                                            std::span<Parameter<double>* const>,
                                            const GradCheckOptions&);

template GradCheckReport grad_check_mixed<float, double>(const ScalarFunction<float>&,
                                                         std::span<Parameter<float>* const>,
                                                         const ScalarFunction<double>&,
                                                         std::span<Parameter<double>* const>,
                                                         const GradCheckOptions&);

}  // namespace vdcnn
