#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vdcnn/autodiff.hpp"

namespace vdcnn {

struct GradCheckOptions {
  /// Half-width of the central difference.
  double epsilon = 1e-6;
  /// 0 checks every entry; otherwise a seeded random subset of this many per parameter.
  std::size_t max_entries_per_parameter = 0;
  std::uint64_t seed = 0;
  /// Smallest denominator of the relative error. Gradients below it are compared absolutely.
  double denominator_floor = 1e-8;
};

struct ParameterCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
};

struct GradCheckReport {
  /// max |analytic - numeric| / max(|analytic|, |numeric|, denominator_floor)
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::vector<ParameterCheck> per_parameter;
};

/// Builds a scalar on the given tape from the parameters under test.
template <typename T>
using ScalarFunction = std::function<Var(Tape<T>&)>;

/// Compares backward() against central differences of f for every (or a
/// sampled subset of every) parameter entry. f must be deterministic.
/// On return each parameter's grad holds the analytic gradient.
/// Throws NonFiniteError naming the parameter if f goes non-finite.
template <typename T>
GradCheckReport grad_check(const ScalarFunction<T>& f, std::span<Parameter<T>* const> params,
                           const GradCheckOptions& options = {});

/// Same comparison with the analytic side in precision A and the finite differences taken
/// on a twin function in precision N (typically float against double). The two parameter
/// lists must correspond one to one.
template <typename A, typename N>
GradCheckReport grad_check_mixed(const ScalarFunction<A>& analytic_f,
                                 std::span<Parameter<A>* const> analytic_params,
                                 const ScalarFunction<N>& numeric_f,
                                 std::span<Parameter<N>* const> numeric_params,
                                 const GradCheckOptions& options = {});

}  // namespace vdcnn
