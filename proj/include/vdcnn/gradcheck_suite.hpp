#pragma once

// Finite-difference checks of every differentiable operator plus a tiny full model.

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "vdcnn/grad_check.hpp"
#include "vdcnn/tensor.hpp"

namespace vdcnn {

struct GradCheckCase {
  std::string name;
  std::function<GradCheckReport()> run;
};

struct GradCheckCaseResult {
  std::string name;
  double max_rel_error = 0;
  std::string worst_parameter;
  double seconds = 0;
  bool passed = false;
};

/// 1e-5 for f64, 1e-3 for f32.
double gradcheck_threshold(Precision precision);

/// Difference step and denominator floor used by the standard cases at each precision.
GradCheckOptions gradcheck_options(Precision precision);

/// matmul, elementwise, embedding, temporal_conv (stride 1 and 2), temporal_batch_norm,
/// temporal_max_pool, half_k_max_pool, k_max_pool, fully_connected, softmax_cross_entropy
/// and depth-9 models at width 1/8, s=32, k=4, m=2, without and with shortcuts. Inputs keep clear of ReLU zeros and pooling ties.
std::vector<GradCheckCase> standard_gradcheck_cases(Precision precision);

/// Runs every case, printing one line each. A case that throws counts as failed.
std::vector<GradCheckCaseResult> run_gradcheck_cases(const std::vector<GradCheckCase>& cases,
                                                     double threshold, std::ostream& out);

}  // namespace vdcnn
