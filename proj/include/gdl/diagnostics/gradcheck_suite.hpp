#pragma once

#include <functional>
#include <string>
#include <vector>

namespace gdl::diagnostics {

struct GradcheckItem {
  std::string name;
  /// Largest relative error between analytic and central-difference gradients.
  std::function<double()> run;
};

struct GradcheckRow {
  std::string name;
  double max_rel_error = 0.0;
  double seconds = 0.0;
  bool pass = false;
};

inline constexpr double kGradcheckTolerance = 1e-4;

/// Every differentiable layer plus one tiny end-to-end model per
/// architecture. The negative control wraps an op whose backward rule drops
/// a factor of two and must fail.
std::vector<GradcheckItem> gradcheck_items(bool negative_control = false);

std::vector<GradcheckRow> run_gradcheck_suite(bool negative_control = false,
                                              double tolerance = kGradcheckTolerance);

/// Header plus one tab-separated line per row.
std::string format_gradcheck_tsv(const std::vector<GradcheckRow>& rows);

}  // namespace gdl::diagnostics
