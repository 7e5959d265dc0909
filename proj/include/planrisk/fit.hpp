#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace planrisk {

// Rows are samples, columns named features; missing entries are nullopt and
// drop the row from any fit that selects that column.
struct FeatureMatrix {
  std::vector<std::string> column_names;
  std::vector<std::string> sample_ids;
  std::vector<std::string> scene_ids;
  std::vector<std::vector<std::optional<double>>> rows;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return column_names.size(); }
  int column_index(const std::string& name) const;  // -1 when absent
};

struct FitResult {
  std::string kind;  // "ridge" | "logistic"
  double intercept = 0.0;
  std::vector<double> coefficients;  // in z-scored space
  std::vector<double> column_mean;
  std::vector<double> column_std;   // constant columns pinned to 1
  double lambda_reg = 0.0;
  std::size_t rows_used = 0;
  std::size_t rows_dropped = 0;  // rows skipped for missing features

  // linear predictor: intercept + sum beta_j (x_j - mean_j) / std_j
  double predict(const std::vector<double>& x) const;
};

// Columns are z-scored on the training rows; (Z'Z + lambda I) beta = Z'y_c
// with the intercept outside the penalty and equal to mean(y).
FitResult ridge_fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                    double lambda_reg);

// L2-penalized logistic regression by Newton iterations with step halving;
// converges when the penalized-gradient infinity norm drops below 1e-8 or
// after 500 iterations. Requires both classes present.
FitResult logistic_fit(const std::vector<std::vector<double>>& x, const std::vector<bool>& y,
                       double lambda_reg);

// Penalized negative log-likelihood and its gradient at beta (intercept
// first, then one coefficient per z-scored column); exposed for gradient
// verification.
std::pair<double, std::vector<double>> logistic_nll_grad(
    const std::vector<std::vector<double>>& z, const std::vector<bool>& y,
    const std::vector<double>& beta, double lambda_reg);

}  // namespace planrisk
