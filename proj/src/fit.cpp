#include "planrisk/fit.hpp"

#include <algorithm>
#include <cmath>

#include "planrisk/errors.hpp"

namespace planrisk {

int FeatureMatrix::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < column_names.size(); ++i) {
    if (column_names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

double FitResult::predict(const std::vector<double>& x) const {
  double eta = intercept;
  for (std::size_t j = 0; j < coefficients.size(); ++j) {
    eta += coefficients[j] * (x[j] - column_mean[j]) / column_std[j];
  }
  return eta;
}

namespace {

// Gaussian elimination with partial pivoting; the systems here are tiny
// (<= 14 columns), conditioning is handled by the ridge term.
std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) < 1e-300) throw DataError("singular design matrix");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * x[c];
    x[i] = acc / a[i][i];
  }
  return x;
}

struct Standardized {
  std::vector<std::vector<double>> z;
  std::vector<double> mean;
  std::vector<double> stddev;
};

Standardized standardize(const std::vector<std::vector<double>>& x) {
  const std::size_t n = x.size();
  const std::size_t p = n > 0 ? x[0].size() : 0;
  Standardized out;
  out.mean.assign(p, 0.0);
  out.stddev.assign(p, 1.0);
  for (const auto& row : x) {
    for (std::size_t j = 0; j < p; ++j) out.mean[j] += row[j];
  }
  for (std::size_t j = 0; j < p; ++j) out.mean[j] /= static_cast<double>(n);
  std::vector<double> var(p, 0.0);
  for (const auto& row : x) {
    for (std::size_t j = 0; j < p; ++j) {
      const double d = row[j] - out.mean[j];
      var[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    out.stddev[j] = sd > 0.0 ? sd : 1.0;  // constant column: std pinned to 1
  }
  out.z.assign(n, std::vector<double>(p));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      out.z[i][j] = (x[i][j] - out.mean[j]) / out.stddev[j];
    }
  }
  return out;
}

}  // namespace

FitResult ridge_fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                    double lambda_reg) {
  if (x.size() != y.size()) throw ArgumentError("ridge_fit: row count mismatch");
  if (x.size() < 2) throw DataError("ridge_fit needs at least two rows");
  if (lambda_reg < 0) throw ArgumentError("ridge_fit: lambda must be >= 0");
  const std::size_t n = x.size();
  const std::size_t p = x[0].size();

  const Standardized st = standardize(x);
  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  y_mean /= static_cast<double>(n);

  FitResult fit;
  fit.kind = "ridge";
  fit.intercept = y_mean;
  fit.column_mean = st.mean;
  fit.column_std = st.stddev;
  fit.lambda_reg = lambda_reg;
  fit.rows_used = n;
  if (p == 0) return fit;

  std::vector<std::vector<double>> gram(p, std::vector<double>(p, 0.0));
  std::vector<double> rhs(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      rhs[j] += st.z[i][j] * (y[i] - y_mean);
      for (std::size_t k = j; k < p; ++k) gram[j][k] += st.z[i][j] * st.z[i][k];
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t k = 0; k < j; ++k) gram[j][k] = gram[k][j];
    gram[j][j] += lambda_reg;
  }
  fit.coefficients = solve_linear(std::move(gram), std::move(rhs));
  return fit;
}

std::pair<double, std::vector<double>> logistic_nll_grad(
    const std::vector<std::vector<double>>& z, const std::vector<bool>& y,
    const std::vector<double>& beta, double lambda_reg) {
  const std::size_t n = z.size();
  const std::size_t p = beta.size() - 1;  // beta[0] is the intercept
  double nll = 0.0;
  std::vector<double> grad(beta.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = beta[0];
    for (std::size_t j = 0; j < p; ++j) eta += beta[j + 1] * z[i][j];
    // log(1 + exp(eta)) without overflow
    const double log1pe = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    nll += log1pe - (y[i] ? eta : 0.0);
    const double prob = 1.0 / (1.0 + std::exp(-eta));
    const double resid = prob - (y[i] ? 1.0 : 0.0);
    grad[0] += resid;
    for (std::size_t j = 0; j < p; ++j) grad[j + 1] += resid * z[i][j];
  }
  for (std::size_t j = 0; j < p; ++j) {
    nll += 0.5 * lambda_reg * beta[j + 1] * beta[j + 1];
    grad[j + 1] += lambda_reg * beta[j + 1];
  }
  return {nll, grad};
}

FitResult logistic_fit(const std::vector<std::vector<double>>& x, const std::vector<bool>& y,
                       double lambda_reg) {
  if (x.size() != y.size()) throw ArgumentError("logistic_fit: row count mismatch");
  if (lambda_reg < 0) throw ArgumentError("logistic_fit: lambda must be >= 0");
  bool has_pos = false, has_neg = false;
  for (bool v : y) (v ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) throw DataError("logistic_fit needs both classes");

  const std::size_t n = x.size();
  const std::size_t p = x[0].size();
  const Standardized st = standardize(x);

  std::vector<double> beta(p + 1, 0.0);
  auto [nll, grad] = logistic_nll_grad(st.z, y, beta, lambda_reg);
  for (int iter = 0; iter < 500; ++iter) {
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    if (gmax < 1e-8) break;

    // Newton direction from the penalized Hessian
    std::vector<std::vector<double>> hess(p + 1, std::vector<double>(p + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      double eta = beta[0];
      for (std::size_t j = 0; j < p; ++j) eta += beta[j + 1] * st.z[i][j];
      const double prob = 1.0 / (1.0 + std::exp(-eta));
      const double w = std::max(prob * (1.0 - prob), 1e-12);
      hess[0][0] += w;
      for (std::size_t j = 0; j < p; ++j) {
        hess[0][j + 1] += w * st.z[i][j];
        for (std::size_t k = j; k < p; ++k) {
          hess[j + 1][k + 1] += w * st.z[i][j] * st.z[i][k];
        }
      }
    }
    for (std::size_t j = 0; j <= p; ++j) {
      for (std::size_t k = 0; k < j; ++k) hess[j][k] = hess[k][j];
    }
    for (std::size_t j = 1; j <= p; ++j) hess[j][j] += lambda_reg;

    std::vector<double> neg_grad(grad.size());
    for (std::size_t j = 0; j < grad.size(); ++j) neg_grad[j] = -grad[j];
    const std::vector<double> step = solve_linear(hess, neg_grad);

    // step halving keeps the penalized NLL non-increasing
    double scale = 1.0;
    for (int half = 0; half < 30; ++half) {
      std::vector<double> cand(beta.size());
      for (std::size_t j = 0; j < beta.size(); ++j) cand[j] = beta[j] + scale * step[j];
      auto [cand_nll, cand_grad] = logistic_nll_grad(st.z, y, cand, lambda_reg);
      if (cand_nll <= nll + 1e-12) {
        beta = std::move(cand);
        nll = cand_nll;
        grad = std::move(cand_grad);
        break;
      }
      scale *= 0.5;
    }
  }

  FitResult fit;
  fit.kind = "logistic";
  fit.intercept = beta[0];
  fit.coefficients.assign(beta.begin() + 1, beta.end());
  fit.column_mean = st.mean;
  fit.column_std = st.stddev;
  fit.lambda_reg = lambda_reg;
  fit.rows_used = n;
  return fit;
}

}  // namespace planrisk
