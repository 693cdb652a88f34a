#pragma once

#include "amnesia/association_matrix.hpp"

#include <cstdint>
#include <span>

namespace amnesia::stats {

enum class Correlation { Pearson, Spearman };

Correlation parse_correlation(const std::string& text);

struct CorrelationReport {
  double pearson = 0.0;
  double spearman = 0.0;
  std::size_t n = 0;
};

// Both throw std::domain_error on zero variance and std::invalid_argument on
// length mismatch or fewer than two points.
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);
CorrelationReport correlate(std::span<const double> x, std::span<const double> y);

// 1-based ranks; ties share their average rank.
std::vector<double> average_ranks(std::span<const double> x);

/// Mean correlation between forgetting rows of every ordered pair of distinct
/// tasks (p, q), p != q.
double avg_row_correlation(const AssociationMatrix& m, Correlation kind);

struct TTestResult {
  double t = 0.0;
  double p_two_sided = 1.0;
  std::size_t dof = 0;
};

/// Paired t-test on a - b.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// Two-sided tail P(|T| >= |t|) of Student's t with `dof` degrees of freedom.
double student_t_two_sided(double t, double dof);

/// Dense Gaussian random projection P (D x d), entries N(0,1)/sqrt(d). Never
/// stored: rows are regenerated from (dims, seed) on every use.
class ProjectionMatrix {
 public:
  ProjectionMatrix(std::size_t original_dim, std::size_t projected_dim, std::uint64_t seed);

  std::size_t original_dim() const { return original_dim_; }
  std::size_t projected_dim() const { return projected_dim_; }
  std::uint64_t seed() const { return seed_; }

  Eigen::VectorXd project(const Eigen::VectorXd& v) const;
  // Columns of `vs` are D-vectors; returns d x count.
  Eigen::MatrixXd project_columns(const Eigen::MatrixXd& vs) const;
  Eigen::MatrixXd materialize() const;

 private:
  std::size_t original_dim_;
  std::size_t projected_dim_;
  std::uint64_t seed_;
};

Eigen::VectorXd project(const Eigen::VectorXd& v, const ProjectionMatrix& p);

/// First-order forgetting proxy <grad f(x_j), theta_T - theta_0>.
double grad_weight_product(const Eigen::VectorXd& grad, const Eigen::VectorXd& weight_delta);

/// Gradient-alignment forgetting proxy, reported negated: -<g1, g2>.
double grad_grad_product(const Eigen::VectorXd& g1, const Eigen::VectorXd& g2);

}  // namespace amnesia::stats
