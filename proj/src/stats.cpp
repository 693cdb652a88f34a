#include "amnesia/stats.hpp"

#include "amnesia/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace amnesia::stats {

Correlation parse_correlation(const std::string& text) {
  if (text == "pearson") return Correlation::Pearson;
  if (text == "spearman") return Correlation::Spearman;
  throw std::invalid_argument("unknown correlation '" + text + "' (expected pearson|spearman)");
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = x[k] - mx;
    const double dy = y[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::domain_error("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

CorrelationReport correlate(std::span<const double> x, std::span<const double> y) {
  return {pearson(x, y), spearman(x, y), x.size()};
}

double avg_row_correlation(const AssociationMatrix& m, Correlation kind) {
  if (m.rows() < 2) throw std::invalid_argument("row correlation needs at least two tasks");
  if (!m.fully_observed()) throw std::invalid_argument("row correlation needs a fully observed matrix");
  const Eigen::Index rows = m.rows();
  std::vector<std::vector<double>> data(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::VectorXd row = m.values().row(i).transpose();
    data[i].assign(row.data(), row.data() + row.size());
    if (kind == Correlation::Spearman) data[i] = average_ranks(data[i]);
  }
  double sum = 0.0;
  for (Eigen::Index p = 0; p < rows; ++p)
    for (Eigen::Index q = p + 1; q < rows; ++q) sum += pearson(data[p], data[q]);
  // Each unordered pair stands for two ordered pairs with the same value.
  const double pairs = static_cast<double>(rows) * static_cast<double>(rows - 1) / 2.0;
  return sum / pairs;
}

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

// I_x(a,b) with y = 1 - x supplied separately to avoid cancellation.
double incomplete_beta_xy(double a, double b, double x, double y) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, y) / b;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("incomplete beta requires a, b > 0");
  if (x < 0.0 || x > 1.0) throw std::domain_error("incomplete beta requires x in [0, 1]");
  return incomplete_beta_xy(a, b, x, 1.0 - x);
}

double student_t_two_sided(double t, double dof) {
  if (!(dof > 0.0)) throw std::domain_error("degrees of freedom must be positive");
  if (std::isnan(t)) throw std::domain_error("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  const double t2 = t * t;
  const double denom = dof + t2;
  return incomplete_beta_xy(0.5 * dof, 0.5, dof / denom, t2 / denom);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired t-test: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("paired t-test: need at least two pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t k = 0; k < n; ++k) d[k] = a[k] - b[k];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; }))
    throw std::domain_error("paired t-test undefined: all differences are zero");
  if (ss == 0.0) throw std::domain_error("paired t-test undefined: differences have zero variance");
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult r;
  r.dof = n - 1;
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p_two_sided = student_t_two_sided(r.t, static_cast<double>(r.dof));
  return r;
}

ProjectionMatrix::ProjectionMatrix(std::size_t original_dim, std::size_t projected_dim, std::uint64_t seed)
    : original_dim_(original_dim), projected_dim_(projected_dim), seed_(seed) {
  if (original_dim == 0 || projected_dim == 0) throw std::invalid_argument("projection dimensions must be positive");
}

Eigen::MatrixXd ProjectionMatrix::project_columns(const Eigen::MatrixXd& vs) const {
  if (static_cast<std::size_t>(vs.rows()) != original_dim_)
    throw std::invalid_argument("projection input dimension mismatch");
  const auto d = static_cast<Eigen::Index>(projected_dim_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(projected_dim_));
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, vs.cols());
  Rng rng(mix_seed(seed_ ^ (original_dim_ * 0x9e3779b97f4a7c15ULL) ^ projected_dim_));
  Eigen::VectorXd p_row(d);
  for (std::size_t i = 0; i < original_dim_; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) p_row[k] = rng.normal() * scale;
    out.noalias() += p_row * vs.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

Eigen::VectorXd ProjectionMatrix::project(const Eigen::VectorXd& v) const {
  return project_columns(v).col(0);
}

Eigen::MatrixXd ProjectionMatrix::materialize() const {
  return project_columns(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(original_dim_),
                                                   static_cast<Eigen::Index>(original_dim_)))
      .transpose();
}

Eigen::VectorXd project(const Eigen::VectorXd& v, const ProjectionMatrix& p) { return p.project(v); }

double grad_weight_product(const Eigen::VectorXd& grad, const Eigen::VectorXd& weight_delta) {
  if (grad.size() != weight_delta.size()) throw std::invalid_argument("grad/weight dimension mismatch");
  return grad.dot(weight_delta);
}

double grad_grad_product(const Eigen::VectorXd& g1, const Eigen::VectorXd& g2) {
  if (g1.size() != g2.size()) throw std::invalid_argument("gradient dimension mismatch");
  return -g1.dot(g2);
}

}  // namespace amnesia::stats
