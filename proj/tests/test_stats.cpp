#include "amnesia/stats.hpp"

#include "test_util.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <doctest.h>

using namespace amnesia;
using amnesia::testing::relative_difference;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

Big big_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  Big mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) mx += x[k], my += y[k];
  mx /= x.size();
  my /= y.size();
  Big sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  return sxy / sqrt(sxx * syy);
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("pearson and spearman small cases") {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4}, neg{-1, -2, -3, -4};
  CHECK(stats::pearson(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(stats::pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(stats::spearman(x, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(stats::spearman(x, y) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(stats::average_ranks(std::vector<double>{3, 1, 3, 2}) == std::vector<double>{3.5, 1, 3.5, 2});
  const std::vector<double> flat{2, 2, 2, 2};
  CHECK_THROWS_AS(stats::pearson(x, flat), std::domain_error);
  CHECK_THROWS_AS(stats::pearson(x, std::vector<double>{1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(stats::pearson(std::vector<double>{1}, std::vector<double>{1}), std::invalid_argument);
  const auto r = stats::correlate(x, y);
  CHECK(r.n == 4);
  CHECK(r.spearman == doctest::Approx(0.8));
}

TEST_CASE("correlation invariances") {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = random_vector(25, rng), y = random_vector(25, rng);
    std::vector<double> affine(x.size()), flipped(x.size()), cubed(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      affine[k] = 3.5 * x[k] - 7.0;
      flipped[k] = -2.0 * x[k];
      cubed[k] = std::exp(x[k]) + x[k] * x[k] * x[k];
    }
    const double p = stats::pearson(x, y), s = stats::spearman(x, y);
    CHECK(stats::pearson(affine, y) == doctest::Approx(p).epsilon(1e-12));
    CHECK(stats::pearson(flipped, y) == doctest::Approx(-p).epsilon(1e-12));
    CHECK(stats::spearman(cubed, y) == doctest::Approx(s).epsilon(1e-12));
    CHECK(std::abs(p) <= 1.0);
  }
}

TEST_CASE("pearson and spearman match a 50-digit reference") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    const auto x = random_vector(n, rng), y = random_vector(n, rng);
    CHECK(relative_difference(stats::pearson(x, y), static_cast<double>(big_pearson(x, y))) <= 1e-10);
    const auto rx = stats::average_ranks(x), ry = stats::average_ranks(y);
    CHECK(relative_difference(stats::spearman(x, y), static_cast<double>(big_pearson(rx, ry))) <= 1e-10);
  }
}

TEST_CASE("avg_row_correlation") {
  Eigen::MatrixXd z(3, 5);
  z.row(0) << 1, 4, 2, 8, 5;
  z.row(1) = 2.0 * z.row(0).array() + 1.0;
  z.row(2) = 0.5 * z.row(0).array() - 3.0;
  CHECK(stats::avg_row_correlation(AssociationMatrix::from_values(z), stats::Correlation::Pearson) ==
        doctest::Approx(1.0));
  Eigen::MatrixXd two(2, 4);
  two << 1, 2, 3, 4, 4, 3, 2, 1;
  CHECK(stats::avg_row_correlation(AssociationMatrix::from_values(two), stats::Correlation::Spearman) ==
        doctest::Approx(-1.0));

  Rng rng(3);
  const Eigen::MatrixXd g = amnesia::testing::gaussian(6, 20, rng);
  double total = 0;
  for (int p = 0; p < 6; ++p)
    for (int q = 0; q < 6; ++q) {
      if (p == q) continue;
      const Eigen::VectorXd a = g.row(p).transpose(), b = g.row(q).transpose();
      total += stats::pearson(std::span<const double>(a.data(), 20), std::span<const double>(b.data(), 20));
    }
  const double avg = stats::avg_row_correlation(AssociationMatrix::from_values(g), stats::Correlation::Pearson);
  CHECK(avg == doctest::Approx(total / 30.0).epsilon(1e-12));
  CHECK(std::abs(avg) <= 1.0);
}

TEST_CASE("paired t test") {
  const std::vector<double> a{2, 4, 6}, b{1, 2, 3};
  const auto r = stats::paired_t_test(a, b);
  CHECK(r.t == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-14));
  CHECK(r.dof == 2);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(2.0), r.t));
  CHECK(relative_difference(r.p_two_sided, p) <= 1e-10);
  CHECK(r.p_two_sided == doctest::Approx(0.0742).epsilon(1e-3));

  const auto back = stats::paired_t_test(b, a);
  CHECK(back.t == -r.t);
  CHECK(back.p_two_sided == r.p_two_sided);
  CHECK_THROWS(stats::paired_t_test(a, a));
  const std::vector<double> shifted{3, 5, 7};
  CHECK_THROWS(stats::paired_t_test(shifted, a));
}

TEST_CASE("incomplete beta and t tails match Boost at 50 digits") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = 0.1 + 30.0 * rng.uniform(), b = 0.1 + 30.0 * rng.uniform(), x = rng.uniform();
    const Big ref = boost::math::ibeta(Big(a), Big(b), Big(x));
    if (ref < Big(1e-280)) continue;
    CHECK(relative_difference(stats::incomplete_beta(a, b, x), static_cast<double>(ref)) <= 1e-10);
  }
  for (int trial = 0; trial < 200; ++trial) {
    const double dof = 1.0 + static_cast<double>(rng.below(60));
    const double t = rng.normal() * 4.0;
    const Big x = Big(dof) / (Big(dof) + Big(t) * Big(t));
    const Big ref = boost::math::ibeta(Big(dof) / 2, Big(0.5), x);
    CHECK(relative_difference(stats::student_t_two_sided(t, dof), static_cast<double>(ref)) <= 1e-10);
  }
  CHECK(stats::student_t_two_sided(0.0, 5.0) == 1.0);
  CHECK_THROWS_AS(stats::incomplete_beta(0.0, 1.0, 0.5), std::domain_error);
}

TEST_CASE("projection determinism, inner products and gradient products") {
  const stats::ProjectionMatrix p(300, 40, 9);
  Rng rng(5);
  Eigen::VectorXd v(300);
  for (auto& x : v) x = rng.normal();
  CHECK(p.project(v) == p.project(v));
  CHECK(stats::project(v, stats::ProjectionMatrix(300, 40, 9)) == p.project(v));
  CHECK(p.materialize() * 1.0 == stats::ProjectionMatrix(300, 40, 9).materialize());
  CHECK((p.project_columns(v) - p.project(v)).norm() < 1e-12);
  CHECK(stats::ProjectionMatrix(300, 40, 10).project(v) != p.project(v));

  CHECK(stats::grad_weight_product(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 3)) == 0.0);
  CHECK(stats::grad_grad_product(Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)) == -11.0);
  CHECK(stats::grad_weight_product(Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)) == 11.0);
  CHECK_THROWS(stats::grad_grad_product(Eigen::Vector2d(1, 2), Eigen::Vector3d(1, 2, 3)));
}

TEST_CASE("random projection preserves inner products") {
  const std::size_t D = 10000, d = 512;
  const stats::ProjectionMatrix p(D, d, 2024);
  Rng rng(6);
  double total_error = 0;
  const int pairs = 100;
  Eigen::MatrixXd us(D, pairs), vs(D, pairs);
  for (int k = 0; k < pairs; ++k) {
    for (std::size_t i = 0; i < D; ++i) {
      us(static_cast<Eigen::Index>(i), k) = rng.normal();
      vs(static_cast<Eigen::Index>(i), k) = rng.normal();
    }
    us.col(k).normalize();
    vs.col(k).normalize();
  }
  const Eigen::MatrixXd pu = p.project_columns(us), pv = p.project_columns(vs);
  for (int k = 0; k < pairs; ++k) total_error += std::abs(pu.col(k).dot(pv.col(k)) - us.col(k).dot(vs.col(k)));
  CHECK(total_error / pairs < 3.0 / std::sqrt(static_cast<double>(d)));
}
