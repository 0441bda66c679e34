#include "oracles.hpp"
#include "rkd/errors.hpp"
#include "rkd/kernel.hpp"

#include <doctest.h>

using namespace rkd;

namespace {

const std::vector<KernelSpec> all_kernels = {
  { KernelType::tricube },
  { KernelType::triangular },
  { KernelType::epanechnikov },
  { KernelType::uniform },
};

double
max_abs(const Eigen::MatrixXd& m)
{
  return m.cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("kernel values")
{
  const KernelSpec tricube{ KernelType::tricube };
  CHECK(eval_kernel(tricube, 0.0) == doctest::Approx(70.0 / 81.0).epsilon(1e-15));
  CHECK(eval_kernel(tricube, 1.5) == 0.0);
  CHECK(eval_kernel(KernelSpec{ KernelType::uniform }, 0.3) == 0.5);
  for (const auto& k : all_kernels) {
    for (double u : { 0.1, 0.37, 0.8, 0.999 }) {
      CHECK(eval_kernel(k, u) == eval_kernel(k, -u));
      CHECK(eval_kernel(k, u) >= 0.0);
    }
    CHECK(eval_kernel(k, 1.0001) == 0.0);
    CHECK(eval_kernel(k, -3.0) == 0.0);
  }
}

TEST_CASE("kernel names")
{
  CHECK(KernelSpec::from_name("epanechnikov").type == KernelType::epanechnikov);
  CHECK_THROWS_AS(KernelSpec::from_name("gaussian"), ConfigError);
  CHECK_THROWS_AS(KernelSpec::from_name("cosine"), ConfigError);
  for (const auto& k : all_kernels)
    CHECK(KernelSpec::from_name(k.name()).type == k.type);
}

TEST_CASE("kernel mass and moments")
{
  for (const auto& k : all_kernels) {
    CHECK(std::abs(kernel_mass(k) - 1.0) < 1e-8);
    CHECK(std::abs(kernel_first_moment(k)) < 1e-10);
  }
  const KernelSpec uniform{ KernelType::uniform };
  CHECK(std::abs(kernel_roughness(uniform) - 0.5) < 1e-10);
  CHECK(std::abs(kernel_second_moment(uniform) - 1.0 / 3.0) < 1e-10);
}

TEST_CASE("basis vector")
{
  Eigen::VectorXd expect(5);
  expect << 1, 0.5, 0, 0.25, 0;
  CHECK(max_abs(basis_vector(2, 0.5) - expect) == 0.0);
  expect << 1, 0, -0.5, 0, 0.25;
  CHECK(max_abs(basis_vector(2, -0.5) - expect) == 0.0);
  expect << 1, 0, 0, 0, 0;
  CHECK(max_abs(basis_vector(2, 0.0) - expect) == 0.0);
  CHECK_THROWS_AS(basis_vector(0, 0.2), std::invalid_argument);
  CHECK(basis_size(3) == 7);

  // continuity at zero for any coefficient vector
  Eigen::VectorXd alpha = Eigen::VectorXd::LinSpaced(7, -2.0, 3.0);
  CHECK(std::abs(basis_vector(3, 1e-12).dot(alpha) -
                 basis_vector(3, -1e-12).dot(alpha)) < 1e-10);
}

TEST_CASE("uniform kernel constants against closed forms")
{
  const KernelSpec uniform{ KernelType::uniform };
  for (int p = 1; p <= 3; ++p) {
    const KernelConstants c = kernel_constants(uniform, p, { p + 1, p + 2 });
    CHECK(max_abs(c.gamma - oracle::uniform_gram(p, 1, 0)) < 1e-8);
    CHECK(max_abs(c.psi_plus - oracle::uniform_gram(p, 2, 1)) < 1e-8);
    CHECK(max_abs(c.psi_minus - oracle::uniform_gram(p, 2, -1)) < 1e-8);
    CHECK(max_abs(c.psi_full - oracle::uniform_gram(p, 2, 0)) < 1e-8);
    for (int q : { p + 1, p + 2 }) {
      CHECK(max_abs(c.theta_plus.at(q) - oracle::uniform_theta(p, q, true)) < 1e-8);
      CHECK(max_abs(c.theta_minus.at(q) - oracle::uniform_theta(p, q, false)) < 1e-8);
    }
  }
  // the hand-written p = 1 matrices
  Eigen::MatrixXd g(3, 3);
  g << 1, 0.25, -0.25, 0.25, 1.0 / 6, 0, -0.25, 0, 1.0 / 6;
  Eigen::MatrixXd psi(3, 3);
  psi << 0.25, 0.125, 0, 0.125, 1.0 / 12, 0, 0, 0, 0;
  const KernelConstants c1 = kernel_constants(uniform, 1, { 2 });
  CHECK(max_abs(c1.gamma - g) < 1e-8);
  CHECK(max_abs(c1.psi_plus - psi) < 1e-8);
  CHECK(max_abs(cross_kernel_matrix(uniform, 1, 1.0, 1.0, Side::plus) - psi) < 1e-8);
}

TEST_CASE("kernel constant invariants")
{
  for (const auto& k : all_kernels) {
    for (int p = 1; p <= 3; ++p) {
      const KernelConstants c = kernel_constants(k, p, { p + 1 });
      CHECK(max_abs(c.gamma - c.gamma.transpose()) < 1e-12);
      CHECK(c.gamma.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() > 0.0);
      CHECK(max_abs(c.psi_full - c.psi_plus - c.psi_minus) < 1e-10);
      CHECK(max_abs(c.gamma * c.gamma_inv -
                    Eigen::MatrixXd::Identity(2 * p + 1, 2 * p + 1)) < 1e-8);
      // theta+ and theta- mirror under the sign flip of odd powers
      const Eigen::VectorXd& tp = c.theta_plus.at(p + 1);
      const Eigen::VectorXd& tm = c.theta_minus.at(p + 1);
      const double sgn_q = ((p + 1) % 2 == 0) ? 1.0 : -1.0;
      CHECK(std::abs(tm[0] - sgn_q * tp[0]) < 1e-10);
      for (int j = 1; j <= p; ++j) {
        const double sgn = ((p + 1 + j) % 2 == 0) ? 1.0 : -1.0;
        CHECK(std::abs(tm[2 * j] - sgn * tp[2 * j - 1]) < 1e-10);
      }
      const Eigen::MatrixXd cross =
        cross_kernel_matrix(k, p, 1.0, 1.0, Side::full);
      CHECK(max_abs(cross - c.psi_full) < 1e-10);
    }
  }
}

TEST_CASE("cross kernel matrix with equal scales")
{
  // (s s)^{-1/2} int r(u/s) r(u/s)' K(u/s)^2 du = int r r' K^2 after u -> s u
  const KernelSpec tricube{ KernelType::tricube };
  const KernelConstants c = kernel_constants(tricube, 2, { 3 });
  for (double s : { 0.5, 2.0 }) {
    CHECK(max_abs(cross_kernel_matrix(tricube, 2, s, s, Side::full) -
                  c.psi_full) < 1e-9);
  }
  CHECK_THROWS_AS(cross_kernel_matrix(tricube, 2, 0.0, 1.0, Side::full),
                  std::invalid_argument);
}

TEST_CASE("tricube constants against Monte Carlo integration")
{
  const KernelSpec tricube{ KernelType::tricube };
  const auto K = [](double u) {
    const double a = std::abs(u);
    return a >= 1.0 ? 0.0 : 70.0 / 81.0 * std::pow(1.0 - a * a * a, 3);
  };
  const long draws = 10'000'000;
  const Eigen::MatrixXd gamma_mc = oracle::stratified_mc(
    [&](double u) -> Eigen::MatrixXd {
      const Eigen::VectorXd r = oracle::basis(2, u);
      return r * r.transpose() * K(u);
    },
    -1.0, 1.0, draws, 11);
  CHECK(max_abs(kernel_constants(tricube, 2, { 3 }).gamma - gamma_mc) < 1e-4);

  const double s1 = 1.0, s2 = 0.5;
  const Eigen::MatrixXd cross_mc = oracle::stratified_mc(
    [&](double u) -> Eigen::MatrixXd {
      return oracle::basis(2, u / s1) * oracle::basis(2, u / s2).transpose() *
             K(u / s1) * K(u / s2) / std::sqrt(s1 * s2);
    },
    -1.0, 1.0, draws, 12);
  CHECK(max_abs(cross_kernel_matrix(tricube, 2, s1, s2, Side::full) - cross_mc) <
        1e-4);
}

TEST_CASE("cached constants are shared and deterministic")
{
  const KernelSpec k{ KernelType::epanechnikov };
  const auto a = cached_constants(k, 2);
  const auto b = cached_constants(k, 2);
  CHECK(a.get() == b.get());
  CHECK(a->theta_plus.count(3) == 1);
  const KernelConstants fresh = kernel_constants(k, 2, { 3 });
  CHECK(max_abs(fresh.gamma - a->gamma) == 0.0);
}
