#include "rkd/kernel.hpp"

#include "rkd/errors.hpp"
#include "rkd/quadrature.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace rkd {

namespace {

constexpr double quad_tol = 1e-10;

double
integrate_scalar(const KernelSpec& kernel, double a, double b,
                 double (*g)(const KernelSpec&, double))
{
  auto f = [&](double u) {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = g(kernel, u);
    return m;
  };
  return quadrature::integrate(f, a, b, quad_tol)(0, 0);
}

} // namespace

double
KernelSpec::operator()(double u) const
{
  const double a = std::abs(u);
  if (a > 1.0)
    return 0.0;
  switch (type) {
    case KernelType::tricube: {
      const double t = 1.0 - a * a * a;
      return 70.0 / 81.0 * t * t * t;
    }
    case KernelType::triangular:
      return 1.0 - a;
    case KernelType::epanechnikov:
      return 0.75 * (1.0 - u * u);
    case KernelType::uniform:
      return 0.5;
  }
  return 0.0;
}

std::string
KernelSpec::name() const
{
  switch (type) {
    case KernelType::tricube:
      return "tricube";
    case KernelType::triangular:
      return "triangular";
    case KernelType::epanechnikov:
      return "epanechnikov";
    case KernelType::uniform:
      return "uniform";
  }
  return "unknown";
}

KernelSpec
KernelSpec::from_name(const std::string& name)
{
  if (name == "tricube")
    return { KernelType::tricube };
  if (name == "triangular")
    return { KernelType::triangular };
  if (name == "epanechnikov")
    return { KernelType::epanechnikov };
  if (name == "uniform")
    return { KernelType::uniform };
  if (name == "gaussian" || name == "normal")
    throw ConfigError("gaussian kernel is not supported: compact support is "
                      "required");
  throw ConfigError("unknown kernel '" + name + "'");
}

double
eval_kernel(const KernelSpec& kernel, double u)
{
  return kernel(u);
}

void
fill_basis(int p, double u, double* out)
{
  out[0] = 1.0;
  const bool right = u >= 0.0;
  double pw = 1.0;
  for (int k = 1; k <= p; ++k) {
    pw *= u;
    out[2 * k - 1] = right ? pw : 0.0;
    out[2 * k] = right ? 0.0 : pw;
  }
}

Eigen::VectorXd
basis_vector(int p, double u)
{
  if (p < 1)
    throw std::invalid_argument("basis_vector: polynomial order must be >= 1");
  Eigen::VectorXd r(basis_size(p));
  fill_basis(p, u, r.data());
  return r;
}

KernelConstants
kernel_constants(const KernelSpec& kernel, int p, const std::vector<int>& q_list)
{
  if (p < 1)
    throw std::invalid_argument("kernel_constants: p must be >= 1");
  const int d = basis_size(p);
  KernelConstants kc;
  kc.p = p;

  auto outer_k = [&](double u) -> Eigen::MatrixXd {
    Eigen::VectorXd r = basis_vector(p, u);
    return r * r.transpose() * kernel(u);
  };
  auto outer_k2 = [&](double u) -> Eigen::MatrixXd {
    Eigen::VectorXd r = basis_vector(p, u);
    const double k = kernel(u);
    return r * r.transpose() * (k * k);
  };
  // u < 0 on the left panel; the point u = 0 has measure zero.
  kc.gamma = quadrature::integrate(outer_k, -1.0, 0.0, quad_tol) +
             quadrature::integrate(outer_k, 0.0, 1.0, quad_tol);
  kc.psi_plus = quadrature::integrate(outer_k2, 0.0, 1.0, quad_tol);
  kc.psi_minus = quadrature::integrate(outer_k2, -1.0, 0.0, quad_tol);
  kc.psi_full = kc.psi_plus + kc.psi_minus;

  Eigen::LLT<Eigen::MatrixXd> llt(kc.gamma);
  if (llt.info() != Eigen::Success)
    throw IllConditionedError("kernel_constants: gamma is not positive definite");
  kc.gamma_inv = llt.solve(Eigen::MatrixXd::Identity(d, d));

  for (int q : q_list) {
    auto moment = [&](double u) -> Eigen::MatrixXd {
      return basis_vector(p, u) * (std::pow(u, q) * kernel(u));
    };
    kc.theta_plus[q] = quadrature::integrate(moment, 0.0, 1.0, quad_tol);
    kc.theta_minus[q] = quadrature::integrate(moment, -1.0, 0.0, quad_tol);
  }
  return kc;
}

std::shared_ptr<const KernelConstants>
cached_constants(const KernelSpec& kernel, int p)
{
  static std::mutex mutex;
  static std::map<std::pair<KernelType, int>,
                  std::shared_ptr<const KernelConstants>>
    cache;
  const auto key = std::make_pair(kernel.type, p);
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end())
      return it->second;
  }
  auto kc = std::make_shared<const KernelConstants>(
    kernel_constants(kernel, p, { p + 1 }));
  std::lock_guard<std::mutex> lock(mutex);
  return cache.emplace(key, std::move(kc)).first->second;
}

Eigen::MatrixXd
cross_kernel_matrix(const KernelSpec& kernel, int p, double s1, double s2,
                    Side side)
{
  if (!(s1 > 0.0) || !(s2 > 0.0))
    throw std::invalid_argument("cross_kernel_matrix: scales must be positive");
  auto integrand = [&](double u) -> Eigen::MatrixXd {
    Eigen::VectorXd r1 = basis_vector(p, u / s1);
    Eigen::VectorXd r2 = basis_vector(p, u / s2);
    return r1 * r2.transpose() * (kernel(u / s1) * kernel(u / s2));
  };
  // The product vanishes beyond the smaller support.
  const double reach = std::min(s1, s2);
  const double norm = 1.0 / std::sqrt(s1 * s2);
  const int d = basis_size(p);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  if (side != Side::minus)
    out += quadrature::integrate(integrand, 0.0, reach, quad_tol);
  if (side != Side::plus)
    out += quadrature::integrate(integrand, -reach, 0.0, quad_tol);
  return norm * out;
}

double
kernel_mass(const KernelSpec& kernel)
{
  auto g = [](const KernelSpec& k, double u) { return k(u); };
  return integrate_scalar(kernel, -1.0, 0.0, g) +
         integrate_scalar(kernel, 0.0, 1.0, g);
}

double
kernel_first_moment(const KernelSpec& kernel)
{
  auto g = [](const KernelSpec& k, double u) { return u * k(u); };
  return integrate_scalar(kernel, -1.0, 0.0, g) +
         integrate_scalar(kernel, 0.0, 1.0, g);
}

double
kernel_roughness(const KernelSpec& kernel)
{
  auto g = [](const KernelSpec& k, double u) { return k(u) * k(u); };
  return integrate_scalar(kernel, -1.0, 0.0, g) +
         integrate_scalar(kernel, 0.0, 1.0, g);
}

double
kernel_second_moment(const KernelSpec& kernel)
{
  auto g = [](const KernelSpec& k, double u) { return u * u * k(u); };
  return integrate_scalar(kernel, -1.0, 0.0, g) +
         integrate_scalar(kernel, 0.0, 1.0, g);
}

} // namespace rkd
