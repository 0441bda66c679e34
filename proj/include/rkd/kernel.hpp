#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace rkd {

//! Compactly supported kernels on [-1, 1]. The Gaussian kernel is not offered:
//! the variance constants below require bounded support.
enum class KernelType
{
  tricube,
  triangular,
  epanechnikov,
  uniform
};

struct KernelSpec
{
  KernelType type = KernelType::tricube;

  double operator()(double u) const;

  std::string name() const;
  //! Throws ConfigError for unknown names (including "gaussian").
  static KernelSpec from_name(const std::string& name);
};

double eval_kernel(const KernelSpec& kernel, double u);

//! Constrained basis (1, u d+, u d-, ..., u^p d+, u^p d-) with d+ = 1{u >= 0}.
//! A single shared intercept keeps the fitted function continuous at u = 0.
Eigen::VectorXd basis_vector(int p, double u);

//! Writes the basis into an existing buffer of length 2p+1.
void fill_basis(int p, double u, double* out);

inline int basis_size(int p) { return 2 * p + 1; }

enum class Side
{
  plus,
  minus,
  full
};

//! Kernel-dependent constant matrices of the constrained basis.
struct KernelConstants
{
  int p = 0;
  Eigen::MatrixXd gamma;     // int r r' K over the real line
  Eigen::MatrixXd gamma_inv; //
  std::map<int, Eigen::VectorXd> theta_plus;  // q -> int_{u>=0} r u^q K
  std::map<int, Eigen::VectorXd> theta_minus; // q -> int_{u<0} r u^q K
  Eigen::MatrixXd psi_plus;  // int_{u>=0} r r' K^2
  Eigen::MatrixXd psi_minus; // int_{u<0} r r' K^2
  Eigen::MatrixXd psi_full;
};

//! Computes the constants by adaptive quadrature split at zero. Throws
//! IllConditionedError when gamma is not positive definite.
KernelConstants kernel_constants(const KernelSpec& kernel, int p,
                                 const std::vector<int>& q_list);

//! Cached constants for (kernel, p) with the moment order q = p+1 included.
std::shared_ptr<const KernelConstants> cached_constants(const KernelSpec& kernel,
                                                        int p);

//! (s1 s2)^{-1/2} int r(u/s1) r(u/s2)' K(u/s1) K(u/s2) du over the requested
//! half line (or the full line).
Eigen::MatrixXd cross_kernel_matrix(const KernelSpec& kernel, int p, double s1,
                                    double s2, Side side);

double kernel_mass(const KernelSpec& kernel);
double kernel_first_moment(const KernelSpec& kernel);
//! R_K = int K^2
double kernel_roughness(const KernelSpec& kernel);
//! int u^2 K
double kernel_second_moment(const KernelSpec& kernel);

} // namespace rkd
