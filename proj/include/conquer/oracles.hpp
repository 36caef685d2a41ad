#pragma once

// Brute-force references for testing. Deliberately slow and independent of
// the closed forms and solvers they check.

#include "conquer/kernels.hpp"
#include "conquer/model.hpp"

#include <functional>

namespace conquer::oracles {

struct OracleBudget
{
  long long max_subsets = 2'000'000;
  double quadrature_tol = 1e-9;
};

//! Exact check-loss quantile regression for tiny problems by enumerating all
//! p-point interpolating fits. Singular subsets are skipped; ties in loss go
//! to the lexicographically smallest coefficient vector.
Vector exact_qr_small(const Dataset& data, double tau,
                      const OracleBudget& budget = {});

//! Unsmoothed objective (1/n) sum rho_tau(r_i).
double check_objective(const Dataset& data, const Vector& beta, double tau);

//! Adaptive Gauss-Kronrod integral on [a, b] with absolute error target tol.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-9);

//! int rho_tau(v) K_h(v - u) dv by adaptive quadrature.
double convolution_loss_quadrature(KernelKind kind, double tau, double h,
                                   double u, const OracleBudget& budget = {});

using ScalarField = std::function<double(const Vector&)>;
using VectorField = std::function<Vector(const Vector&)>;

//! Central differences, (f(b + e_j eps) - f(b - e_j eps)) / (2 eps).
Vector finite_diff_gradient(const ScalarField& f, const Vector& beta,
                            double eps);

//! Column j holds the central difference of F along coordinate j.
Matrix finite_diff_jacobian(const VectorField& f, const Vector& beta,
                            double eps);

} // namespace conquer::oracles
