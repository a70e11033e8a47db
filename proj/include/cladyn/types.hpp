#pragma once

#include <complex>

#include <Eigen/Dense>

namespace cladyn {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Largest absolute deviation from Hermitian symmetry, max |M - M^H|.
double hermiticity_residual(const CMatrix& m);

/// Largest absolute deviation from anti-Hermitian symmetry, max |M + M^H|.
double anti_hermiticity_residual(const CMatrix& m);

bool is_finite(const CMatrix& m);
bool is_finite(const RVector& v);

}  // namespace cladyn
