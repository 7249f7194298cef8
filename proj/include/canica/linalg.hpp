/******************************************************************************
 * Copyright 2026 The CanICA Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "canica/data_model.hpp"

namespace canica {

/// Y = U diag(s) V^T with U (rows x r), V (cols x r), r = min(rows, cols).
struct ThinSvd {
	Matrix U;
	Vector s;
	Matrix V;
};

/// Flip each singular pair so the largest-magnitude entry of the right
/// singular vector is positive (first index wins on ties).
inline void fix_svd_signs(Matrix& U, Matrix& V)
{
	for (Eigen::Index j = 0; j < V.cols(); ++j) {
		Eigen::Index arg = 0;
		V.col(j).cwiseAbs().maxCoeff(&arg);
		if (V(arg, j) < 0) {
			V.col(j) = -V.col(j);
			if (j < U.cols())
				U.col(j) = -U.col(j);
		}
	}
}

/// Thin SVD through a QR of the long side, then a divide-and-conquer SVD
/// of the small triangular factor.
inline ThinSvd thin_svd(const Matrix& Y)
{
	ThinSvd out;
	const Eigen::Index m = Y.rows(), n = Y.cols();
	if (m == 0 || n == 0)
		throw Error(ErrorCode::EmptyMatrix, "SVD of an empty matrix");
	if (!Y.allFinite())
		throw Error(ErrorCode::NonFiniteValue, "SVD input is not finite");

	if (m <= n) {
		// Y^T = Q R  =>  Y = R^T Q^T
		Eigen::HouseholderQR<Matrix> qr(Y.transpose());
		const Matrix Rt = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>().toDenseMatrix().transpose();
		Eigen::BDCSVD<Matrix> svd(Rt, Eigen::ComputeFullU | Eigen::ComputeFullV);
		if (svd.info() != Eigen::Success)
			throw Error(ErrorCode::NumericalFailure, "SVD did not converge");
		out.U = svd.matrixU();
		out.s = svd.singularValues();
		Matrix G = Matrix::Zero(n, m);
		G.topRows(m) = svd.matrixV();
		out.V = qr.householderQ() * G;
	} else {
		Eigen::HouseholderQR<Matrix> qr(Y);
		const Matrix R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
		Eigen::BDCSVD<Matrix> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
		if (svd.info() != Eigen::Success)
			throw Error(ErrorCode::NumericalFailure, "SVD did not converge");
		out.s = svd.singularValues();
		out.V = svd.matrixV();
		Matrix G = Matrix::Zero(m, n);
		G.topRows(n) = svd.matrixU();
		out.U = qr.householderQ() * G;
	}
	fix_svd_signs(out.U, out.V);
	return out;
}

/// Singular values above s_max * max(rows, cols) * eps.
inline Eigen::Index numeric_rank(const Vector& s, Eigen::Index rows, Eigen::Index cols)
{
	if (s.size() == 0 || s(0) <= 0)
		return 0;
	const double tol = s(0) * double(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
	Eigen::Index r = 0;
	while (r < s.size() && s(r) > tol)
		++r;
	return r;
}

/// Empirical quantile by the nearest-rank rule: the ceil(q * n)-th smallest
/// value (1-based, clamped to [1, n]).
inline double nearest_rank_quantile(std::vector<double> values, double q)
{
	if (values.empty())
		throw Error(ErrorCode::EmptyMatrix, "quantile of an empty sample");
	std::sort(values.begin(), values.end());
	const double n = double(values.size());
	// guard against q * n landing a hair above an integer
	auto rank = static_cast<std::ptrdiff_t>(std::ceil(q * n - 1e-9));
	rank = std::clamp<std::ptrdiff_t>(rank, 1, std::ptrdiff_t(values.size()));
	return values[std::size_t(rank - 1)];
}

/// Linear-interpolation quantile (the "type 7" definition).
inline double interpolated_quantile(const std::vector<double>& sorted, double q)
{
	const double pos = q * double(sorted.size() - 1);
	const auto lo = std::size_t(std::floor(pos));
	const auto hi = std::min(lo + 1, sorted.size() - 1);
	const double frac = pos - double(lo);
	return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// max |A A^T - I| over entries.
inline double orthonormality_error(const Matrix& rows)
{
	if (rows.rows() == 0)
		return 0.0;
	return (rows * rows.transpose() - Matrix::Identity(rows.rows(), rows.rows())).cwiseAbs().maxCoeff();
}

/// Orthonormal basis (as columns) of the row space of `rows`.
inline Matrix row_space_basis(const Matrix& rows)
{
	const ThinSvd svd = thin_svd(rows);
	const Eigen::Index r = numeric_rank(svd.s, rows.rows(), rows.cols());
	return svd.V.leftCols(r);
}

/// Principal angles (radians, ascending) between the row spaces of a and b.
/// Small angles come from sines of the projection residual, large ones from
/// cosines, so both ends are accurate.
inline std::vector<double> principal_angles(const Matrix& a, const Matrix& b)
{
	Matrix qa = row_space_basis(a);
	Matrix qb = row_space_basis(b);
	if (qa.cols() == 0 || qb.cols() == 0)
		return {};
	if (qa.cols() < qb.cols())
		std::swap(qa, qb);
	const Matrix cross = qa.transpose() * qb;
	Eigen::JacobiSVD<Matrix> cos_svd(cross);
	Eigen::JacobiSVD<Matrix> sin_svd(qb - qa * cross);
	std::vector<double> cosines(cos_svd.singularValues().data(),
	                            cos_svd.singularValues().data() + cos_svd.singularValues().size());
	std::vector<double> sines(sin_svd.singularValues().data(),
	                          sin_svd.singularValues().data() + sin_svd.singularValues().size());
	std::sort(cosines.begin(), cosines.end(), std::greater<>());
	std::sort(sines.begin(), sines.end());
	std::vector<double> angles;
	for (std::size_t i = 0; i < cosines.size(); ++i) {
		const double c = std::clamp(cosines[i], 0.0, 1.0);
		angles.push_back(c * c > 0.5 ? std::asin(std::clamp(sines[i], 0.0, 1.0)) : std::acos(c));
	}
	std::sort(angles.begin(), angles.end());
	return angles;
}

inline double degrees(double radians) { return radians * 180.0 / std::numbers::pi; }

/// Symmetric inverse square root applied on the left: (W W^T)^{-1/2} W.
inline Matrix symmetric_decorrelation(const Matrix& W)
{
	Eigen::SelfAdjointEigenSolver<Matrix> eig(W * W.transpose());
	const Vector d = eig.eigenvalues().cwiseMax(std::numeric_limits<double>::min()).cwiseSqrt().cwiseInverse();
	return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose() * W;
}

} // namespace canica
