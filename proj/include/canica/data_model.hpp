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

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "canica/error.hpp"

namespace canica {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// What the rows of a voxel-column matrix index. Codes are the on-disk byte.
enum class RowSemantics : std::uint8_t {
	frames = 0,
	patterns = 1,
	components = 2,
};

inline std::string_view to_string(RowSemantics s)
{
	switch (s) {
	case RowSemantics::frames: return "frames";
	case RowSemantics::patterns: return "patterns";
	case RowSemantics::components: return "components";
	}
	return "unknown";
}

inline bool all_finite(const Matrix& m)
{
	return m.allFinite();
}

/// Dense rows-by-voxels matrix. Entries are finite by construction.
class DataMatrix {
public:
	DataMatrix() = default;

	explicit DataMatrix(Matrix values, RowSemantics semantics = RowSemantics::patterns)
		: values_(std::move(values)), semantics_(semantics)
	{
		if (!all_finite(values_))
			throw Error(ErrorCode::NonFiniteValue, "matrix contains NaN or Inf");
	}

	Eigen::Index rows() const noexcept { return values_.rows(); }
	Eigen::Index cols() const noexcept { return values_.cols(); }
	bool empty() const noexcept { return values_.size() == 0; }
	RowSemantics row_semantics() const noexcept { return semantics_; }

	const Matrix& values() const noexcept { return values_; }
	double operator()(Eigen::Index r, Eigen::Index c) const { return values_(r, c); }

	friend bool operator==(const DataMatrix& a, const DataMatrix& b)
	{
		return a.semantics_ == b.semantics_ && a.rows() == b.rows() && a.cols() == b.cols() &&
		       a.values_ == b.values_;
	}

private:
	Matrix values_;
	RowSemantics semantics_ = RowSemantics::patterns;
};

/// One subject's frames-by-voxels observations.
class SubjectSeries {
public:
	SubjectSeries(std::string id, Matrix frames) : SubjectSeries(std::move(id), std::move(frames), {}) {}

	SubjectSeries(std::string id, Matrix frames, std::vector<bool> zero_variance)
		: id_(std::move(id)), data_(std::move(frames), RowSemantics::frames),
		  zero_variance_(std::move(zero_variance))
	{
		if (data_.rows() == 0 || data_.cols() == 0)
			throw Error(ErrorCode::EmptyMatrix, "subject '" + id_ + "' has no data");
		if (data_.rows() < 2 || data_.cols() < 2)
			throw Error(ErrorCode::BadDimension, "subject '" + id_ + "' needs at least 2 frames and 2 voxels");
		if (!zero_variance_.empty() && Eigen::Index(zero_variance_.size()) != data_.cols())
			throw Error(ErrorCode::BadDimension, "zero-variance flags do not match voxel count");
	}

	const std::string& id() const noexcept { return id_; }
	const DataMatrix& data() const noexcept { return data_; }
	const Matrix& values() const noexcept { return data_.values(); }
	Eigen::Index n_frames() const noexcept { return data_.rows(); }
	Eigen::Index n_voxels() const noexcept { return data_.cols(); }

	/// Columns found constant by standardize(); empty if never standardized.
	const std::vector<bool>& zero_variance() const noexcept { return zero_variance_; }

private:
	std::string id_;
	DataMatrix data_;
	std::vector<bool> zero_variance_;
};

class GroupDataset {
public:
	GroupDataset() = default;

	explicit GroupDataset(std::vector<SubjectSeries> subjects, std::optional<std::string> mask_id = {})
		: subjects_(std::move(subjects)), mask_id_(std::move(mask_id))
	{
		std::set<std::string> ids;
		for (const auto& s : subjects_) {
			if (s.n_voxels() != subjects_.front().n_voxels())
				throw Error(ErrorCode::BadDimension, "subject '" + s.id() + "' has " +
				                                         std::to_string(s.n_voxels()) + " voxels, expected " +
				                                         std::to_string(subjects_.front().n_voxels()));
			if (!ids.insert(s.id()).second)
				throw Error(ErrorCode::DuplicateSubject, "subject id '" + s.id() + "' appears twice");
		}
	}

	const std::vector<SubjectSeries>& subjects() const noexcept { return subjects_; }
	std::size_t size() const noexcept { return subjects_.size(); }
	Eigen::Index n_voxels() const noexcept { return subjects_.empty() ? 0 : subjects_.front().n_voxels(); }
	const std::optional<std::string>& mask_id() const noexcept { return mask_id_; }

	/// Sub-dataset with the subjects at the given positions, in that order.
	GroupDataset subset(const std::vector<std::size_t>& positions) const
	{
		std::vector<SubjectSeries> out;
		out.reserve(positions.size());
		for (auto p : positions)
			out.push_back(subjects_.at(p));
		return GroupDataset(std::move(out), mask_id_);
	}

private:
	std::vector<SubjectSeries> subjects_;
	std::optional<std::string> mask_id_;
};

/// Centers every column in place and, if `scale`, divides it by its sample
/// standard deviation (denominator n - 1). Constant columns become zero and
/// are flagged in the returned vector.
inline std::vector<bool> standardize_columns(Matrix& m, bool scale = true)
{
	if (m.rows() == 0 || m.cols() == 0)
		throw Error(ErrorCode::EmptyMatrix, "cannot standardize an empty matrix");
	if (m.rows() < 2)
		throw Error(ErrorCode::BadDimension, "standardize needs at least 2 rows");

	const double n = double(m.rows());
	std::vector<bool> flags(static_cast<std::size_t>(m.cols()), false);
	for (Eigen::Index j = 0; j < m.cols(); ++j) {
		auto col = m.col(j);
		const double scale_ref = col.cwiseAbs().maxCoeff();
		col.array() -= col.mean();
		const double ss = col.squaredNorm();
		// constant up to roundoff of the original magnitude
		if (ss <= 0.0 || std::sqrt(ss / n) <= 1e-13 * scale_ref) {
			col.setZero();
			flags[std::size_t(j)] = true;
			continue;
		}
		if (scale)
			col /= std::sqrt(ss / (n - 1.0));
	}
	return flags;
}

inline SubjectSeries standardize(const SubjectSeries& series, bool scale = true)
{
	Matrix m = series.values();
	auto flags = standardize_columns(m, scale);
	return SubjectSeries(series.id(), std::move(m), std::move(flags));
}

} // namespace canica
