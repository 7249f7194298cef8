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
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "canica/data_model.hpp"

/*
 * CNIC1 matrix files, little-endian:
 *
 *   offset  size  field
 *   0       4     magic "CNIC"
 *   4       1     version 0x01
 *   5       8     rows (u64)
 *   13      8     cols (u64)
 *   21      1     row semantics code
 *   22      8*rows*cols   IEEE-754 binary64 values, row-major
 */

namespace canica {

namespace cnic {
inline constexpr std::array<char, 4> magic{'C', 'N', 'I', 'C'};
inline constexpr std::uint8_t version = 0x01;
inline constexpr std::size_t header_size = 22;

inline void put_u64(std::string& buf, std::uint64_t v)
{
	for (int i = 0; i < 8; ++i)
		buf.push_back(char((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64(const unsigned char* p)
{
	std::uint64_t v = 0;
	for (int i = 0; i < 8; ++i)
		v |= std::uint64_t(p[i]) << (8 * i);
	return v;
}
} // namespace cnic

/// Serializes to the CNIC1 byte layout.
inline std::string encode_matrix(const DataMatrix& m)
{
	if (m.cols() == 0)
		throw Error(ErrorCode::EmptyMatrix, "refusing to write a matrix with no columns");
	std::string buf;
	buf.reserve(cnic::header_size + 8 * std::size_t(m.rows()) * std::size_t(m.cols()));
	buf.append(cnic::magic.data(), cnic::magic.size());
	buf.push_back(char(cnic::version));
	cnic::put_u64(buf, std::uint64_t(m.rows()));
	cnic::put_u64(buf, std::uint64_t(m.cols()));
	buf.push_back(char(m.row_semantics()));
	const Matrix& v = m.values();
	for (Eigen::Index i = 0; i < v.rows(); ++i)
		for (Eigen::Index j = 0; j < v.cols(); ++j)
			cnic::put_u64(buf, std::bit_cast<std::uint64_t>(v(i, j)));
	return buf;
}

inline DataMatrix decode_matrix(const std::string& bytes)
{
	const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
	if (bytes.size() < cnic::header_size)
		throw Error(bytes.size() >= 5 && std::memcmp(p, cnic::magic.data(), 4) == 0 ? ErrorCode::TruncatedPayload
		                                                                             : ErrorCode::BadMagic,
		            "file too short for a CNIC1 header");
	if (std::memcmp(p, cnic::magic.data(), 4) != 0 || p[4] != cnic::version)
		throw Error(ErrorCode::BadMagic, "not a CNIC1 matrix file");

	const std::uint64_t rows = cnic::get_u64(p + 5);
	const std::uint64_t cols = cnic::get_u64(p + 13);
	const std::uint8_t sem = p[21];
	if (sem > std::uint8_t(RowSemantics::components))
		throw Error(ErrorCode::BadMagic, "unknown row semantics code " + std::to_string(sem));

	constexpr std::uint64_t max_index = std::uint64_t(std::numeric_limits<Eigen::Index>::max());
	if (rows > max_index || cols > max_index || (cols != 0 && rows > (max_index / 8) / cols))
		throw Error(ErrorCode::ShapeOverflow, "shape " + std::to_string(rows) + "x" + std::to_string(cols) +
		                                          " does not fit in memory");
	const std::uint64_t payload = rows * cols * 8;
	if (bytes.size() - cnic::header_size < payload)
		throw Error(ErrorCode::TruncatedPayload, "expected " + std::to_string(payload) + " payload bytes, found " +
		                                             std::to_string(bytes.size() - cnic::header_size));
	if (bytes.size() - cnic::header_size > payload)
		throw Error(ErrorCode::TruncatedPayload, "trailing bytes after payload");

	Matrix v(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
	const unsigned char* q = p + cnic::header_size;
	for (Eigen::Index i = 0; i < v.rows(); ++i)
		for (Eigen::Index j = 0; j < v.cols(); ++j, q += 8) {
			const double x = std::bit_cast<double>(cnic::get_u64(q));
			if (!std::isfinite(x))
				throw Error(ErrorCode::NonFiniteValue, "non-finite value at (" + std::to_string(i) + ", " +
				                                           std::to_string(j) + ")");
			v(i, j) = x;
		}
	return DataMatrix(std::move(v), RowSemantics(sem));
}

inline void write_matrix(const DataMatrix& m, const std::filesystem::path& path)
{
	const std::string bytes = encode_matrix(m);
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out)
		throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
	out.write(bytes.data(), std::streamsize(bytes.size()));
	if (!out)
		throw Error(ErrorCode::Io, "short write to '" + path.string() + "'");
}

inline std::string read_file(const std::filesystem::path& path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
	std::ostringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

inline DataMatrix read_matrix(const std::filesystem::path& path)
{
	return decode_matrix(read_file(path));
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line)
{
	std::vector<std::string> out;
	std::string cell;
	std::istringstream ss(line);
	while (std::getline(ss, cell, ','))
		out.push_back(cell);
	if (!line.empty() && line.back() == ',')
		out.emplace_back();
	return out;
}

inline std::string trim(const std::string& s)
{
	const auto b = s.find_first_not_of(" \t\r");
	if (b == std::string::npos)
		return {};
	const auto e = s.find_last_not_of(" \t\r");
	return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& cell, double& out)
{
	const std::string t = trim(cell);
	const char* first = t.data();
	const char* last = t.data() + t.size();
	if (first != last && *first == '+')
		++first;
	auto [ptr, ec] = std::from_chars(first, last, out);
	return ec == std::errc() && ptr == last && first != last;
}
} // namespace detail

/// Comma-separated decimal floats, one matrix row per line. A first line
/// containing any non-numeric field is treated as a header and skipped.
inline DataMatrix read_csv(const std::filesystem::path& path, RowSemantics semantics = RowSemantics::frames)
{
	std::istringstream in(read_file(path));
	std::vector<std::vector<double>> rows;
	std::string line;
	bool first = true;
	std::size_t line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (detail::trim(line).empty())
			continue;
		const auto cells = detail::split_csv_line(line);
		std::vector<double> row(cells.size());
		bool numeric = true;
		for (std::size_t j = 0; j < cells.size() && numeric; ++j)
			numeric = detail::parse_double(cells[j], row[j]);
		if (!numeric) {
			if (first) {
				first = false;
				continue;
			}
			throw Error(ErrorCode::BadDimension, path.string() + ":" + std::to_string(line_no) +
			                                         ": non-numeric field");
		}
		first = false;
		if (!rows.empty() && row.size() != rows.front().size())
			throw Error(ErrorCode::BadDimension, path.string() + ":" + std::to_string(line_no) + ": expected " +
			                                         std::to_string(rows.front().size()) + " fields");
		rows.push_back(std::move(row));
	}
	if (rows.empty())
		throw Error(ErrorCode::EmptyMatrix, "no data rows in '" + path.string() + "'");

	Matrix m(Eigen::Index(rows.size()), Eigen::Index(rows.front().size()));
	for (std::size_t i = 0; i < rows.size(); ++i)
		for (std::size_t j = 0; j < rows[i].size(); ++j)
			m(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
	return DataMatrix(std::move(m), semantics);
}

/// Subject files (*.cnic, *.csv) directly inside dir, sorted by name.
inline std::vector<std::filesystem::path> list_subject_files(const std::filesystem::path& dir)
{
	namespace fs = std::filesystem;
	std::error_code ec;
	if (!fs::is_directory(dir, ec))
		throw Error(ErrorCode::Io, "input directory '" + dir.string() + "' does not exist");
	std::vector<fs::path> out;
	for (const auto& entry : fs::directory_iterator(dir)) {
		const auto ext = entry.path().extension();
		if (entry.is_regular_file() && (ext == ".cnic" || ext == ".csv"))
			out.push_back(entry.path());
	}
	std::sort(out.begin(), out.end());
	return out;
}

/// One subject per file; the file stem is the subject id.
inline GroupDataset load_dataset(const std::vector<std::filesystem::path>& files)
{
	std::vector<SubjectSeries> subjects;
	for (const auto& f : files) {
		DataMatrix m = f.extension() == ".csv" ? read_csv(f) : read_matrix(f);
		subjects.emplace_back(f.stem().string(), m.values());
	}
	return GroupDataset(std::move(subjects));
}

} // namespace canica
