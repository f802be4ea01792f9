/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/src/linalg.cpp
 *
 * Copyright 2026 The iccr authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "iccr/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace iccr {

void symmetrize(Matrix& m)
{
	if (m.rows() != m.cols()) {
		throw std::invalid_argument("symmetrize: matrix is not square");
	}
	const Matrix t = m.transpose();
	m = 0.5 * (m + t);
}

void mirror_lower(Matrix& m)
{
	if (m.rows() != m.cols()) {
		throw std::invalid_argument("mirror_lower: matrix is not square");
	}
	constexpr Eigen::Index tile = 64; // plain transposed copies thrash the cache above ~1000
	const auto n = m.rows();
	for (Eigen::Index j = 0; j < n; j += tile) {
		const auto bj = std::min(tile, n - j);
		auto diag = m.block(j, j, bj, bj);
		diag.triangularView<Eigen::StrictlyUpper>() = diag.transpose();
		for (Eigen::Index i = j + bj; i < n; i += tile) {
			const auto bi = std::min(tile, n - i);
			m.block(j, i, bj, bi) = m.block(i, j, bi, bj).transpose();
		}
	}
}

double relative_frobenius(const Matrix& a, const Matrix& ref)
{
	if (a.rows() != ref.rows() || a.cols() != ref.cols()) {
		throw std::invalid_argument("relative_frobenius: dimension mismatch");
	}
	const double denom = ref.norm();
	const double num = (a - ref).norm();
	return denom > 0.0 ? num / denom : num;
}

double max_asymmetry(const Matrix& m)
{
	if (m.rows() != m.cols()) {
		throw std::invalid_argument("max_asymmetry: matrix is not square");
	}
	return (m - m.transpose()).cwiseAbs().maxCoeff();
}

bool all_finite(const Matrix& m)
{
	return m.allFinite();
}

namespace {

Eigen::LLT<Matrix> checked_llt(const Matrix& m, const std::string& message)
{
	if (m.rows() != m.cols()) {
		throw std::invalid_argument("expected a square matrix");
	}
	Eigen::LLT<Matrix> llt(m);
	if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-15)) {
		throw Error(message);
	}
	return llt;
}

} // namespace

Matrix spd_inverse(const Matrix& m, const std::string& message)
{
	const auto llt = checked_llt(m, message);
	Matrix inv = llt.solve(Matrix::Identity(m.rows(), m.cols()));
	symmetrize(inv);
	return inv;
}

Matrix spd_right_solve(const Matrix& rhs, const Matrix& m, const std::string& message)
{
	if (rhs.cols() != m.rows()) {
		throw std::invalid_argument("spd_right_solve: dimension mismatch");
	}
	const auto llt = checked_llt(m, message);
	// X m = rhs  <=>  m Xᵀ = rhsᵀ (m symmetric)
	return llt.solve(rhs.transpose()).transpose();
}

bool is_psd(const Matrix& m, double tol)
{
	if (m.rows() != m.cols()) {
		return false;
	}
	if (m.size() == 0) {
		return true;
	}
	Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
	return es.eigenvalues().minCoeff() >= -tol;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream)
{
	std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
	z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
	z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
	return z ^ (z >> 31);
}

Vector standard_normal(Rng& rng, Eigen::Index n)
{
	std::normal_distribution<double> normal(0.0, 1.0);
	Vector v(n);
	for (Eigen::Index i = 0; i < n; ++i) {
		v(i) = normal(rng);
	}
	return v;
}

Matrix sample_gaussian(Rng& rng, const Vector& mean, const Matrix& cov, Eigen::Index count)
{
	const auto m = mean.size();
	if (cov.rows() != m || cov.cols() != m) {
		throw std::invalid_argument("sample_gaussian: covariance dimension mismatch");
	}
	Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
	const Vector sd = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
	const Matrix root = es.eigenvectors() * sd.asDiagonal();
	std::normal_distribution<double> normal(0.0, 1.0);
	Matrix z(m, count);
	for (Eigen::Index c = 0; c < count; ++c) {
		for (Eigen::Index r = 0; r < m; ++r) {
			z(r, c) = normal(rng);
		}
	}
	Matrix out = root * z;
	out.colwise() += mean;
	return out;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn)
{
	const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
	if (workers <= 1) {
		for (std::size_t i = 0; i < n; ++i) {
			fn(i);
		}
		return;
	}
	std::atomic<std::size_t> next{0};
	std::exception_ptr failure;
	std::mutex failure_mutex;
	std::vector<std::thread> pool;
	pool.reserve(workers);
	for (std::size_t w = 0; w < workers; ++w) {
		pool.emplace_back([&] {
			for (;;) {
				const std::size_t i = next.fetch_add(1);
				if (i >= n) {
					return;
				}
				try {
					fn(i);
				} catch (...) {
					std::lock_guard lock(failure_mutex);
					if (!failure) {
						failure = std::current_exception();
					}
				}
			}
		});
	}
	for (auto& t : pool) {
		t.join();
	}
	if (failure) {
		std::rethrow_exception(failure);
	}
}

Matrix tree_sum(const std::vector<Matrix>& terms)
{
	if (terms.empty()) {
		throw std::invalid_argument("tree_sum: no terms");
	}
	std::vector<Matrix> level = terms;
	while (level.size() > 1) {
		std::vector<Matrix> next;
		next.reserve((level.size() + 1) / 2);
		for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
			next.push_back(level[i] + level[i + 1]);
		}
		if (level.size() % 2 == 1) {
			next.push_back(std::move(level.back()));
		}
		level = std::move(next);
	}
	return level.front();
}

} // namespace iccr
