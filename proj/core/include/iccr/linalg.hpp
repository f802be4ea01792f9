/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/include/iccr/linalg.hpp
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
#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace iccr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/**
 * Raised for data-dependent failures (degenerate inputs, singular systems,
 * shapes out of frame). Dimension or argument misuse raises
 * std::invalid_argument instead.
 */
class Error : public std::runtime_error
{
public:
	using std::runtime_error::runtime_error;
};

/// Replaces m by (m + mᵀ)/2.
void symmetrize(Matrix& m);

/// Copies the strictly lower triangle onto the upper one, tile by tile.
void mirror_lower(Matrix& m);

/// ‖a − ref‖_F / ‖ref‖_F, or ‖a‖_F when ref is zero.
double relative_frobenius(const Matrix& a, const Matrix& ref);

/// Largest |m(i,j) − m(j,i)|.
double max_asymmetry(const Matrix& m);

bool all_finite(const Matrix& m);

/**
 * Inverse of a symmetric positive-definite matrix through a Cholesky
 * factorisation. Throws Error(message) when the factorisation fails or the
 * reciprocal condition estimate is below 1e-15.
 */
Matrix spd_inverse(const Matrix& m, const std::string& message);

/**
 * Solves X·m = rhs for X where m is symmetric positive definite, returning
 * rhs·m⁻¹ without forming the inverse.
 */
Matrix spd_right_solve(const Matrix& rhs, const Matrix& m, const std::string& message);

/// Eigenvalue floor check for a symmetric matrix: min eigenvalue ≥ −tol.
bool is_psd(const Matrix& m, double tol = 1e-10);

/// SplitMix64 step; used to derive independent per-item seeds from one seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

using Rng = std::mt19937_64;

/// Standard normal vector of length n.
Vector standard_normal(Rng& rng, Eigen::Index n);

/**
 * Draws `count` samples (columns) from N(mean, cov). The covariance only has
 * to be PSD; a symmetric eigendecomposition provides the square root.
 */
Matrix sample_gaussian(Rng& rng, const Vector& mean, const Matrix& cov, Eigen::Index count);

/**
 * Runs fn(i) for i in [0, n) on up to `jobs` threads. Work items must write
 * to disjoint outputs; result order is therefore independent of scheduling.
 */
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/**
 * Sum of matrices in a fixed pairwise (tree) order, so the floating-point
 * result does not depend on how the terms were produced.
 */
Matrix tree_sum(const std::vector<Matrix>& terms);

} // namespace iccr
