/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/include/iccr/regression.hpp
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

#include "iccr/features.hpp"
#include "iccr/linalg.hpp"
#include "iccr/pdm.hpp"

#include <memory>
#include <span>
#include <vector>

namespace iccr {

/**
 * Ridge strength λ added to a normal matrix N. Relative mode resolves to
 * factor·trace(N)/dim(N), which keeps the default scale-free.
 */
struct Ridge
{
	enum class Mode { Absolute, Relative };

	Mode mode = Mode::Relative;
	double value = 1e-3;

	static Ridge absolute(double lambda) { return {Mode::Absolute, lambda}; }
	static Ridge relative(double factor = 1e-3) { return {Mode::Relative, factor}; }

	double resolve(const Matrix& normal) const;
};

/// p ← p − R·x; R is m×(d+1) with the bias column last.
struct LinearRegressor
{
	Matrix matrix;

	Eigen::Index num_params() const { return matrix.rows(); }
	Eigen::Index feature_dim() const { return matrix.cols(); }
};

/// δp = R·x
Vector predict(const LinearRegressor& reg, const Vector& x);

/// Mean and covariance of the perturbation distribution p(δp).
struct PerturbationStats
{
	Vector mean;
	Matrix covariance;

	Eigen::Index dim() const { return mean.size(); }
	static PerturbationStats zero(Eigen::Index m);
	/// Throws Error when the covariance is not symmetric PSD.
	void validate() const;
};

/// Result of a direct sampled solve; `v` is (XXᵀ + λI)⁻¹.
struct SampledSolution
{
	LinearRegressor regressor;
	Matrix v;
	double ridge = 0.0;
};

/**
 * Streaming normal equations Σ x xᵀ and Σ y xᵀ, so very large sample
 * counts never have to be held in memory.
 */
class SampledNormalEquations
{
public:
	SampledNormalEquations(Eigen::Index feature_dim, Eigen::Index target_dim);

	void add(const Vector& x, const Vector& y);
	/// Columns of X and Y are paired samples.
	void add_batch(const Matrix& x, const Matrix& y);

	Eigen::Index count() const { return count_; }
	const Matrix& xxt() const { return xxt_; }
	const Matrix& yxt() const { return yxt_; }

	/// Throws Error("rank deficient; set ridge > 0") when XXᵀ + λI is singular.
	SampledSolution solve(const Ridge& ridge) const;

private:
	Matrix xxt_;
	Matrix yxt_;
	Eigen::Index count_ = 0;
};

/// R = Y Xᵀ (X Xᵀ + λI)⁻¹
LinearRegressor train_sampled(const Matrix& x, const Matrix& y, const Ridge& ridge = Ridge::relative());
SampledSolution solve_sampled(const Matrix& x, const Matrix& y, const Ridge& ridge = Ridge::relative());

/// An image with its ground-truth parameters.
struct TrainingImage
{
	std::shared_ptr<const ImageLike> image;
	ShapeParams ground_truth;
};

/**
 * Per-image functional blocks D_j = [x_j, J_j] of size (d+1)×(m+1), where
 * d+1 counts the bias entry.
 */
struct FunctionalTrainingSet
{
	std::vector<Matrix> blocks;
	Matrix sum_d;
	Ridge ridge = Ridge::relative();

	Eigen::Index count() const { return static_cast<Eigen::Index>(blocks.size()); }
	Eigen::Index feature_dim() const { return sum_d.rows(); }
	Eigen::Index num_params() const { return sum_d.cols() - 1; }

	void add(Matrix block);
	static FunctionalTrainingSet from_blocks(std::vector<Matrix> blocks, const Ridge& ridge = Ridge::relative());
};

/**
 * Extracts features and Jacobians at the ground truth of every image. Images
 * are processed on up to `jobs` threads; sum_d is reduced in a fixed order.
 */
FunctionalTrainingSet build_functional_set(std::span<const TrainingImage> images, const FeatureExtractor& extractor,
										   const FeaturePca& pca, const PdmModel& model,
										   const Ridge& ridge = Ridge::relative(), double delta_x = 1.0, int jobs = 1);

/// Keeps the x column and the listed parameter columns of every block.
FunctionalTrainingSet select_parameters(const FunctionalTrainingSet& ts, std::span<const Eigen::Index> columns);

/// A = [μ, Σ+μμᵀ]
Matrix data_term_a(const PerturbationStats& stats);
/// B = [[1, μᵀ], [μ, Σ+μμᵀ]]
Matrix data_term_b(const PerturbationStats& stats);

/// Everything an incremental update needs; v_inv = (Σ_j D_j B D_jᵀ + λI)⁻¹.
struct CrSolverState
{
	Matrix a;
	Matrix b;
	Matrix v_inv;
	Matrix sum_d;
	double ridge = 0.0;
	Eigen::Index count = 0;
};

struct ContinuousSolution
{
	LinearRegressor regressor;
	CrSolverState state;
};

/// V = Σ_j D_j B D_jᵀ (without ridge), computed as one product of stacked blocks.
Matrix continuous_normal_matrix(const FunctionalTrainingSet& ts, const Matrix& b);

/// Compact closed form R = A (Σ D_j)ᵀ V⁻¹.
ContinuousSolution train_continuous(const FunctionalTrainingSet& ts, const PerturbationStats& stats);

/**
 * Expanded closed form, summing μx_jᵀ + (Σ+μμᵀ)J_jᵀ and
 * x_jx_jᵀ + x_jμᵀJ_jᵀ + J_jμx_jᵀ + J_j(Σ+μμᵀ)J_jᵀ term by term.
 */
LinearRegressor train_continuous_expanded(const FunctionalTrainingSet& ts, const PerturbationStats& stats);

/**
 * Uniform-box continuous regression over flexible parameters only:
 * R = Σ_r (Σ J_j)ᵀ (Σ x_jx_jᵀ + J_jΣ_rJ_jᵀ + λI)⁻¹ with Σ_r = diag(r_i²λ_i/3).
 * `ts` must hold flexible columns only (see select_parameters).
 */
LinearRegressor train_continuous_legacy(const FunctionalTrainingSet& ts, const Vector& r, const Vector& eigenvalues);

/// diag(r_i²λ_i/3)
Matrix uniform_box_covariance(const Vector& r, const Vector& eigenvalues);

/// E[δpᵀ M δp] = Tr(MΣ) + μᵀMμ.
double quadratic_form_expectation(const Matrix& m, const PerturbationStats& stats);

} // namespace iccr
