/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/include/iccr/cascade.hpp
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
#include "iccr/pdm.hpp"
#include "iccr/regression.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace iccr {

enum class Method { Sdm, Ccr };

std::string to_string(Method method);
Method method_from_string(const std::string& s);

/// Sampled-regression state kept for incremental SDM; v = (XXᵀ + λI)⁻¹.
struct SdmSolverState
{
	Matrix v;
	double ridge = 0.0;
	Eigen::Index count = 0;
};

struct CascadeLevel
{
	LinearRegressor regressor;
	PerturbationStats stats;
	std::optional<CrSolverState> solver_state;
	std::optional<SdmSolverState> sdm_state;
	/// Mean point-to-point error (pixels) of the level's training shapes before and after the update.
	double train_error_in = 0.0;
	double train_error_out = 0.0;
};

struct CascadeModel
{
	Method method = Method::Sdm;
	PdmModel pdm;
	FeatureExtractor extractor;
	FeaturePca pca;
	std::vector<CascadeLevel> levels;

	Eigen::Index num_levels() const { return static_cast<Eigen::Index>(levels.size()); }
	/// Throws std::invalid_argument when the pieces disagree on dimensions.
	void validate() const;
};

struct CascadeOptions
{
	int levels = 3;
	int samples_per_image = 10;		 ///< K for sampled training
	int stats_samples_per_image = 10; ///< validation draws for next-level statistics
	double shrinkage = 0.05;
	Ridge ridge = Ridge::relative();
	double delta_x = 1.0;
	/// When false the rigid block of every level's data term is zeroed.
	bool include_rigid = true;
	std::uint64_t seed = 0;
	int jobs = 1;
};

/// Σ ← (1 − α)Σ + α·diag(Σ)
Matrix shrink_covariance(const Matrix& cov, double alpha);

/// Unbiased mean and covariance of the columns of `samples`.
PerturbationStats fit_normal(const Matrix& samples);

/**
 * Fits the shared feature PCA from ground-truth features plus
 * `perturbations_per_image` draws from `init` around each ground truth.
 */
FeaturePca fit_training_pca(std::span<const TrainingImage> images, const FeatureExtractor& extractor,
							const PdmModel& pdm, const PerturbationStats& init, Eigen::Index d,
							int perturbations_per_image = 3, std::uint64_t seed = 0, int jobs = 1);

/**
 * Sampled cascade: level i draws K perturbations per image from
 * N(p* + μ⁽ⁱ⁾, Σ⁽ⁱ⁾), and the Normal fitted to its residuals becomes level
 * i+1's statistics.
 */
CascadeModel train_sdm(std::span<const TrainingImage> images, const PdmModel& pdm, const FeatureExtractor& extractor,
					   const FeaturePca& pca, const PerturbationStats& init_stats, const CascadeOptions& options = {});

/**
 * Continuous cascade. Regressors come from the closed form; sampling is
 * only used to estimate the next level's statistics.
 */
CascadeModel train_ccr(std::span<const TrainingImage> images, const PdmModel& pdm, const FeatureExtractor& extractor,
					   const FeaturePca& pca, const PerturbationStats& init_stats, const CascadeOptions& options = {});

/// Same as train_ccr with a functional set that was already built.
CascadeModel train_ccr(std::span<const TrainingImage> images, const FunctionalTrainingSet& ts, const PdmModel& pdm,
					   const FeatureExtractor& extractor, const FeaturePca& pca, const PerturbationStats& init_stats,
					   const CascadeOptions& options = {});

/// Raised when a cascade step would evaluate features of an out-of-frame shape.
class FitError : public Error
{
public:
	FitError(const std::string& what, ShapeParams last_valid, int level)
		: Error(what), last_valid_(std::move(last_valid)), level_(level)
	{
	}
	const ShapeParams& last_valid() const { return last_valid_; }
	int level() const { return level_; }

private:
	ShapeParams last_valid_;
	int level_;
};

struct FitResult
{
	ShapeParams params;
	/// Reconstruction residual of the raw features that fed the last level.
	double reconstruction_score = 0.0;
};

/// p⁽ⁱ⁺¹⁾ = p⁽ⁱ⁾ − R⁽ⁱ⁾ f(I, p⁽ⁱ⁾), exactly L times.
FitResult fit_with_diagnostics(const CascadeModel& model, const ImageLike& image, const ShapeParams& p0);
ShapeParams fit(const CascadeModel& model, const ImageLike& image, const ShapeParams& p0);

/// Mean Euclidean distance between corresponding landmarks.
double mean_point_error(const Shape& a, const Shape& b);

} // namespace iccr
