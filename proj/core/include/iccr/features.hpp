/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/include/iccr/features.hpp
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

#include "iccr/image.hpp"
#include "iccr/linalg.hpp"
#include "iccr/pdm.hpp"

#include <atomic>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace iccr {

enum class FeatureKind { PixelPatch, GradientHistogram, Analytic };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& s);

/**
 * One analytic feature of a landmark position (x, y):
 * amplitude·sin(wx·x + wy·y + phase) + bx·x + by·y + offset.
 * With amplitude = 0 the feature is affine.
 */
struct AnalyticTerm
{
	double amplitude = 0.0;
	double wx = 0.0;
	double wy = 0.0;
	double phase = 0.0;
	double bx = 0.0;
	double by = 0.0;
	double offset = 0.0;

	double value(double x, double y) const;
	Eigen::Vector2d gradient(double x, double y) const;
};

/// Per-landmark lists of analytic terms; block l depends only on landmark l.
struct AnalyticMap
{
	std::vector<std::vector<AnalyticTerm>> landmarks;

	static AnalyticMap random_affine(Eigen::Index n, Eigen::Index per_landmark, std::uint64_t seed);
	static AnalyticMap random_smooth(Eigen::Index n, Eigen::Index per_landmark, std::uint64_t seed);
	/// Splits `total` features as evenly as possible over n landmarks.
	static AnalyticMap random_smooth_total(Eigen::Index n, Eigen::Index total, std::uint64_t seed);
};

/**
 * Whole-shape raw feature extraction f(I, s). Raw features are laid out in
 * one contiguous block per landmark, and each block depends only on its own
 * landmark position. That locality lets a single whole-shape shift recover
 * every landmark's derivative at once.
 *
 * Every extract_raw() call is counted; copies share the counter.
 */
class FeatureExtractor
{
public:
	/// Empty extractor (no landmarks); assign a factory result before use.
	FeatureExtractor();

	static FeatureExtractor pixel_patch(Eigen::Index num_landmarks, int radius = 8);
	static FeatureExtractor gradient_histogram(Eigen::Index num_landmarks, int cell_size = 4);
	static FeatureExtractor analytic(AnalyticMap map);

	FeatureKind kind() const { return kind_; }
	int patch_radius() const { return patch_radius_; }
	int cell_size() const { return cell_size_; }
	Eigen::Index num_landmarks() const { return num_landmarks_; }
	Eigen::Index raw_dim() const { return block_offsets_.back(); }
	Eigen::Index block_offset(Eigen::Index landmark) const { return block_offsets_[static_cast<std::size_t>(landmark)]; }
	Eigen::Index block_size(Eigen::Index landmark) const
	{
		return block_offsets_[static_cast<std::size_t>(landmark) + 1] - block_offsets_[static_cast<std::size_t>(landmark)];
	}
	const AnalyticMap& analytic_map() const { return analytic_; }

	/// Throws Error("shape out of frame") when every landmark lies outside an image-based extractor's frame.
	Vector extract_raw(const ImageLike& image, const Shape& shape) const;

	/// Closed-form per-row derivatives along x and y; analytic kind only.
	std::pair<Vector, Vector> analytic_derivatives(const Shape& shape) const;

	std::uint64_t extraction_count() const { return counter_->load(); }
	void reset_extraction_count() const { counter_->store(0); }
	/// Copy whose extraction counter is independent of this one.
	FeatureExtractor with_private_counter() const;

private:
	FeatureExtractor(FeatureKind kind, Eigen::Index num_landmarks);
	void set_uniform_blocks(Eigen::Index per_landmark);

	void patch_block(const ImageLike& image, double x, double y, double* out) const;
	void hog_block(const ImageLike& image, double x, double y, double* out) const;

	FeatureKind kind_;
	Eigen::Index num_landmarks_ = 0;
	int patch_radius_ = 0;
	int cell_size_ = 0;
	AnalyticMap analytic_;
	std::vector<Eigen::Index> block_offsets_;
	std::shared_ptr<std::atomic<std::uint64_t>> counter_;
};

inline constexpr int kHogCells = 4;
inline constexpr int kHogOrientations = 8;

/**
 * Linear reduction x ↦ P(x − mean) of raw features to d dimensions. The
 * trailing bias entry 1 is appended after projection and never transformed.
 */
struct FeaturePca
{
	Vector mean;
	Matrix projection; ///< d×D, orthonormal rows
	Vector explained_variance;
	double total_variance = 0.0;

	Eigen::Index dim() const { return projection.rows(); }
	Eigen::Index raw_dim() const { return projection.cols(); }

	/// Length d+1, last entry exactly 1.
	Vector project(const Vector& raw) const;
	/// (d+1)×m, last row exactly 0.
	Matrix project_jacobian(const Matrix& raw_jacobian) const;
	/// ‖r − PᵀP r‖ / ‖r‖ with r = raw − mean (0 when r = 0).
	double reconstruction_residual(const Vector& raw) const;

	static FeaturePca identity(Eigen::Index raw_dim);
};

/// Top-d principal directions of the centred samples; throws when d exceeds the rank.
FeaturePca fit_feature_pca(std::span<const Vector> raw_vectors, Eigen::Index d);

/// Features of the shape s(params), length d+1 with trailing bias 1.
Vector extract(const FeatureExtractor& extractor, const FeaturePca& pca, const ImageLike& image,
			   const PdmModel& model, const ShapeParams& params);

enum class DifferenceScheme {
	Central, ///< 5 whole-shape extractions: centre, ±Δ along x, ±Δ along y
	Forward  ///< 3 whole-shape extractions: centre, +Δ along x, +Δ along y
};

/// Raw features at s and their per-row derivatives along x and y.
struct RawDerivatives
{
	Vector center;
	Vector dx;
	Vector dy;
};

RawDerivatives raw_derivatives(const FeatureExtractor& extractor, const ImageLike& image, const Shape& shape,
							   double delta, DifferenceScheme scheme);

/// Chains per-row coordinate derivatives with ∂s/∂p into a D×m raw Jacobian.
Matrix chain_raw_jacobian(const FeatureExtractor& extractor, const Vector& dx, const Vector& dy,
						  const Matrix& shape_jac);

struct FeatureJacobian
{
	Matrix matrix; ///< (d+1)×m, bias row zero
};

/// Central-difference Jacobian of extract() with respect to the parameters.
FeatureJacobian jacobian(const FeatureExtractor& extractor, const FeaturePca& pca, const ImageLike& image,
						 const PdmModel& model, const ShapeParams& params, double delta_x = 1.0);

/// Features and Jacobian from one set of shifted extractions.
struct FeatureSample
{
	Vector raw;
	Vector x;
	Matrix jacobian;

	/// [x, J], the (d+1)×(m+1) functional block.
	Matrix block() const;
};

FeatureSample extract_with_jacobian(const FeatureExtractor& extractor, const FeaturePca& pca, const ImageLike& image,
									const PdmModel& model, const ShapeParams& params, double delta_x = 1.0,
									DifferenceScheme scheme = DifferenceScheme::Central);

} // namespace iccr
