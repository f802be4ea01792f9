/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/include/iccr/synth.hpp
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
#include "iccr/regression.hpp"

#include <memory>
#include <span>
#include <vector>

namespace iccr {

/// Outer eye corners of the built-in face template.
inline constexpr Eigen::Index kLeftEyeOuter = 0;
inline constexpr Eigen::Index kRightEyeOuter = 3;

/**
 * Face-like landmark template centred at the origin. n = 12 gives brows,
 * eyes, nose, mouth and chin; larger n densifies the contour between
 * template points. Indices 0 and 3 are always the outer eye corners.
 */
Shape face_template(Eigen::Index n = 12);

struct WorldOptions
{
	Eigen::Index num_landmarks = 12;
	Eigen::Index num_modes = 6;
	int width = 128;
	int height = 128;
	std::uint64_t seed = 1;
};

/// Generating shape model and frame size shared by all identities.
struct SynthWorld
{
	PdmModel pdm;
	int width = 128;
	int height = 128;
	std::uint64_t seed = 1;
};

/// Random deformation modes orthogonal to the template's similarity span.
SynthWorld make_world(const WorldOptions& options = {});

/// Compactly supported bump amplitude·(1 − r²/R²)⁴ attached to a landmark.
struct Blob
{
	Eigen::Index landmark = 0;
	Eigen::Vector2d offset = Eigen::Vector2d::Zero(); ///< in model units, moves with the similarity transform
	double radius = 8.0;
	double amplitude = 1.0;
};

struct SyntheticIdentity
{
	std::uint64_t seed = 0;
	std::vector<Blob> blobs;
	double background = 0.15;
	double background_gx = 0.0;
	double background_gy = 0.0;
	ShapeParams base; ///< in the world's generating model
};

struct IdentityOptions
{
	int blobs_per_landmark = 2;
	double offset_sigma = 3.0;
	double radius_min = 8.0;
	double radius_max = 13.0;
	double amplitude_min = 0.6;
	double amplitude_max = 1.6;
	/// Standard deviation of the identity's own flexible shape, in units of √λ.
	double shape_spread = 0.7;
	/// 0: every identity shares the world's appearance; 1: independent appearance per identity.
	double appearance_variation = 0.3;
};

SyntheticIdentity make_identity(const SynthWorld& world, std::uint64_t seed, const IdentityOptions& options = {});

/**
 * Smooth functional image: background gradient in [0.1, 0.2] plus
 * saturating blob sum, so intensities stay in [0, 1]. Coordinates are
 * clamped to the frame like a raster.
 */
class SyntheticImage final : public ImageLike
{
public:
	struct PlacedBlob
	{
		double cx;
		double cy;
		double radius;
		double amplitude;
	};

	SyntheticImage(int width, int height, double background, double gx, double gy, std::vector<PlacedBlob> blobs);

	int width() const override { return width_; }
	int height() const override { return height_; }
	double intensity(double x, double y) const override;

	const std::vector<PlacedBlob>& blobs() const { return blobs_; }

private:
	int width_;
	int height_;
	double background_;
	double gx_;
	double gy_;
	std::vector<PlacedBlob> blobs_;
};

std::shared_ptr<SyntheticImage> render_identity(const SynthWorld& world, const SyntheticIdentity& identity,
												const ShapeParams& params);

/**
 * AR(1) motion per parameter around the identity's base parameters:
 * p_t − base = ρ(p_{t−1} − base) + σ⊙ε. Bursts multiply σ for a few frames.
 */
struct MotionModel
{
	double rho = 0.9;
	double flexible_noise = 1.0 / 20.0; ///< σ_i = flexible_noise·√λ_i
	double linear_noise = 0.022;		///< σ for a and b
	double translation_noise = 1.74;	///< σ for tx and ty, pixels
	double burst_probability = 0.0;		///< per-frame chance a burst starts
	int burst_length = 3;
	double burst_factor = 8.0;
	double margin = 4.0; ///< ground truth kept this many pixels inside the frame
};

/// Per-dimension innovation standard deviations of a motion model.
Vector motion_sigma(const MotionModel& motion, const PdmModel& model);

struct SyntheticFrame
{
	std::shared_ptr<const SyntheticImage> image;
	ShapeParams params; ///< generating-model parameters
	Shape shape;
	bool burst = false;
};

struct SyntheticSequence
{
	std::vector<SyntheticFrame> frames;
	MotionModel motion;
	std::uint64_t seed = 0;
};

SyntheticSequence generate_sequence(const SynthWorld& world, const SyntheticIdentity& identity, int length,
									const MotionModel& motion, std::uint64_t seed);

/// Pooled statistics of δp = p_t − p_{t+g}.
struct SequenceStats
{
	PerturbationStats stats;
	Eigen::Index pair_count = 0;
	std::vector<int> gaps;
};

/// Each inner vector holds one sequence's parameter vectors in frame order.
SequenceStats estimate_stats(std::span<const std::vector<Vector>> sequences, std::span<const int> gaps);

/// Decomposes every ground-truth shape with `model` before estimating.
SequenceStats estimate_stats_from_shapes(const PdmModel& model, std::span<const std::vector<Shape>> sequences,
										 std::span<const int> gaps);

/// Closed-form variance of x_t − x_{t+g} for a stationary AR(1) with innovation σ.
double ar1_increment_variance(double rho, double sigma, int gap);

/// Training and test sequences over disjoint identity sets of one world.
struct DatasetOptions
{
	WorldOptions world;
	IdentityOptions identity;
	MotionModel motion;
	int train_identities = 16;
	int train_length = 40;
	int test_sequences = 10;
	int test_length = 120;
	std::uint64_t seed = 7;
};

struct SyntheticDataset
{
	SynthWorld world;
	std::vector<SyntheticSequence> train;
	std::vector<SyntheticSequence> test;
};

SyntheticDataset make_dataset(const DatasetOptions& options);

/// Ground-truth shapes of each sequence, in frame order.
std::vector<std::vector<Shape>> sequence_shapes(std::span<const SyntheticSequence> sequences);

/// Every `stride`-th frame of every sequence, with ground truth decomposed in `model`.
std::vector<TrainingImage> training_images(std::span<const SyntheticSequence> sequences, const PdmModel& model,
										   int stride = 1);

} // namespace iccr
