/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/include/iccr/pdm.hpp
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

#include "iccr/linalg.hpp"

#include <span>

namespace iccr {

/// Number of rigid (similarity) parameters at the front of every parameter vector.
inline constexpr Eigen::Index kRigidDims = 4;

/**
 * A set of n ≥ 3 landmarks in pixel coordinates, one (x, y) row per landmark.
 *
 * The flattened 2n-vector layout used throughout is interleaved:
 * [x_0, y_0, x_1, y_1, ...].
 */
class Shape
{
public:
	using Points = Eigen::Matrix<double, Eigen::Dynamic, 2>;

	Shape() = default;
	explicit Shape(Points points);

	static Shape from_vector(const Vector& interleaved);

	Eigen::Index size() const { return points_.rows(); }
	const Points& points() const { return points_; }
	Eigen::Vector2d point(Eigen::Index i) const { return points_.row(i).transpose(); }
	Vector to_vector() const;
	Eigen::Vector2d centroid() const;

	Shape translated(double dx, double dy) const;

private:
	Points points_;
};

/**
 * Similarity transform t_q. The canonical view is (scale, rotation, tx, ty);
 * the linearised view (a, b, tx, ty) with a = s·cosθ − 1, b = s·sinθ is the
 * one regressors operate on, since the transform is linear in it.
 */
struct RigidParams
{
	double scale = 1.0;
	double rotation = 0.0;
	double tx = 0.0;
	double ty = 0.0;

	double a() const;
	double b() const;
	static RigidParams from_linear(double a, double b, double tx, double ty);

	/// Applies the transform to a point.
	Eigen::Vector2d apply(const Eigen::Vector2d& v) const;
};

/// p = [q, c]: rigid parameters followed by k flexible coefficients.
struct ShapeParams
{
	RigidParams rigid;
	Vector flexible;

	Eigen::Index size() const { return kRigidDims + flexible.size(); }

	/// [a, b, tx, ty, c_1, ..., c_k]
	Vector to_vector() const;
	static ShapeParams from_vector(const Vector& p);
	static ShapeParams identity(Eigen::Index k);
};

/**
 * Point Distribution Model: mean shape s₀, orthonormal 2n×k basis B_s and
 * per-mode variances. The basis is orthogonal to the similarity tangent
 * space of s₀ (span{s₀, s₀⊥, 1_x, 1_y}), which is what makes decompose()
 * an exact inverse of compose() on in-span shapes.
 */
struct PdmModel
{
	Shape mean_shape;
	Matrix basis;
	Vector eigenvalues;

	Eigen::Index num_landmarks() const { return mean_shape.size(); }
	Eigen::Index num_modes() const { return basis.cols(); }
	Eigen::Index num_params() const { return kRigidDims + basis.cols(); }

	/// Checks orthonormality, eigenvalue ordering and dimensions; throws on violation.
	void validate() const;
};

struct PdmTrainOptions
{
	double variance_kept = 0.98;
	int max_procrustes_iterations = 100;
	double procrustes_tolerance = 1e-10;
	/// When set, exactly this many modes are kept (bounded by the achievable rank).
	Eigen::Index fixed_modes = -1;
};

/**
 * Generalised Procrustes alignment followed by PCA of the aligned shapes
 * (after projecting out the similarity directions of the mean). The mean
 * shape is centred at the origin with the mean centroid size of the inputs
 * and the orientation of the first shape, so rigid parameters of image
 * shapes stay close to (1, 0, centre).
 */
PdmModel train_pdm(std::span<const Shape> shapes, const PdmTrainOptions& options = {});

/// s = t_q(s₀ + B_s c)
Shape compose(const PdmModel& model, const ShapeParams& params);

/**
 * Least-squares similarity alignment of s₀ to `shape`, then projection of
 * the back-transformed residual onto the basis.
 */
ShapeParams decompose(const PdmModel& model, const Shape& shape);

/**
 * ∂s/∂p as a 2n×m matrix (interleaved rows, parameter columns in the
 * [a, b, tx, ty, c] layout).
 */
Matrix shape_jacobian(const PdmModel& model, const ShapeParams& params);

/// Least-squares similarity mapping `from` onto `to` (both n×2).
RigidParams align_similarity(const Shape& from, const Shape& to);

/**
 * Orthonormal basis (2n×4) of the similarity tangent space of a shape:
 * scaling/rotation about the origin and the two translations.
 */
Matrix similarity_basis(const Shape& shape);

} // namespace iccr
