/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/src/pdm.cpp
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
#include "iccr/pdm.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <numeric>
#include <vector>

namespace iccr {

Shape::Shape(Points points) : points_(std::move(points))
{
	if (points_.rows() < 3) {
		throw std::invalid_argument("Shape: at least 3 landmarks required");
	}
	if (!points_.allFinite()) {
		throw std::invalid_argument("Shape: non-finite coordinates");
	}
}

Shape Shape::from_vector(const Vector& interleaved)
{
	if (interleaved.size() % 2 != 0) {
		throw std::invalid_argument("Shape::from_vector: odd length");
	}
	Points pts(interleaved.size() / 2, 2);
	for (Eigen::Index i = 0; i < pts.rows(); ++i) {
		pts(i, 0) = interleaved(2 * i);
		pts(i, 1) = interleaved(2 * i + 1);
	}
	return Shape(std::move(pts));
}

Vector Shape::to_vector() const
{
	Vector v(2 * points_.rows());
	for (Eigen::Index i = 0; i < points_.rows(); ++i) {
		v(2 * i) = points_(i, 0);
		v(2 * i + 1) = points_(i, 1);
	}
	return v;
}

Eigen::Vector2d Shape::centroid() const
{
	return points_.colwise().mean().transpose();
}

Shape Shape::translated(double dx, double dy) const
{
	Points p = points_;
	p.col(0).array() += dx;
	p.col(1).array() += dy;
	return Shape(std::move(p));
}

double RigidParams::a() const
{
	return scale * std::cos(rotation) - 1.0;
}

double RigidParams::b() const
{
	return scale * std::sin(rotation);
}

RigidParams RigidParams::from_linear(double a, double b, double tx, double ty)
{
	RigidParams q;
	q.scale = std::hypot(1.0 + a, b);
	q.rotation = std::atan2(b, 1.0 + a);
	q.tx = tx;
	q.ty = ty;
	return q;
}

Eigen::Vector2d RigidParams::apply(const Eigen::Vector2d& v) const
{
	const double alpha = 1.0 + a();
	const double beta = b();
	return {alpha * v.x() - beta * v.y() + tx, beta * v.x() + alpha * v.y() + ty};
}

Vector ShapeParams::to_vector() const
{
	Vector p(size());
	p(0) = rigid.a();
	p(1) = rigid.b();
	p(2) = rigid.tx;
	p(3) = rigid.ty;
	p.tail(flexible.size()) = flexible;
	return p;
}

ShapeParams ShapeParams::from_vector(const Vector& p)
{
	if (p.size() < kRigidDims) {
		throw std::invalid_argument("ShapeParams::from_vector: fewer than 4 entries");
	}
	ShapeParams out;
	out.rigid = RigidParams::from_linear(p(0), p(1), p(2), p(3));
	out.flexible = p.tail(p.size() - kRigidDims);
	return out;
}

ShapeParams ShapeParams::identity(Eigen::Index k)
{
	ShapeParams out;
	out.flexible = Vector::Zero(k);
	return out;
}

void PdmModel::validate() const
{
	const auto n2 = 2 * mean_shape.size();
	if (basis.rows() != n2) {
		throw std::invalid_argument("PdmModel: basis rows must equal 2n");
	}
	if (eigenvalues.size() != basis.cols()) {
		throw std::invalid_argument("PdmModel: one eigenvalue per basis column required");
	}
	const Matrix gram = basis.transpose() * basis;
	if ((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-10) {
		throw std::invalid_argument("PdmModel: basis is not orthonormal");
	}
	for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
		if (!(eigenvalues(i) > 0.0) || (i > 0 && eigenvalues(i) > eigenvalues(i - 1))) {
			throw std::invalid_argument("PdmModel: eigenvalues must be positive and descending");
		}
	}
}

namespace {

// Rotated copy: each point (x, y) -> (-y, x).
Vector perp(const Vector& v)
{
	Vector out(v.size());
	for (Eigen::Index i = 0; i < v.size() / 2; ++i) {
		out(2 * i) = -v(2 * i + 1);
		out(2 * i + 1) = v(2 * i);
	}
	return out;
}

Vector centred(const Vector& v)
{
	Vector out = v;
	const auto n = v.size() / 2;
	double cx = 0.0;
	double cy = 0.0;
	for (Eigen::Index i = 0; i < n; ++i) {
		cx += v(2 * i);
		cy += v(2 * i + 1);
	}
	cx /= static_cast<double>(n);
	cy /= static_cast<double>(n);
	for (Eigen::Index i = 0; i < n; ++i) {
		out(2 * i) -= cx;
		out(2 * i + 1) -= cy;
	}
	return out;
}

// Scale/rotation (alpha, beta) minimising ‖M·from − to‖ for centred vectors.
std::pair<double, double> centred_similarity(const Vector& from, const Vector& to)
{
	const double denom = from.squaredNorm();
	if (!(denom > 1e-300) || !(std::sqrt(denom) > 1e-12 * std::max(1.0, to.norm()))) {
		throw Error("Procrustes singular");
	}
	return {from.dot(to) / denom, perp(from).dot(to) / denom};
}

Vector apply_linear(double alpha, double beta, const Vector& v)
{
	return alpha * v + beta * perp(v);
}

void fix_sign(Matrix& basis)
{
	for (Eigen::Index c = 0; c < basis.cols(); ++c) {
		Eigen::Index idx = 0;
		basis.col(c).cwiseAbs().maxCoeff(&idx);
		if (basis(idx, c) < 0.0) {
			basis.col(c) *= -1.0;
		}
	}
}

} // namespace

Matrix similarity_basis(const Shape& shape)
{
	const Vector v = shape.to_vector();
	const auto n = shape.size();
	Matrix raw(2 * n, 4);
	raw.col(0) = v;
	raw.col(1) = perp(v);
	for (Eigen::Index i = 0; i < n; ++i) {
		raw(2 * i, 2) = 1.0;
		raw(2 * i + 1, 2) = 0.0;
		raw(2 * i, 3) = 0.0;
		raw(2 * i + 1, 3) = 1.0;
	}
	Eigen::HouseholderQR<Matrix> qr(raw);
	return qr.householderQ() * Matrix::Identity(2 * n, 4);
}

RigidParams align_similarity(const Shape& from, const Shape& to)
{
	if (from.size() != to.size()) {
		throw std::invalid_argument("align_similarity: landmark count mismatch");
	}
	const Eigen::Vector2d cf = from.centroid();
	const Eigen::Vector2d ct = to.centroid();
	const auto [alpha, beta] = centred_similarity(centred(from.to_vector()), centred(to.to_vector()));
	RigidParams q = RigidParams::from_linear(alpha - 1.0, beta, 0.0, 0.0);
	const Eigen::Vector2d mapped = q.apply(cf);
	q.tx = ct.x() - mapped.x();
	q.ty = ct.y() - mapped.y();
	return q;
}

PdmModel train_pdm(std::span<const Shape> shapes, const PdmTrainOptions& options)
{
	if (shapes.size() < 2) {
		throw std::invalid_argument("train_pdm: at least 2 shapes required");
	}
	const auto n = shapes.front().size();
	for (const auto& s : shapes) {
		if (s.size() != n) {
			throw std::invalid_argument("train_pdm: all shapes must have the same landmark count");
		}
	}
	const auto count = static_cast<Eigen::Index>(shapes.size());

	std::vector<Vector> centred_shapes;
	centred_shapes.reserve(shapes.size());
	double mean_size = 0.0;
	for (const auto& s : shapes) {
		centred_shapes.push_back(centred(s.to_vector()));
		mean_size += centred_shapes.back().norm();
	}
	mean_size /= static_cast<double>(count);
	for (const auto& c : centred_shapes) {
		if (!(c.norm() > 0.0)) {
			throw Error("Procrustes singular");
		}
	}
	const Vector reference = centred_shapes.front() * (mean_size / centred_shapes.front().norm());

	auto align_all = [&](const Vector& target) {
		std::vector<Vector> aligned;
		aligned.reserve(centred_shapes.size());
		// Same direction as decompose(): fit target → shape, then invert.
		for (const auto& s : centred_shapes) {
			const auto [alpha, beta] = centred_similarity(target, s);
			const double det = alpha * alpha + beta * beta;
			if (!(det > 0.0)) {
				throw Error("Procrustes singular");
			}
			aligned.push_back(apply_linear(alpha / det, -beta / det, s));
		}
		return aligned;
	};

	Vector mean = reference;
	for (int it = 0; it < options.max_procrustes_iterations; ++it) {
		const auto aligned = align_all(mean);
		Vector next = Vector::Zero(mean.size());
		for (const auto& a : aligned) {
			next += a;
		}
		next /= static_cast<double>(count);
		next = centred(next);
		// Pin orientation and size to the reference so the iteration cannot drift.
		const auto [alpha, beta] = centred_similarity(next, reference);
		next = apply_linear(alpha, beta, next);
		next *= mean_size / next.norm();
		const double change = (next - mean).norm();
		mean = next;
		if (change <= options.procrustes_tolerance * std::max(1.0, mean_size)) {
			break;
		}
	}

	const auto aligned = align_all(mean);
	const Shape mean_shape = Shape::from_vector(mean);
	const Matrix sim = similarity_basis(mean_shape);

	Matrix dev(2 * n, count);
	for (Eigen::Index j = 0; j < count; ++j) {
		const Vector d = aligned[static_cast<std::size_t>(j)] - mean;
		dev.col(j) = d - sim * (sim.transpose() * d);
	}
	const double denom = static_cast<double>(std::max<Eigen::Index>(count - 1, 1));
	const double total_variance = dev.squaredNorm() / denom;
	if (!(total_variance > 1e-20 * mean.squaredNorm())) {
		throw Error("zero shape variance");
	}

	Vector evals;
	Matrix evecs;
	if (2 * n <= count) {
		Eigen::SelfAdjointEigenSolver<Matrix> es(dev * dev.transpose() / denom);
		evals = es.eigenvalues().reverse();
		evecs = es.eigenvectors().rowwise().reverse();
	} else {
		Eigen::SelfAdjointEigenSolver<Matrix> es(dev.transpose() * dev / denom);
		evals = es.eigenvalues().reverse();
		const Matrix u = es.eigenvectors().rowwise().reverse();
		evecs = Matrix::Zero(2 * n, evals.size());
		for (Eigen::Index i = 0; i < evals.size(); ++i) {
			if (evals(i) > 0.0) {
				evecs.col(i) = dev * u.col(i) / std::sqrt(evals(i) * denom);
			}
		}
	}

	const double lmax = evals(0);
	Eigen::Index nonzero = 0;
	while (nonzero < evals.size() && evals(nonzero) > 1e-12 * lmax) {
		++nonzero;
	}

	Eigen::Index k = 0;
	if (options.fixed_modes >= 0) {
		if (options.fixed_modes > nonzero) {
			throw Error("train_pdm: requested " + std::to_string(options.fixed_modes) +
						" modes but only " + std::to_string(nonzero) + " are achievable");
		}
		k = options.fixed_modes;
	} else if (options.variance_kept >= 1.0) {
		k = nonzero;
	} else {
		const double target = options.variance_kept * total_variance;
		double acc = 0.0;
		while (k < nonzero && acc < target) {
			acc += evals(k);
			++k;
		}
	}
	k = std::max<Eigen::Index>(k, std::min<Eigen::Index>(1, nonzero));

	Matrix basis = evecs.leftCols(k);
	// Re-orthonormalise (Gram-trick columns lose a few digits) while keeping order.
	for (Eigen::Index c = 0; c < k; ++c) {
		basis.col(c) -= sim * (sim.transpose() * basis.col(c));
		for (Eigen::Index p = 0; p < c; ++p) {
			basis.col(c) -= basis.col(p).dot(basis.col(c)) * basis.col(p);
		}
		basis.col(c).normalize();
	}
	fix_sign(basis);

	PdmModel model;
	model.mean_shape = mean_shape;
	model.basis = std::move(basis);
	model.eigenvalues = evals.head(k);
	return model;
}

Shape compose(const PdmModel& model, const ShapeParams& params)
{
	if (params.flexible.size() != model.num_modes()) {
		throw std::invalid_argument("compose: flexible parameter count does not match the model");
	}
	const Vector v = model.mean_shape.to_vector() + model.basis * params.flexible;
	const double alpha = 1.0 + params.rigid.a();
	const double beta = params.rigid.b();
	Vector s = apply_linear(alpha, beta, v);
	for (Eigen::Index i = 0; i < model.num_landmarks(); ++i) {
		s(2 * i) += params.rigid.tx;
		s(2 * i + 1) += params.rigid.ty;
	}
	return Shape::from_vector(s);
}

ShapeParams decompose(const PdmModel& model, const Shape& shape)
{
	if (shape.size() != model.num_landmarks()) {
		throw std::invalid_argument("decompose: landmark count does not match the model");
	}
	const RigidParams q = align_similarity(model.mean_shape, shape);
	const double alpha = 1.0 + q.a();
	const double beta = q.b();
	const double det = alpha * alpha + beta * beta;
	if (!(det > 1e-24)) {
		throw Error("Procrustes singular");
	}
	Vector s = shape.to_vector();
	for (Eigen::Index i = 0; i < shape.size(); ++i) {
		s(2 * i) -= q.tx;
		s(2 * i + 1) -= q.ty;
	}
	// M⁻¹ = Mᵀ / det for M = [[α, −β], [β, α]]
	const Vector back = apply_linear(alpha / det, -beta / det, s);
	ShapeParams out;
	out.rigid = q;
	out.flexible = model.basis.transpose() * (back - model.mean_shape.to_vector());
	return out;
}

Matrix shape_jacobian(const PdmModel& model, const ShapeParams& params)
{
	if (params.flexible.size() != model.num_modes()) {
		throw std::invalid_argument("shape_jacobian: flexible parameter count does not match the model");
	}
	const auto n = model.num_landmarks();
	const Vector v = model.mean_shape.to_vector() + model.basis * params.flexible;
	const double alpha = 1.0 + params.rigid.a();
	const double beta = params.rigid.b();
	Matrix j(2 * n, model.num_params());
	j.col(0) = v;
	j.col(1) = perp(v);
	for (Eigen::Index i = 0; i < n; ++i) {
		j(2 * i, 2) = 1.0;
		j(2 * i + 1, 2) = 0.0;
		j(2 * i, 3) = 0.0;
		j(2 * i + 1, 3) = 1.0;
	}
	for (Eigen::Index c = 0; c < model.num_modes(); ++c) {
		j.col(kRigidDims + c) = apply_linear(alpha, beta, model.basis.col(c));
	}
	return j;
}

} // namespace iccr
