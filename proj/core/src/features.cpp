/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/src/features.cpp
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
#include "iccr/features.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace iccr {

std::string to_string(FeatureKind kind)
{
	switch (kind) {
	case FeatureKind::PixelPatch:
		return "pixel-patch";
	case FeatureKind::GradientHistogram:
		return "gradient-histogram";
	case FeatureKind::Analytic:
		return "analytic";
	}
	return "unknown";
}

FeatureKind feature_kind_from_string(const std::string& s)
{
	if (s == "pixel-patch") {
		return FeatureKind::PixelPatch;
	}
	if (s == "gradient-histogram") {
		return FeatureKind::GradientHistogram;
	}
	if (s == "analytic") {
		return FeatureKind::Analytic;
	}
	throw std::invalid_argument("unknown feature kind: " + s);
}

double AnalyticTerm::value(double x, double y) const
{
	return amplitude * std::sin(wx * x + wy * y + phase) + bx * x + by * y + offset;
}

Eigen::Vector2d AnalyticTerm::gradient(double x, double y) const
{
	const double c = amplitude * std::cos(wx * x + wy * y + phase);
	return {c * wx + bx, c * wy + by};
}

AnalyticMap AnalyticMap::random_affine(Eigen::Index n, Eigen::Index per_landmark, std::uint64_t seed)
{
	Rng rng(seed);
	std::normal_distribution<double> normal(0.0, 1.0);
	AnalyticMap map;
	map.landmarks.resize(static_cast<std::size_t>(n));
	for (auto& terms : map.landmarks) {
		for (Eigen::Index i = 0; i < per_landmark; ++i) {
			AnalyticTerm t;
			t.bx = 0.1 * normal(rng);
			t.by = 0.1 * normal(rng);
			t.offset = normal(rng);
			terms.push_back(t);
		}
	}
	return map;
}

namespace {

AnalyticTerm random_smooth_term(Rng& rng)
{
	std::normal_distribution<double> normal(0.0, 1.0);
	std::uniform_real_distribution<double> uniform(0.0, 1.0);
	AnalyticTerm t;
	t.amplitude = 0.5 + uniform(rng);
	t.wx = 0.2 * normal(rng);
	t.wy = 0.2 * normal(rng);
	t.phase = 2.0 * std::numbers::pi * uniform(rng);
	t.bx = 0.01 * normal(rng);
	t.by = 0.01 * normal(rng);
	t.offset = 0.1 * normal(rng);
	return t;
}

} // namespace

AnalyticMap AnalyticMap::random_smooth(Eigen::Index n, Eigen::Index per_landmark, std::uint64_t seed)
{
	Rng rng(seed);
	AnalyticMap map;
	map.landmarks.resize(static_cast<std::size_t>(n));
	for (auto& terms : map.landmarks) {
		for (Eigen::Index i = 0; i < per_landmark; ++i) {
			terms.push_back(random_smooth_term(rng));
		}
	}
	return map;
}

AnalyticMap AnalyticMap::random_smooth_total(Eigen::Index n, Eigen::Index total, std::uint64_t seed)
{
	Rng rng(seed);
	AnalyticMap map;
	map.landmarks.resize(static_cast<std::size_t>(n));
	for (Eigen::Index l = 0; l < n; ++l) {
		const Eigen::Index count = total / n + (l < total % n ? 1 : 0);
		for (Eigen::Index i = 0; i < count; ++i) {
			map.landmarks[static_cast<std::size_t>(l)].push_back(random_smooth_term(rng));
		}
	}
	return map;
}

FeatureExtractor::FeatureExtractor()
	: kind_(FeatureKind::PixelPatch), block_offsets_{0}, counter_(std::make_shared<std::atomic<std::uint64_t>>(0))
{
}

FeatureExtractor::FeatureExtractor(FeatureKind kind, Eigen::Index num_landmarks)
	: kind_(kind), num_landmarks_(num_landmarks), counter_(std::make_shared<std::atomic<std::uint64_t>>(0))
{
	if (num_landmarks < 1) {
		throw std::invalid_argument("FeatureExtractor: at least one landmark required");
	}
}

FeatureExtractor FeatureExtractor::with_private_counter() const
{
	FeatureExtractor copy = *this;
	copy.counter_ = std::make_shared<std::atomic<std::uint64_t>>(0);
	return copy;
}

void FeatureExtractor::set_uniform_blocks(Eigen::Index per_landmark)
{
	block_offsets_.resize(static_cast<std::size_t>(num_landmarks_) + 1);
	for (Eigen::Index l = 0; l <= num_landmarks_; ++l) {
		block_offsets_[static_cast<std::size_t>(l)] = l * per_landmark;
	}
}

FeatureExtractor FeatureExtractor::pixel_patch(Eigen::Index num_landmarks, int radius)
{
	if (radius < 0) {
		throw std::invalid_argument("pixel_patch: radius must be non-negative");
	}
	FeatureExtractor fx(FeatureKind::PixelPatch, num_landmarks);
	fx.patch_radius_ = radius;
	const Eigen::Index side = 2 * radius + 1;
	fx.set_uniform_blocks(side * side);
	return fx;
}

FeatureExtractor FeatureExtractor::gradient_histogram(Eigen::Index num_landmarks, int cell_size)
{
	if (cell_size < 1) {
		throw std::invalid_argument("gradient_histogram: cell size must be positive");
	}
	FeatureExtractor fx(FeatureKind::GradientHistogram, num_landmarks);
	fx.cell_size_ = cell_size;
	fx.set_uniform_blocks(kHogCells * kHogCells * kHogOrientations);
	return fx;
}

FeatureExtractor FeatureExtractor::analytic(AnalyticMap map)
{
	FeatureExtractor fx(FeatureKind::Analytic, static_cast<Eigen::Index>(map.landmarks.size()));
	fx.block_offsets_.assign(1, 0);
	for (const auto& terms : map.landmarks) {
		fx.block_offsets_.push_back(fx.block_offsets_.back() + static_cast<Eigen::Index>(terms.size()));
	}
	fx.analytic_ = std::move(map);
	return fx;
}

void FeatureExtractor::patch_block(const ImageLike& image, double x, double y, double* out) const
{
	const int r = patch_radius_;
	for (int v = -r; v <= r; ++v) {
		for (int u = -r; u <= r; ++u) {
			*out++ = image.intensity(x + u, y + v);
		}
	}
}

void FeatureExtractor::hog_block(const ImageLike& image, double x, double y, double* out) const
{
	const int window = kHogCells * cell_size_;
	const double start = -0.5 * window + 0.5;
	const int block = kHogCells * kHogCells * kHogOrientations;
	std::fill(out, out + block, 0.0);
	for (int j = 0; j < window; ++j) {
		const double py = y + start + j;
		const int cy = j / cell_size_;
		for (int i = 0; i < window; ++i) {
			const double px = x + start + i;
			const int cx = i / cell_size_;
			const double gx = 0.5 * (image.intensity(px + 1.0, py) - image.intensity(px - 1.0, py));
			const double gy = 0.5 * (image.intensity(px, py + 1.0) - image.intensity(px, py - 1.0));
			const double mag = std::sqrt(gx * gx + gy * gy);
			if (mag == 0.0) {
				continue;
			}
			// Signed orientation, soft-assigned to the two nearest bins.
			const double angle = std::atan2(gy, gx) + std::numbers::pi;
			const double pos = angle / (2.0 * std::numbers::pi) * kHogOrientations - 0.5;
			const double fl = std::floor(pos);
			const double frac = pos - fl;
			const int b0 = (static_cast<int>(fl) % kHogOrientations + kHogOrientations) % kHogOrientations;
			const int b1 = (b0 + 1) % kHogOrientations;
			double* cell = out + (cy * kHogCells + cx) * kHogOrientations;
			cell[b0] += (1.0 - frac) * mag;
			cell[b1] += frac * mag;
		}
	}
	double sq = 0.0;
	for (int k = 0; k < block; ++k) {
		sq += out[k] * out[k];
	}
	const double scale = 1.0 / std::sqrt(sq + 1e-4);
	for (int k = 0; k < block; ++k) {
		out[k] *= scale;
	}
}

Vector FeatureExtractor::extract_raw(const ImageLike& image, const Shape& shape) const
{
	if (shape.size() != num_landmarks_) {
		throw std::invalid_argument("extract_raw: landmark count does not match the extractor");
	}
	counter_->fetch_add(1, std::memory_order_relaxed);
	Vector raw(raw_dim());
	if (kind_ == FeatureKind::Analytic) {
		for (Eigen::Index l = 0; l < num_landmarks_; ++l) {
			const auto& terms = analytic_.landmarks[static_cast<std::size_t>(l)];
			const auto p = shape.point(l);
			for (std::size_t t = 0; t < terms.size(); ++t) {
				raw(block_offset(l) + static_cast<Eigen::Index>(t)) = terms[t].value(p.x(), p.y());
			}
		}
		return raw;
	}
	bool any_inside = false;
	for (Eigen::Index l = 0; l < num_landmarks_ && !any_inside; ++l) {
		const auto p = shape.point(l);
		any_inside = image.contains(p.x(), p.y());
	}
	if (!any_inside) {
		throw Error("shape out of frame");
	}
	for (Eigen::Index l = 0; l < num_landmarks_; ++l) {
		const auto p = shape.point(l);
		double* out = raw.data() + block_offset(l);
		if (kind_ == FeatureKind::PixelPatch) {
			patch_block(image, p.x(), p.y(), out);
		} else {
			hog_block(image, p.x(), p.y(), out);
		}
	}
	return raw;
}

std::pair<Vector, Vector> FeatureExtractor::analytic_derivatives(const Shape& shape) const
{
	if (kind_ != FeatureKind::Analytic) {
		throw std::invalid_argument("analytic_derivatives: extractor is not analytic");
	}
	Vector dx(raw_dim());
	Vector dy(raw_dim());
	for (Eigen::Index l = 0; l < num_landmarks_; ++l) {
		const auto& terms = analytic_.landmarks[static_cast<std::size_t>(l)];
		const auto p = shape.point(l);
		for (std::size_t t = 0; t < terms.size(); ++t) {
			const auto g = terms[t].gradient(p.x(), p.y());
			dx(block_offset(l) + static_cast<Eigen::Index>(t)) = g.x();
			dy(block_offset(l) + static_cast<Eigen::Index>(t)) = g.y();
		}
	}
	return {dx, dy};
}

Vector FeaturePca::project(const Vector& raw) const
{
	if (raw.size() != raw_dim()) {
		throw std::invalid_argument("FeaturePca::project: raw dimension mismatch");
	}
	Vector x(dim() + 1);
	x.head(dim()).noalias() = projection * (raw - mean);
	x(dim()) = 1.0;
	return x;
}

Matrix FeaturePca::project_jacobian(const Matrix& raw_jacobian) const
{
	if (raw_jacobian.rows() != raw_dim()) {
		throw std::invalid_argument("FeaturePca::project_jacobian: raw dimension mismatch");
	}
	Matrix j(dim() + 1, raw_jacobian.cols());
	j.topRows(dim()).noalias() = projection * raw_jacobian;
	j.row(dim()).setZero();
	return j;
}

double FeaturePca::reconstruction_residual(const Vector& raw) const
{
	const Vector r = raw - mean;
	const double norm = r.norm();
	if (norm == 0.0) {
		return 0.0;
	}
	const Vector coeffs = projection * r;
	return (r - projection.transpose() * coeffs).norm() / norm;
}

FeaturePca FeaturePca::identity(Eigen::Index raw_dim)
{
	FeaturePca pca;
	pca.mean = Vector::Zero(raw_dim);
	pca.projection = Matrix::Identity(raw_dim, raw_dim);
	pca.explained_variance = Vector::Zero(raw_dim);
	return pca;
}

FeaturePca fit_feature_pca(std::span<const Vector> raw_vectors, Eigen::Index d)
{
	if (raw_vectors.empty()) {
		throw std::invalid_argument("fit_feature_pca: no samples");
	}
	if (d < 1) {
		throw std::invalid_argument("fit_feature_pca: target dimension must be positive");
	}
	const auto count = static_cast<Eigen::Index>(raw_vectors.size());
	const auto raw_dim = raw_vectors.front().size();
	if (count < d) {
		throw std::invalid_argument("fit_feature_pca: need at least d samples");
	}
	Vector mean = Vector::Zero(raw_dim);
	for (const auto& v : raw_vectors) {
		if (v.size() != raw_dim) {
			throw std::invalid_argument("fit_feature_pca: inconsistent raw dimensions");
		}
		mean += v;
	}
	mean /= static_cast<double>(count);
	Matrix centred(raw_dim, count);
	for (Eigen::Index j = 0; j < count; ++j) {
		centred.col(j) = raw_vectors[static_cast<std::size_t>(j)] - mean;
	}
	const double denom = static_cast<double>(std::max<Eigen::Index>(count - 1, 1));

	Vector evals;
	Matrix directions; // D × r, descending
	if (raw_dim <= count) {
		Eigen::SelfAdjointEigenSolver<Matrix> es(centred * centred.transpose() / denom);
		evals = es.eigenvalues().reverse();
		directions = es.eigenvectors().rowwise().reverse();
	} else {
		Eigen::SelfAdjointEigenSolver<Matrix> es(centred.transpose() * centred / denom);
		evals = es.eigenvalues().reverse();
		const Matrix u = es.eigenvectors().rowwise().reverse();
		directions = Matrix::Zero(raw_dim, evals.size());
		for (Eigen::Index i = 0; i < evals.size(); ++i) {
			if (evals(i) > 0.0) {
				directions.col(i) = centred * u.col(i) / std::sqrt(evals(i) * denom);
			}
		}
	}
	const double lmax = std::max(evals(0), 0.0);
	Eigen::Index rank = 0;
	while (rank < evals.size() && evals(rank) > 1e-12 * lmax && lmax > 0.0) {
		++rank;
	}
	if (d > rank) {
		throw Error("fit_feature_pca: requested d=" + std::to_string(d) + " exceeds the achievable rank " +
					std::to_string(rank));
	}
	Matrix basis = directions.leftCols(d);
	for (Eigen::Index c = 0; c < d; ++c) {
		for (Eigen::Index p = 0; p < c; ++p) {
			basis.col(c) -= basis.col(p).dot(basis.col(c)) * basis.col(p);
		}
		basis.col(c).normalize();
		Eigen::Index idx = 0;
		basis.col(c).cwiseAbs().maxCoeff(&idx);
		if (basis(idx, c) < 0.0) {
			basis.col(c) *= -1.0;
		}
	}
	FeaturePca pca;
	pca.mean = std::move(mean);
	pca.projection = basis.transpose();
	pca.explained_variance = evals.head(d);
	pca.total_variance = centred.squaredNorm() / denom;
	return pca;
}

Vector extract(const FeatureExtractor& extractor, const FeaturePca& pca, const ImageLike& image,
			   const PdmModel& model, const ShapeParams& params)
{
	return pca.project(extractor.extract_raw(image, compose(model, params)));
}

RawDerivatives raw_derivatives(const FeatureExtractor& extractor, const ImageLike& image, const Shape& shape,
							   double delta, DifferenceScheme scheme)
{
	if (!(delta > 0.0)) {
		throw std::invalid_argument("raw_derivatives: delta must be positive");
	}
	RawDerivatives out;
	out.center = extractor.extract_raw(image, shape);
	if (scheme == DifferenceScheme::Central) {
		const Vector xp = extractor.extract_raw(image, shape.translated(delta, 0.0));
		const Vector xm = extractor.extract_raw(image, shape.translated(-delta, 0.0));
		const Vector yp = extractor.extract_raw(image, shape.translated(0.0, delta));
		const Vector ym = extractor.extract_raw(image, shape.translated(0.0, -delta));
		out.dx = (xp - xm) / (2.0 * delta);
		out.dy = (yp - ym) / (2.0 * delta);
	} else {
		const Vector xp = extractor.extract_raw(image, shape.translated(delta, 0.0));
		const Vector yp = extractor.extract_raw(image, shape.translated(0.0, delta));
		out.dx = (xp - out.center) / delta;
		out.dy = (yp - out.center) / delta;
	}
	return out;
}

Matrix chain_raw_jacobian(const FeatureExtractor& extractor, const Vector& dx, const Vector& dy,
						  const Matrix& shape_jac)
{
	const auto n = extractor.num_landmarks();
	if (shape_jac.rows() != 2 * n || dx.size() != extractor.raw_dim() || dy.size() != extractor.raw_dim()) {
		throw std::invalid_argument("chain_raw_jacobian: dimension mismatch");
	}
	Matrix j(extractor.raw_dim(), shape_jac.cols());
	for (Eigen::Index l = 0; l < n; ++l) {
		const auto off = extractor.block_offset(l);
		const auto len = extractor.block_size(l);
		j.middleRows(off, len).noalias() = dx.segment(off, len) * shape_jac.row(2 * l);
		j.middleRows(off, len).noalias() += dy.segment(off, len) * shape_jac.row(2 * l + 1);
	}
	return j;
}

FeatureSample extract_with_jacobian(const FeatureExtractor& extractor, const FeaturePca& pca, const ImageLike& image,
									const PdmModel& model, const ShapeParams& params, double delta_x,
									DifferenceScheme scheme)
{
	const Shape shape = compose(model, params);
	auto d = raw_derivatives(extractor, image, shape, delta_x, scheme);
	const Matrix raw_jac = chain_raw_jacobian(extractor, d.dx, d.dy, shape_jacobian(model, params));
	FeatureSample s;
	s.x = pca.project(d.center);
	s.jacobian = pca.project_jacobian(raw_jac);
	s.raw = std::move(d.center);
	return s;
}

Matrix FeatureSample::block() const
{
	Matrix b(x.size(), jacobian.cols() + 1);
	b.col(0) = x;
	b.rightCols(jacobian.cols()) = jacobian;
	return b;
}

FeatureJacobian jacobian(const FeatureExtractor& extractor, const FeaturePca& pca, const ImageLike& image,
						 const PdmModel& model, const ShapeParams& params, double delta_x)
{
	return {extract_with_jacobian(extractor, pca, image, model, params, delta_x, DifferenceScheme::Central).jacobian};
}

} // namespace iccr
