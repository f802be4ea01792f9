/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/src/regression.cpp
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
#include "iccr/regression.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace iccr {

namespace {

const char* const kRankDeficient = "rank deficient; set ridge > 0";

void require_finite_ridge(double lambda)
{
	if (!std::isfinite(lambda) || lambda < 0.0) {
		throw std::invalid_argument("ridge must be finite and non-negative");
	}
}

} // namespace

double Ridge::resolve(const Matrix& normal) const
{
	double lambda = value;
	if (mode == Mode::Relative) {
		lambda = normal.rows() > 0 ? value * normal.trace() / static_cast<double>(normal.rows()) : 0.0;
	}
	require_finite_ridge(lambda);
	return lambda;
}

Vector predict(const LinearRegressor& reg, const Vector& x)
{
	if (x.size() != reg.feature_dim()) {
		throw std::invalid_argument("predict: feature dimension mismatch");
	}
	return reg.matrix * x;
}

PerturbationStats PerturbationStats::zero(Eigen::Index m)
{
	return {Vector::Zero(m), Matrix::Zero(m, m)};
}

void PerturbationStats::validate() const
{
	if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
		throw std::invalid_argument("PerturbationStats: covariance dimension mismatch");
	}
	if (!all_finite(covariance) || !mean.allFinite()) {
		throw Error("PerturbationStats: non-finite entries");
	}
	const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
	if (max_asymmetry(covariance) > 1e-10 * scale) {
		throw Error("covariance is not symmetric");
	}
	if (!is_psd(covariance, 1e-10 * scale)) {
		throw Error("covariance is not positive semidefinite");
	}
}

SampledNormalEquations::SampledNormalEquations(Eigen::Index feature_dim, Eigen::Index target_dim)
	: xxt_(Matrix::Zero(feature_dim, feature_dim)), yxt_(Matrix::Zero(target_dim, feature_dim))
{
}

void SampledNormalEquations::add(const Vector& x, const Vector& y)
{
	if (x.size() != xxt_.rows() || y.size() != yxt_.rows()) {
		throw std::invalid_argument("SampledNormalEquations::add: dimension mismatch");
	}
	xxt_.selfadjointView<Eigen::Lower>().rankUpdate(x);
	yxt_.noalias() += y * x.transpose();
	++count_;
}

void SampledNormalEquations::add_batch(const Matrix& x, const Matrix& y)
{
	if (x.rows() != xxt_.rows() || y.rows() != yxt_.rows() || x.cols() != y.cols()) {
		throw std::invalid_argument("SampledNormalEquations::add_batch: dimension mismatch");
	}
	xxt_.selfadjointView<Eigen::Lower>().rankUpdate(x);
	yxt_.noalias() += y * x.transpose();
	count_ += x.cols();
}

SampledSolution SampledNormalEquations::solve(const Ridge& ridge) const
{
	if (count_ < 1) {
		throw std::invalid_argument("train_sampled: no samples");
	}
	Matrix normal = xxt_.selfadjointView<Eigen::Lower>();
	const double lambda = ridge.resolve(normal);
	normal.diagonal().array() += lambda;
	SampledSolution out;
	out.v = spd_inverse(normal, kRankDeficient);
	out.regressor.matrix = yxt_ * out.v;
	out.ridge = lambda;
	return out;
}

SampledSolution solve_sampled(const Matrix& x, const Matrix& y, const Ridge& ridge)
{
	if (x.cols() != y.cols()) {
		throw std::invalid_argument("train_sampled: X and Y sample counts differ");
	}
	SampledNormalEquations eq(x.rows(), y.rows());
	if (x.cols() > 0) {
		eq.add_batch(x, y);
	}
	return eq.solve(ridge);
}

LinearRegressor train_sampled(const Matrix& x, const Matrix& y, const Ridge& ridge)
{
	return solve_sampled(x, y, ridge).regressor;
}

void FunctionalTrainingSet::add(Matrix block)
{
	if (!blocks.empty() && (block.rows() != sum_d.rows() || block.cols() != sum_d.cols())) {
		throw std::invalid_argument("FunctionalTrainingSet::add: block dimension mismatch");
	}
	if (blocks.empty()) {
		sum_d = block;
	} else {
		sum_d += block;
	}
	blocks.push_back(std::move(block));
}

FunctionalTrainingSet FunctionalTrainingSet::from_blocks(std::vector<Matrix> blocks, const Ridge& ridge)
{
	if (blocks.empty()) {
		throw std::invalid_argument("FunctionalTrainingSet: no blocks");
	}
	for (const auto& b : blocks) {
		if (b.rows() != blocks.front().rows() || b.cols() != blocks.front().cols()) {
			throw std::invalid_argument("FunctionalTrainingSet: block dimension mismatch");
		}
	}
	FunctionalTrainingSet ts;
	ts.sum_d = tree_sum(blocks);
	ts.blocks = std::move(blocks);
	ts.ridge = ridge;
	return ts;
}

FunctionalTrainingSet build_functional_set(std::span<const TrainingImage> images, const FeatureExtractor& extractor,
										   const FeaturePca& pca, const PdmModel& model, const Ridge& ridge,
										   double delta_x, int jobs)
{
	if (images.empty()) {
		throw std::invalid_argument("build_functional_set: no images");
	}
	std::vector<Matrix> blocks(images.size());
	parallel_for(images.size(), jobs, [&](std::size_t j) {
		const auto& img = images[j];
		blocks[j] = extract_with_jacobian(extractor, pca, *img.image, model, img.ground_truth, delta_x).block();
	});
	return FunctionalTrainingSet::from_blocks(std::move(blocks), ridge);
}

FunctionalTrainingSet select_parameters(const FunctionalTrainingSet& ts, std::span<const Eigen::Index> columns)
{
	std::vector<Matrix> blocks;
	blocks.reserve(ts.blocks.size());
	for (const auto& b : ts.blocks) {
		Matrix s(b.rows(), static_cast<Eigen::Index>(columns.size()) + 1);
		s.col(0) = b.col(0);
		for (std::size_t c = 0; c < columns.size(); ++c) {
			if (columns[c] < 0 || columns[c] >= b.cols() - 1) {
				throw std::invalid_argument("select_parameters: column out of range");
			}
			s.col(static_cast<Eigen::Index>(c) + 1) = b.col(columns[c] + 1);
		}
		blocks.push_back(std::move(s));
	}
	return FunctionalTrainingSet::from_blocks(std::move(blocks), ts.ridge);
}

Matrix data_term_a(const PerturbationStats& stats)
{
	const auto m = stats.dim();
	Matrix a(m, m + 1);
	a.col(0) = stats.mean;
	a.rightCols(m) = stats.covariance + stats.mean * stats.mean.transpose();
	return a;
}

Matrix data_term_b(const PerturbationStats& stats)
{
	const auto m = stats.dim();
	Matrix b(m + 1, m + 1);
	b(0, 0) = 1.0;
	b.block(0, 1, 1, m) = stats.mean.transpose();
	b.block(1, 0, m, 1) = stats.mean;
	b.bottomRightCorner(m, m) = stats.covariance + stats.mean * stats.mean.transpose();
	symmetrize(b);
	return b;
}

Matrix continuous_normal_matrix(const FunctionalTrainingSet& ts, const Matrix& b)
{
	const auto rows = ts.feature_dim();
	const auto w = ts.num_params() + 1;
	if (b.rows() != w || b.cols() != w) {
		throw std::invalid_argument("continuous_normal_matrix: B dimension mismatch");
	}
	// [D_1 .. D_M] · [D_1 B .. D_M B]ᵀ
	Matrix p(rows, w * ts.count());
	Matrix q(rows, w * ts.count());
	for (Eigen::Index j = 0; j < ts.count(); ++j) {
		const auto& d = ts.blocks[static_cast<std::size_t>(j)];
		p.middleCols(j * w, w) = d;
		q.middleCols(j * w, w).noalias() = d * b;
	}
	Matrix v(rows, rows);
	v.noalias() = p * q.transpose();
	symmetrize(v);
	return v;
}

namespace {

void check_stats(const FunctionalTrainingSet& ts, const PerturbationStats& stats)
{
	if (ts.count() < 1) {
		throw std::invalid_argument("train_continuous: empty training set");
	}
	if (stats.dim() != ts.num_params()) {
		throw std::invalid_argument("train_continuous: statistics dimension does not match the blocks");
	}
	stats.validate();
}

} // namespace

ContinuousSolution train_continuous(const FunctionalTrainingSet& ts, const PerturbationStats& stats)
{
	check_stats(ts, stats);
	ContinuousSolution out;
	auto& st = out.state;
	st.a = data_term_a(stats);
	st.b = data_term_b(stats);
	st.sum_d = ts.sum_d;
	st.count = ts.count();
	Matrix v = continuous_normal_matrix(ts, st.b);
	st.ridge = ts.ridge.resolve(v);
	v.diagonal().array() += st.ridge;
	st.v_inv = spd_inverse(v, kRankDeficient);
	out.regressor.matrix = (st.a * st.sum_d.transpose()) * st.v_inv;
	return out;
}

LinearRegressor train_continuous_expanded(const FunctionalTrainingSet& ts, const PerturbationStats& stats)
{
	check_stats(ts, stats);
	const auto rows = ts.feature_dim();
	const auto m = ts.num_params();
	const Vector& mu = stats.mean;
	const Matrix second = stats.covariance + mu * mu.transpose();
	Matrix num = Matrix::Zero(m, rows);
	Matrix den = Matrix::Zero(rows, rows);
	for (const auto& d : ts.blocks) {
		const Vector x = d.col(0);
		const Matrix j = d.rightCols(m);
		const Vector jmu = j * mu;
		num.noalias() += mu * x.transpose();
		num.noalias() += second * j.transpose();
		den.noalias() += x * x.transpose();
		den.noalias() += x * jmu.transpose();
		den.noalias() += jmu * x.transpose();
		den.noalias() += j * second * j.transpose();
	}
	symmetrize(den);
	const double lambda = ts.ridge.resolve(den);
	den.diagonal().array() += lambda;
	return {spd_right_solve(num, den, kRankDeficient)};
}

Matrix uniform_box_covariance(const Vector& r, const Vector& eigenvalues)
{
	if (r.size() != eigenvalues.size()) {
		throw std::invalid_argument("uniform_box_covariance: r and eigenvalues differ in length");
	}
	return (r.array().square() * eigenvalues.array() / 3.0).matrix().asDiagonal();
}

LinearRegressor train_continuous_legacy(const FunctionalTrainingSet& ts, const Vector& r, const Vector& eigenvalues)
{
	if (ts.count() < 1) {
		throw std::invalid_argument("train_continuous_legacy: empty training set");
	}
	const auto k = ts.num_params();
	if (r.size() != k || eigenvalues.size() != k) {
		throw std::invalid_argument("train_continuous_legacy: r/eigenvalues must match the flexible columns");
	}
	const Matrix sigma = uniform_box_covariance(r, eigenvalues);
	const auto rows = ts.feature_dim();
	Matrix sum_j = Matrix::Zero(rows, k);
	Matrix den = Matrix::Zero(rows, rows);
	for (const auto& d : ts.blocks) {
		const Vector x = d.col(0);
		const Matrix j = d.rightCols(k);
		sum_j += j;
		den.noalias() += x * x.transpose();
		den.noalias() += j * sigma * j.transpose();
	}
	symmetrize(den);
	const double lambda = ts.ridge.resolve(den);
	den.diagonal().array() += lambda;
	return {spd_right_solve(sigma * sum_j.transpose(), den, kRankDeficient)};
}

double quadratic_form_expectation(const Matrix& m, const PerturbationStats& stats)
{
	if (m.rows() != stats.dim() || m.cols() != stats.dim()) {
		throw std::invalid_argument("quadratic_form_expectation: dimension mismatch");
	}
	return (m * stats.covariance).trace() + stats.mean.dot(m * stats.mean);
}

} // namespace iccr
