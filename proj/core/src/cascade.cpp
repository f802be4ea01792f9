/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/src/cascade.cpp
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
#include "iccr/cascade.hpp"

#include <cmath>

namespace iccr {

std::string to_string(Method method)
{
	return method == Method::Sdm ? "sdm" : "ccr";
}

Method method_from_string(const std::string& s)
{
	if (s == "sdm") {
		return Method::Sdm;
	}
	if (s == "ccr") {
		return Method::Ccr;
	}
	throw std::invalid_argument("unknown method: " + s);
}

void CascadeModel::validate() const
{
	pdm.validate();
	if (levels.empty()) {
		throw std::invalid_argument("CascadeModel: at least one level required");
	}
	if (extractor.num_landmarks() != pdm.num_landmarks()) {
		throw std::invalid_argument("CascadeModel: extractor and PDM disagree on landmark count");
	}
	if (pca.raw_dim() != extractor.raw_dim()) {
		throw std::invalid_argument("CascadeModel: PCA and extractor disagree on raw dimension");
	}
	const auto m = pdm.num_params();
	const auto width = pca.dim() + 1;
	for (const auto& level : levels) {
		if (level.regressor.num_params() != m || level.regressor.feature_dim() != width) {
			throw std::invalid_argument("CascadeModel: regressor dimensions do not match PDM and PCA");
		}
		if (level.stats.dim() != m) {
			throw std::invalid_argument("CascadeModel: level statistics have the wrong dimension");
		}
		if (level.solver_state && level.solver_state->v_inv.rows() != width) {
			throw std::invalid_argument("CascadeModel: solver state has the wrong feature dimension");
		}
		if (level.sdm_state && level.sdm_state->v.rows() != width) {
			throw std::invalid_argument("CascadeModel: SDM state has the wrong feature dimension");
		}
	}
}

Matrix shrink_covariance(const Matrix& cov, double alpha)
{
	Matrix out = (1.0 - alpha) * cov;
	out.diagonal() += alpha * cov.diagonal();
	symmetrize(out);
	return out;
}

PerturbationStats fit_normal(const Matrix& samples)
{
	if (samples.cols() < 2) {
		throw std::invalid_argument("fit_normal: at least two samples required");
	}
	PerturbationStats st;
	st.mean = samples.rowwise().mean();
	const Matrix c = samples.colwise() - st.mean;
	st.covariance = c * c.transpose() / static_cast<double>(samples.cols() - 1);
	symmetrize(st.covariance);
	return st;
}

double mean_point_error(const Shape& a, const Shape& b)
{
	if (a.size() != b.size()) {
		throw std::invalid_argument("mean_point_error: landmark counts differ");
	}
	return (a.points() - b.points()).rowwise().norm().mean();
}

namespace {

constexpr std::uint64_t kLevelStride = 1'000'003;

void drop_rigid(PerturbationStats& st)
{
	st.mean.head(kRigidDims).setZero();
	st.covariance.topRows(kRigidDims).setZero();
	st.covariance.leftCols(kRigidDims).setZero();
}

void check_inputs(std::span<const TrainingImage> images, const PdmModel& pdm, const FeatureExtractor& extractor,
				  const FeaturePca& pca, const PerturbationStats& init, const CascadeOptions& opt)
{
	if (images.empty()) {
		throw std::invalid_argument("cascade training: no images");
	}
	if (opt.levels < 1 || opt.samples_per_image < 1 || opt.stats_samples_per_image < 1) {
		throw std::invalid_argument("cascade training: levels and sample counts must be positive");
	}
	if (init.dim() != pdm.num_params()) {
		throw std::invalid_argument("cascade training: initial statistics do not match the PDM");
	}
	if (extractor.num_landmarks() != pdm.num_landmarks() || pca.raw_dim() != extractor.raw_dim()) {
		throw std::invalid_argument("cascade training: extractor, PCA and PDM disagree");
	}
	for (const auto& img : images) {
		if (!img.image || img.ground_truth.size() != pdm.num_params()) {
			throw std::invalid_argument("cascade training: malformed training image");
		}
	}
	init.validate();
}

// Residual statistics for the next level, with shrinkage and the collapse check.
PerturbationStats next_level_stats(const Matrix& residuals, const PerturbationStats& init, const CascadeOptions& opt)
{
	PerturbationStats next = fit_normal(residuals);
	next.covariance = shrink_covariance(next.covariance, opt.shrinkage);
	if (!opt.include_rigid) {
		drop_rigid(next);
	}
	if (!(next.covariance.trace() > 1e-20 * init.covariance.trace()) || !all_finite(next.covariance)) {
		throw Error("degenerate level statistics");
	}
	return next;
}

struct Propagated
{
	Matrix residuals; // m × (M·count), δp after the update
	double error_in = 0.0;
	double error_out = 0.0;
};

// Applies one regressor to perturbed shapes p* + δp of every image.
Propagated propagate(std::span<const TrainingImage> images, const CascadeModel& model, const LinearRegressor& reg,
					 const std::vector<Matrix>& deltas, int jobs)
{
	const auto m = model.pdm.num_params();
	const auto count = deltas.front().cols();
	std::vector<Matrix> out(images.size());
	std::vector<double> err_in(images.size(), 0.0);
	std::vector<double> err_out(images.size(), 0.0);
	parallel_for(images.size(), jobs, [&](std::size_t j) {
		const Vector pstar = images[j].ground_truth.to_vector();
		const Shape truth = compose(model.pdm, images[j].ground_truth);
		out[j].resize(m, count);
		for (Eigen::Index k = 0; k < count; ++k) {
			const Vector dp = deltas[j].col(k);
			const ShapeParams p = ShapeParams::from_vector(pstar + dp);
			const Vector x = extract(model.extractor, model.pca, *images[j].image, model.pdm, p);
			const Vector after = dp - predict(reg, x);
			out[j].col(k) = after;
			err_in[j] += mean_point_error(compose(model.pdm, p), truth);
			err_out[j] += mean_point_error(compose(model.pdm, ShapeParams::from_vector(pstar + after)), truth);
		}
	});
	Propagated res;
	res.residuals.resize(m, count * static_cast<Eigen::Index>(images.size()));
	for (std::size_t j = 0; j < images.size(); ++j) {
		res.residuals.middleCols(static_cast<Eigen::Index>(j) * count, count) = out[j];
		res.error_in += err_in[j];
		res.error_out += err_out[j];
	}
	const double total = static_cast<double>(res.residuals.cols());
	res.error_in /= total;
	res.error_out /= total;
	return res;
}

std::vector<Matrix> draw_deltas(std::size_t images, const PerturbationStats& st, Eigen::Index count,
								std::uint64_t seed, std::uint64_t stream)
{
	std::vector<Matrix> d(images);
	for (std::size_t j = 0; j < images; ++j) {
		Rng rng(mix_seed(seed, stream * kLevelStride + j));
		d[j] = sample_gaussian(rng, st.mean, st.covariance, count);
	}
	return d;
}

} // namespace

FeaturePca fit_training_pca(std::span<const TrainingImage> images, const FeatureExtractor& extractor,
							const PdmModel& pdm, const PerturbationStats& init, Eigen::Index d,
							int perturbations_per_image, std::uint64_t seed, int jobs)
{
	if (images.empty()) {
		throw std::invalid_argument("fit_training_pca: no images");
	}
	const auto per = static_cast<std::size_t>(std::max(perturbations_per_image, 0)) + 1;
	std::vector<Vector> raws(images.size() * per);
	const auto deltas = draw_deltas(images.size(), init, static_cast<Eigen::Index>(per - 1), seed, 7);
	parallel_for(images.size(), jobs, [&](std::size_t j) {
		const Vector pstar = images[j].ground_truth.to_vector();
		raws[j * per] = extractor.extract_raw(*images[j].image, compose(pdm, images[j].ground_truth));
		for (std::size_t k = 1; k < per; ++k) {
			const auto p = ShapeParams::from_vector(pstar + deltas[j].col(static_cast<Eigen::Index>(k) - 1));
			raws[j * per + k] = extractor.extract_raw(*images[j].image, compose(pdm, p));
		}
	});
	return fit_feature_pca(raws, d);
}

CascadeModel train_sdm(std::span<const TrainingImage> images, const PdmModel& pdm, const FeatureExtractor& extractor,
					   const FeaturePca& pca, const PerturbationStats& init_stats, const CascadeOptions& opt)
{
	check_inputs(images, pdm, extractor, pca, init_stats, opt);
	CascadeModel model;
	model.method = Method::Sdm;
	model.pdm = pdm;
	model.extractor = extractor;
	model.pca = pca;

	const auto m = pdm.num_params();
	const auto width = pca.dim() + 1;
	const Eigen::Index k_samples = opt.samples_per_image;
	PerturbationStats stats = init_stats;
	if (!opt.include_rigid) {
		drop_rigid(stats);
	}
	for (int level = 0; level < opt.levels; ++level) {
		const auto deltas = draw_deltas(images.size(), stats, k_samples, opt.seed, static_cast<std::uint64_t>(level));
		std::vector<Matrix> features(images.size());
		std::vector<Matrix> xxt(images.size());
		std::vector<Matrix> yxt(images.size());
		parallel_for(images.size(), opt.jobs, [&](std::size_t j) {
			const Vector pstar = images[j].ground_truth.to_vector();
			Matrix x(width, k_samples);
			for (Eigen::Index k = 0; k < k_samples; ++k) {
				const auto p = ShapeParams::from_vector(pstar + deltas[j].col(k));
				x.col(k) = extract(extractor, pca, *images[j].image, pdm, p);
			}
			xxt[j] = x * x.transpose();
			yxt[j] = deltas[j] * x.transpose();
			features[j] = std::move(x);
		});
		Matrix normal = tree_sum(xxt);
		symmetrize(normal);
		const double lambda = opt.ridge.resolve(normal);
		normal.diagonal().array() += lambda;

		CascadeLevel lv;
		lv.stats = stats;
		SdmSolverState sdm;
		sdm.v = spd_inverse(normal, "rank deficient; set ridge > 0");
		sdm.ridge = lambda;
		sdm.count = k_samples * static_cast<Eigen::Index>(images.size());
		lv.regressor.matrix = tree_sum(yxt) * sdm.v;
		lv.sdm_state = std::move(sdm);

		// Residuals δp − R x on the level's own samples.
		Matrix residuals(m, k_samples * static_cast<Eigen::Index>(images.size()));
		std::vector<double> err_in(images.size(), 0.0);
		std::vector<double> err_out(images.size(), 0.0);
		parallel_for(images.size(), opt.jobs, [&](std::size_t j) {
			const Vector pstar = images[j].ground_truth.to_vector();
			const Shape truth = compose(pdm, images[j].ground_truth);
			const Matrix after = deltas[j] - lv.regressor.matrix * features[j];
			residuals.middleCols(static_cast<Eigen::Index>(j) * k_samples, k_samples) = after;
			for (Eigen::Index k = 0; k < k_samples; ++k) {
				err_in[j] += mean_point_error(compose(pdm, ShapeParams::from_vector(pstar + deltas[j].col(k))), truth);
				err_out[j] += mean_point_error(compose(pdm, ShapeParams::from_vector(pstar + after.col(k))), truth);
			}
		});
		for (std::size_t j = 0; j < images.size(); ++j) {
			lv.train_error_in += err_in[j];
			lv.train_error_out += err_out[j];
		}
		lv.train_error_in /= static_cast<double>(residuals.cols());
		lv.train_error_out /= static_cast<double>(residuals.cols());
		model.levels.push_back(std::move(lv));
		if (level + 1 < opt.levels) {
			stats = next_level_stats(residuals, init_stats, opt);
		}
	}
	return model;
}

CascadeModel train_ccr(std::span<const TrainingImage> images, const FunctionalTrainingSet& ts, const PdmModel& pdm,
					   const FeatureExtractor& extractor, const FeaturePca& pca, const PerturbationStats& init_stats,
					   const CascadeOptions& opt)
{
	check_inputs(images, pdm, extractor, pca, init_stats, opt);
	if (ts.count() != static_cast<Eigen::Index>(images.size()) || ts.num_params() != pdm.num_params() ||
		ts.feature_dim() != pca.dim() + 1) {
		throw std::invalid_argument("train_ccr: functional set does not match the images, PDM and PCA");
	}
	CascadeModel model;
	model.method = Method::Ccr;
	model.pdm = pdm;
	model.extractor = extractor;
	model.pca = pca;

	PerturbationStats stats = init_stats;
	if (!opt.include_rigid) {
		drop_rigid(stats);
	}
	// A fixed validation set drawn once from the initial statistics and carried through every level.
	std::vector<Matrix> deltas =
		draw_deltas(images.size(), stats, opt.stats_samples_per_image, opt.seed, 1'000'000);
	for (int level = 0; level < opt.levels; ++level) {
		auto solution = train_continuous(ts, stats);
		CascadeLevel lv;
		lv.stats = stats;
		lv.regressor = std::move(solution.regressor);
		lv.solver_state = std::move(solution.state);
		const Propagated prop = propagate(images, model, lv.regressor, deltas, opt.jobs);
		lv.train_error_in = prop.error_in;
		lv.train_error_out = prop.error_out;
		model.levels.push_back(std::move(lv));
		if (level + 1 < opt.levels) {
			stats = next_level_stats(prop.residuals, init_stats, opt);
			const auto count = static_cast<Eigen::Index>(opt.stats_samples_per_image);
			for (std::size_t j = 0; j < images.size(); ++j) {
				deltas[j] = prop.residuals.middleCols(static_cast<Eigen::Index>(j) * count, count);
			}
		}
	}
	return model;
}

CascadeModel train_ccr(std::span<const TrainingImage> images, const PdmModel& pdm, const FeatureExtractor& extractor,
					   const FeaturePca& pca, const PerturbationStats& init_stats, const CascadeOptions& opt)
{
	check_inputs(images, pdm, extractor, pca, init_stats, opt);
	const auto ts = build_functional_set(images, extractor, pca, pdm, opt.ridge, opt.delta_x, opt.jobs);
	return train_ccr(images, ts, pdm, extractor, pca, init_stats, opt);
}

FitResult fit_with_diagnostics(const CascadeModel& model, const ImageLike& image, const ShapeParams& p0)
{
	if (p0.size() != model.pdm.num_params()) {
		throw std::invalid_argument("fit: parameter dimension does not match the model");
	}
	FitResult res;
	Vector p = p0.to_vector();
	for (int level = 0; level < static_cast<int>(model.levels.size()); ++level) {
		const ShapeParams current = ShapeParams::from_vector(p);
		Vector raw;
		try {
			raw = model.extractor.extract_raw(image, compose(model.pdm, current));
		} catch (const Error& e) {
			throw FitError(e.what(), current, level);
		}
		const Vector x = model.pca.project(raw);
		res.reconstruction_score = model.pca.reconstruction_residual(raw);
		const Vector next = p - predict(model.levels[static_cast<std::size_t>(level)].regressor, x);
		if (!next.allFinite()) {
			throw FitError("non-finite parameters", current, level);
		}
		p = next;
	}
	res.params = ShapeParams::from_vector(p);
	return res;
}

ShapeParams fit(const CascadeModel& model, const ImageLike& image, const ShapeParams& p0)
{
	return fit_with_diagnostics(model, image, p0).params;
}

} // namespace iccr
