/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/src/incremental.cpp
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
#include "iccr/incremental.hpp"

#include <Eigen/Cholesky>

#include <chrono>

namespace iccr {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start)
{
	return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

void isdm_update(IsdmLevelState& state, const Matrix& xs, const Matrix& ys)
{
	const auto d = state.v.rows();
	if (xs.cols() != ys.cols() || (xs.cols() > 0 && (xs.rows() != d || ys.rows() != state.regressor.rows()))) {
		throw std::invalid_argument("isdm_update: dimension mismatch");
	}
	if (xs.cols() == 0) {
		return;
	}
	if (!xs.allFinite() || !ys.allFinite()) {
		throw Error("isdm_update: non-finite samples rejected");
	}
	const auto k = xs.cols();
	const Matrix vx = state.v * xs;
	Matrix inner = Matrix::Identity(k, k);
	inner.noalias() += xs.transpose() * vx;
	symmetrize(inner);
	const Matrix u = spd_inverse(inner, "isdm_update: singular inner matrix");
	// Q = X_S U X_Sᵀ V_T, a full d×d product.
	Matrix q(d, d);
	q.noalias() = (xs * u) * vx.transpose();
	Matrix v_next = state.v;
	v_next.noalias() -= state.v * q;
	symmetrize(v_next);
	Matrix r_next = state.regressor;
	r_next.noalias() -= state.regressor * q;
	r_next.noalias() += (ys * xs.transpose()) * v_next;
	if (!v_next.allFinite() || !r_next.allFinite()) {
		throw Error("isdm_update: non-finite result rejected");
	}
	state.v = std::move(v_next);
	state.regressor = std::move(r_next);
}

Matrix data_term_b_inverse(const Matrix& b)
{
	if (b.rows() != b.cols() || b.rows() < 2) {
		throw std::invalid_argument("data_term_b_inverse: B must be square with m ≥ 1");
	}
	const auto m = b.rows() - 1;
	const Vector mu = b.block(1, 0, m, 1);
	Matrix sigma = b.bottomRightCorner(m, m) - mu * mu.transpose();
	symmetrize(sigma);
	const Matrix si = spd_inverse(sigma, "data term not invertible");
	const Vector sm = si * mu;
	Matrix out(m + 1, m + 1);
	out(0, 0) = 1.0 + mu.dot(sm);
	out.block(0, 1, 1, m) = -sm.transpose();
	out.block(1, 0, m, 1) = -sm;
	out.bottomRightCorner(m, m) = si;
	return out;
}

void iccr_update(CrSolverState& state, LinearRegressor& regressor, const Matrix& ds, const Matrix& b_inv)
{
	const auto rows = state.v_inv.rows();
	const auto w = state.b.rows();
	const auto m = state.a.rows();
	if (ds.rows() != rows || ds.cols() != w || b_inv.rows() != w || b_inv.cols() != w) {
		throw std::invalid_argument("iccr_update: block dimension mismatch");
	}
	if (!ds.allFinite()) {
		throw Error("iccr_update: non-finite block rejected");
	}
	// The lower triangle of V⁻¹ is authoritative. One pass over it gives both
	// V⁻¹D_S and V⁻¹Qᵀ with Q = A·sum_Dᵀ after the update.
	Matrix sum_next = state.sum_d + ds;
	Matrix rhs(rows, w + m);
	rhs.leftCols(w) = ds;
	rhs.rightCols(m).noalias() = sum_next * state.a.transpose();
	Matrix z(rows, w + m);
	z.noalias() = state.v_inv.selfadjointView<Eigen::Lower>() * rhs;
	const auto wv = z.leftCols(w); // V⁻¹D_S
	Matrix inner = b_inv;
	inner.noalias() += ds.transpose() * wv;
	symmetrize(inner);
	const Matrix ci = spd_inverse(inner, "iccr_update: singular inner matrix");
	const Matrix u = wv * ci;
	// R' = Q·V' = (V⁻¹Qᵀ)ᵀ − (Q·U)·(V⁻¹D_S)ᵀ, before V⁻¹ is touched.
	const Matrix qu = rhs.rightCols(m).transpose() * u;
	Matrix r_next = z.rightCols(m).transpose();
	r_next.noalias() -= qu * wv.transpose();
	if (!u.allFinite() || !r_next.allFinite() ||
		u.cwiseAbs().maxCoeff() * wv.cwiseAbs().maxCoeff() * static_cast<double>(w) > 1e300) {
		throw Error("iccr_update: non-finite result rejected");
	}
	state.v_inv.triangularView<Eigen::Lower>() -= u * wv.transpose();
	mirror_lower(state.v_inv);
	state.sum_d = std::move(sum_next);
	++state.count;
	regressor.matrix = std::move(r_next);
}

void iccr_update(CrSolverState& state, LinearRegressor& regressor, const Matrix& ds)
{
	iccr_update(state, regressor, ds, data_term_b_inverse(state.b));
}

UpdateGate::UpdateGate(Kind kind, double threshold, Predicate predicate)
	: kind_(kind), threshold_(threshold), predicate_(std::move(predicate))
{
}

UpdateGate UpdateGate::threshold(double threshold)
{
	if (!(threshold > 0.0)) {
		throw std::invalid_argument("UpdateGate: threshold must be positive");
	}
	return {Kind::Threshold, threshold, nullptr};
}

UpdateGate UpdateGate::always()
{
	return {Kind::Always, 0.1, nullptr};
}

UpdateGate UpdateGate::never()
{
	return {Kind::Never, 0.1, nullptr};
}

UpdateGate UpdateGate::pluggable(Predicate predicate)
{
	if (!predicate) {
		throw std::invalid_argument("UpdateGate: empty predicate");
	}
	return {Kind::Pluggable, 0.1, std::move(predicate)};
}

bool UpdateGate::accept(const FitDiagnostics& diagnostics) const
{
	switch (kind_) {
	case Kind::Always:
		return true;
	case Kind::Never:
		return false;
	case Kind::Pluggable:
		return predicate_(diagnostics);
	case Kind::Threshold:
		return diagnostics.true_error ? *diagnostics.true_error <= threshold_
									  : diagnostics.reconstruction_score <= threshold_;
	}
	return false;
}

bool gate_accept(const UpdateGate& gate, const FitDiagnostics& diagnostics)
{
	return gate.accept(diagnostics);
}

std::string to_string(UpdateGate::Kind kind)
{
	switch (kind) {
	case UpdateGate::Kind::Threshold:
		return "threshold";
	case UpdateGate::Kind::Always:
		return "always";
	case UpdateGate::Kind::Never:
		return "never";
	case UpdateGate::Kind::Pluggable:
		return "pluggable";
	}
	return "unknown";
}

UpdateGate::Kind gate_kind_from_string(const std::string& s)
{
	if (s == "threshold") {
		return UpdateGate::Kind::Threshold;
	}
	if (s == "always") {
		return UpdateGate::Kind::Always;
	}
	if (s == "never") {
		return UpdateGate::Kind::Never;
	}
	throw std::invalid_argument("unknown gate kind: " + s);
}

std::string to_string(IncrementalMode mode)
{
	switch (mode) {
	case IncrementalMode::None:
		return "none";
	case IncrementalMode::Iccr:
		return "iccr";
	case IncrementalMode::Isdm:
		return "isdm";
	}
	return "unknown";
}

IncrementalMode incremental_mode_from_string(const std::string& s)
{
	if (s == "none") {
		return IncrementalMode::None;
	}
	if (s == "iccr") {
		return IncrementalMode::Iccr;
	}
	if (s == "isdm") {
		return IncrementalMode::Isdm;
	}
	throw std::invalid_argument("unknown incremental mode: " + s);
}

ModelUpdater::ModelUpdater(const CascadeModel& model, IncrementalOptions options) : options_(options)
{
	if (options_.mode == IncrementalMode::Iccr) {
		for (const auto& level : model.levels) {
			if (!level.solver_state) {
				throw std::invalid_argument("iCCR updates need a continuous-regression model with solver state");
			}
			if (options_.reinvert_every > 0) {
				v_direct_.push_back(spd_inverse(level.solver_state->v_inv, "cannot recover V from its inverse"));
			}
		}
	} else if (options_.mode == IncrementalMode::Isdm) {
		if (options_.isdm_samples < 1) {
			throw std::invalid_argument("iSDM updates need at least one sample per level");
		}
		for (const auto& level : model.levels) {
			if (!level.sdm_state) {
				throw std::invalid_argument("iSDM updates need a sampled model with SDM state");
			}
		}
	}
}

UpdateRecord ModelUpdater::update(CascadeModel& model, const ImageLike& image, const ShapeParams& tracked,
								  std::uint64_t frame)
{
	UpdateRecord rec;
	if (options_.mode == IncrementalMode::None) {
		rec.rejected_reason = "incremental mode off";
		return rec;
	}
	const auto before = model.extractor.extraction_count();
	if (options_.mode == IncrementalMode::Iccr) {
		auto t0 = std::chrono::steady_clock::now();
		const FeatureSample sample = extract_with_jacobian(model.extractor, model.pca, image, model.pdm, tracked,
														   options_.delta_x, DifferenceScheme::Forward);
		const Matrix ds = sample.block();
		rec.extraction_seconds = seconds_since(t0);
		rec.extractions = model.extractor.extraction_count() - before;
		t0 = std::chrono::steady_clock::now();
		if (b_inv_.empty()) {
			for (const auto& level : model.levels) {
				b_inv_.push_back(data_term_b_inverse(level.solver_state->b));
			}
		}
		for (std::size_t i = 0; i < model.levels.size(); ++i) {
			auto& level = model.levels[i];
			iccr_update(*level.solver_state, level.regressor, ds, b_inv_[i]);
			if (!v_direct_.empty()) {
				v_direct_[i].noalias() += ds * level.solver_state->b * ds.transpose();
				symmetrize(v_direct_[i]);
				if ((updates_ + 1) % options_.reinvert_every == 0) {
					auto& st = *level.solver_state;
					st.v_inv = spd_inverse(v_direct_[i], "rank deficient; set ridge > 0");
					level.regressor.matrix = (st.a * st.sum_d.transpose()) * st.v_inv;
				}
			}
		}
		rec.update_seconds = seconds_since(t0);
	} else {
		const Vector center = tracked.to_vector();
		for (std::size_t i = 0; i < model.levels.size(); ++i) {
			auto& level = model.levels[i];
			auto t0 = std::chrono::steady_clock::now();
			Rng rng(mix_seed(options_.seed, frame * 1'000'003 + i));
			const Matrix deltas = sample_gaussian(rng, level.stats.mean, level.stats.covariance, options_.isdm_samples);
			Matrix xs(model.pca.dim() + 1, deltas.cols());
			for (Eigen::Index k = 0; k < deltas.cols(); ++k) {
				const auto p = ShapeParams::from_vector(center + deltas.col(k));
				xs.col(k) = extract(model.extractor, model.pca, image, model.pdm, p);
			}
			rec.extraction_seconds += seconds_since(t0);
			t0 = std::chrono::steady_clock::now();
			IsdmLevelState st{std::move(level.regressor.matrix), std::move(level.sdm_state->v)};
			try {
				isdm_update(st, xs, deltas);
			} catch (...) {
				level.regressor.matrix = std::move(st.regressor);
				level.sdm_state->v = std::move(st.v);
				throw;
			}
			level.regressor.matrix = std::move(st.regressor);
			level.sdm_state->v = std::move(st.v);
			level.sdm_state->count += deltas.cols();
			rec.update_seconds += seconds_since(t0);
		}
		rec.extractions = model.extractor.extraction_count() - before;
	}
	++updates_;
	rec.applied = true;
	return rec;
}

ModelSnapshots::ModelSnapshots(std::shared_ptr<const CascadeModel> initial) : current_(std::move(initial))
{
	if (!current_) {
		throw std::invalid_argument("ModelSnapshots: null model");
	}
}

std::shared_ptr<const CascadeModel> ModelSnapshots::current() const
{
	std::lock_guard lock(mutex_);
	return current_;
}

void ModelSnapshots::publish(std::shared_ptr<const CascadeModel> next)
{
	if (!next) {
		throw std::invalid_argument("ModelSnapshots: null model");
	}
	std::lock_guard lock(mutex_);
	current_ = std::move(next);
	++version_;
}

std::uint64_t ModelSnapshots::version() const
{
	std::lock_guard lock(mutex_);
	return version_;
}

} // namespace iccr
