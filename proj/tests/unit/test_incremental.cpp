/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: tests/unit/test_incremental.cpp
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
#include "oracles.hpp"

#include "iccr/incremental.hpp"
#include "iccr/pipeline.hpp"
#include "iccr/synth.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include <atomic>
#include <limits>
#include <thread>

using namespace iccr;

namespace {

double spectral_rel(const Matrix& a, const Matrix& b)
{
	Eigen::JacobiSVD<Matrix> num(a - b);
	Eigen::JacobiSVD<Matrix> den(b);
	return num.singularValues()(0) / den.singularValues()(0);
}

// Direct V = Σ_j D_j B D_jᵀ + λI over explicit loops.
Matrix direct_v(std::span<const Matrix> blocks, const Matrix& b, double lambda)
{
	const auto rows = blocks.front().rows();
	Matrix v = lambda * Matrix::Identity(rows, rows);
	for (const auto& d : blocks) {
		for (Eigen::Index r = 0; r < rows; ++r) {
			for (Eigen::Index c = 0; c < rows; ++c) {
				double s = 0.0;
				for (Eigen::Index u = 0; u < b.rows(); ++u) {
					for (Eigen::Index w = 0; w < b.cols(); ++w) {
						s += d(r, u) * b(u, w) * d(c, w);
					}
				}
				v(r, c) += s;
			}
		}
	}
	return v;
}

struct IsdmCase
{
	Matrix x;
	Matrix y;
	double lambda = 0.5;
	IsdmLevelState state;

	IsdmCase(Rng& rng, Eigen::Index d, Eigen::Index m, Eigen::Index count)
	{
		x = oracle::random_matrix(rng, d, count);
		y = oracle::random_matrix(rng, m, count);
		state = batch(x, y);
	}

	IsdmLevelState batch(const Matrix& xs, const Matrix& ys) const
	{
		IsdmLevelState s;
		const Matrix normal = xs * xs.transpose() + lambda * Matrix::Identity(xs.rows(), xs.rows());
		s.v = oracle::gauss_jordan_inverse(normal);
		s.regressor = train_sampled(xs, ys, Ridge::absolute(lambda)).matrix;
		return s;
	}
};

Matrix hcat(const Matrix& a, const Matrix& b)
{
	Matrix out(a.rows(), a.cols() + b.cols());
	out << a, b;
	return out;
}

struct TrainedModels
{
	SyntheticDataset data;
	CascadeModel ccr;
	CascadeModel sdm;

	TrainedModels()
	{
		DatasetOptions opt;
		opt.train_identities = 4;
		opt.train_length = 16;
		opt.test_sequences = 1;
		opt.test_length = 10;
		data = make_dataset(opt);
		const auto seqs = annotated(data.train);
		TrainingConfig cfg;
		cfg.feature_dim = 32;
		cfg.frame_stride = 2;
		cfg.method = Method::Ccr;
		ccr = train_from_sequences(seqs, cfg).model;
		cfg.method = Method::Sdm;
		sdm = train_from_sequences(seqs, cfg).model;
	}
};

const TrainedModels& trained()
{
	static const TrainedModels models;
	return models;
}

} // namespace

TEST_CASE("isdm_update matches batch retraining")
{
	Rng rng(3);
	IsdmCase c(rng, 40, 6, 30);
	const Matrix xs = oracle::random_matrix(rng, 40, 5);
	const Matrix ys = oracle::random_matrix(rng, 6, 5);
	IsdmLevelState s = c.state;
	isdm_update(s, xs, ys);
	const auto ref = c.batch(hcat(c.x, xs), hcat(c.y, ys));
	CHECK(oracle::rel(s.regressor, ref.regressor) < 1e-8);
	CHECK(oracle::rel(s.v, ref.v) < 1e-8);
	CHECK(max_asymmetry(s.v) < 1e-9);
	CHECK(is_psd(s.v, 1e-8));

	SUBCASE("two updates equal one union update")
	{
		const Matrix x2 = oracle::random_matrix(rng, 40, 3);
		const Matrix y2 = oracle::random_matrix(rng, 6, 3);
		IsdmLevelState two = s;
		isdm_update(two, x2, y2);
		IsdmLevelState one = c.state;
		isdm_update(one, hcat(xs, x2), hcat(ys, y2));
		CHECK(oracle::rel(two.regressor, one.regressor) < 1e-8);
		CHECK(oracle::rel(two.v, one.v) < 1e-8);
	}
	SUBCASE("empty sample set leaves the state untouched")
	{
		IsdmLevelState e = c.state;
		isdm_update(e, Matrix(40, 0), Matrix(6, 0));
		CHECK(oracle::rel(e.regressor, c.state.regressor) == 0.0);
		CHECK(oracle::rel(e.v, c.state.v) == 0.0);
	}
	SUBCASE("non-finite samples are rejected without side effects")
	{
		IsdmLevelState e = c.state;
		Matrix bad = xs;
		bad(3, 1) = std::numeric_limits<double>::quiet_NaN();
		CHECK_THROWS_AS(isdm_update(e, bad, ys), Error);
		CHECK(oracle::rel(e.regressor, c.state.regressor) == 0.0);
		CHECK(oracle::rel(e.v, c.state.v) == 0.0);
		CHECK_THROWS_AS(isdm_update(e, xs.topRows(10), ys), std::invalid_argument);
	}
}

TEST_CASE("twenty isdm updates at d = 60 stay on the batch solution")
{
	Rng rng(8);
	IsdmCase c(rng, 60, 8, 80);
	IsdmLevelState s = c.state;
	Matrix all_x = c.x;
	Matrix all_y = c.y;
	for (int u = 0; u < 20; ++u) {
		const Matrix xs = oracle::random_matrix(rng, 60, 5);
		const Matrix ys = oracle::random_matrix(rng, 8, 5);
		isdm_update(s, xs, ys);
		all_x = hcat(all_x, xs);
		all_y = hcat(all_y, ys);
	}
	const auto ref = c.batch(all_x, all_y);
	CHECK(oracle::rel(s.regressor, ref.regressor) < 1e-8);
	CHECK(oracle::rel(s.v, ref.v) < 1e-8);
}

TEST_CASE("iccr_update: Woodbury against direct inversion and batch training")
{
	Rng rng(12);
	const Eigen::Index rows = 41;
	const Eigen::Index m = 6;
	auto blocks = oracle::random_blocks(rng, rows, m, 20);
	const auto st = oracle::random_stats(rng, m);
	const auto ts = FunctionalTrainingSet::from_blocks(blocks);
	auto sol = train_continuous(ts, st);
	const double lambda = sol.state.ridge;
	CHECK(iccr_inner_dim(sol.state) == m + 1);

	const auto extra = oracle::random_blocks(rng, rows, m, 1).front();
	CrSolverState s = sol.state;
	LinearRegressor r = sol.regressor;
	iccr_update(s, r, extra);
	blocks.push_back(extra);
	const Matrix v = direct_v(blocks, sol.state.b, lambda);
	CHECK(spectral_rel(s.v_inv, oracle::gauss_jordan_inverse(v)) < 1e-8);
	CHECK(s.count == sol.state.count + 1);

	const auto batch = train_continuous(FunctionalTrainingSet::from_blocks(blocks, Ridge::absolute(lambda)), st);
	CHECK(oracle::rel(r.matrix, batch.regressor.matrix) < 1e-8);
	CHECK(oracle::rel(s.sum_d, batch.state.sum_d) < 1e-14);
	CHECK(max_asymmetry(s.v_inv) < 1e-9);

	SUBCASE("precomputed B inverse gives the same update")
	{
		CrSolverState s2 = sol.state;
		LinearRegressor r2 = sol.regressor;
		iccr_update(s2, r2, extra, data_term_b_inverse(sol.state.b));
		CHECK(oracle::rel(r2.matrix, r.matrix) == 0.0);
		CHECK(oracle::rel(data_term_b_inverse(sol.state.b) * sol.state.b, Matrix::Identity(m + 1, m + 1)) < 1e-10);
	}
	SUBCASE("an all-zero block only increments the count")
	{
		CrSolverState s2 = sol.state;
		LinearRegressor r2 = sol.regressor;
		iccr_update(s2, r2, Matrix::Zero(rows, m + 1));
		CHECK(oracle::rel(s2.v_inv, sol.state.v_inv) == 0.0);
		CHECK(oracle::rel(r2.matrix, sol.regressor.matrix) < 1e-13);
	}
	SUBCASE("bias-only block: a rank-one change of V along the bias axis")
	{
		// Zero features and zero Jacobian leave only the bias entry of x.
		Matrix ds = Matrix::Zero(rows, m + 1);
		ds(rows - 1, 0) = 1.0;
		CrSolverState s2 = sol.state;
		LinearRegressor r2 = sol.regressor;
		iccr_update(s2, r2, ds);
		const Matrix v_old = oracle::gauss_jordan_inverse(sol.state.v_inv);
		const Matrix dv = oracle::gauss_jordan_inverse(s2.v_inv) - v_old;
		Matrix expected = Matrix::Zero(rows, rows);
		expected(rows - 1, rows - 1) = sol.state.b(0, 0);
		CHECK((dv - expected).cwiseAbs().maxCoeff() < 1e-8 * v_old.cwiseAbs().maxCoeff());
		std::vector<Matrix> with = ts.blocks;
		with.push_back(ds);
		const auto b2 = train_continuous(FunctionalTrainingSet::from_blocks(with, Ridge::absolute(lambda)), st);
		CHECK(oracle::rel(r2.matrix, b2.regressor.matrix) < 1e-8);
	}
	SUBCASE("rejections leave the state unchanged")
	{
		CrSolverState s2 = sol.state;
		LinearRegressor r2 = sol.regressor;
		Matrix bad = extra;
		bad(0, 0) = std::numeric_limits<double>::infinity();
		CHECK_THROWS_AS(iccr_update(s2, r2, bad), Error);
		CHECK_THROWS_AS(iccr_update(s2, r2, extra.topRows(5)), std::invalid_argument);
		CHECK(oracle::rel(s2.v_inv, sol.state.v_inv) == 0.0);
		CHECK(oracle::rel(r2.matrix, sol.regressor.matrix) == 0.0);
		CHECK(s2.count == sol.state.count);
	}
}

TEST_CASE("fifty iccr updates at d = 100, m = 10 match batch training")
{
	Rng rng(5);
	const Eigen::Index rows = 101;
	const Eigen::Index m = 10;
	auto blocks = oracle::random_blocks(rng, rows, m, 30);
	const auto st = oracle::random_stats(rng, m);
	auto sol = train_continuous(FunctionalTrainingSet::from_blocks(blocks), st);
	const double lambda = sol.state.ridge;
	for (int u = 0; u < 50; ++u) {
		auto ds = oracle::random_blocks(rng, rows, m, 1).front();
		iccr_update(sol.state, sol.regressor, ds);
		blocks.push_back(std::move(ds));
	}
	const auto batch = train_continuous(FunctionalTrainingSet::from_blocks(blocks, Ridge::absolute(lambda)), st);
	CHECK(oracle::rel(sol.regressor.matrix, batch.regressor.matrix) < 1e-6);
	CHECK(oracle::rel(sol.state.v_inv, batch.state.v_inv) < 1e-6);
	CHECK(max_asymmetry(sol.state.v_inv) < 1e-9);
}

TEST_CASE("zero covariance: data term not invertible")
{
	Rng rng(2);
	const auto blocks = oracle::random_blocks(rng, 11, 4, 6);
	PerturbationStats st;
	st.mean = Vector::Zero(4);
	st.covariance = Matrix::Zero(4, 4);
	auto sol = train_continuous(FunctionalTrainingSet::from_blocks(blocks), st);
	const CrSolverState before = sol.state;
	CHECK_THROWS_WITH_AS(iccr_update(sol.state, sol.regressor, blocks.front()), "data term not invertible", Error);
	CHECK(oracle::rel(sol.state.v_inv, before.v_inv) == 0.0);
	CHECK_THROWS_WITH_AS(data_term_b_inverse(before.b), "data term not invertible", Error);
}

TEST_CASE("update gate")
{
	FitDiagnostics good;
	good.true_error = 0.05;
	good.reconstruction_score = 0.9;
	FitDiagnostics bad;
	bad.true_error = 0.15;
	bad.reconstruction_score = 0.01;
	FitDiagnostics unknown;
	unknown.reconstruction_score = 0.08;

	const auto gate = UpdateGate::threshold(0.1);
	CHECK(gate_accept(gate, good));
	CHECK_FALSE(gate_accept(gate, bad));
	CHECK(gate_accept(gate, unknown));
	CHECK_FALSE(gate_accept(UpdateGate::threshold(0.05), unknown));
	for (const auto& d : {good, bad, unknown}) {
		CHECK(gate_accept(UpdateGate::always(), d));
		CHECK_FALSE(gate_accept(UpdateGate::never(), d));
	}
	const auto low_score = UpdateGate::pluggable([](const FitDiagnostics& d) { return d.reconstruction_score < 0.5; });
	CHECK(low_score.accept(bad));
	CHECK_FALSE(low_score.accept(good));
	CHECK(low_score.kind() == UpdateGate::Kind::Pluggable);

	CHECK_THROWS_AS(UpdateGate::threshold(0.0), std::invalid_argument);
	CHECK_THROWS_AS(UpdateGate::pluggable(nullptr), std::invalid_argument);
	for (auto k : {UpdateGate::Kind::Threshold, UpdateGate::Kind::Always, UpdateGate::Kind::Never}) {
		CHECK(gate_kind_from_string(to_string(k)) == k);
	}
	for (auto mode : {IncrementalMode::None, IncrementalMode::Iccr, IncrementalMode::Isdm}) {
		CHECK(incremental_mode_from_string(to_string(mode)) == mode);
	}
	CHECK_THROWS(gate_kind_from_string("svm"));
}

TEST_CASE("ModelUpdater: iCCR extracts three times per frame regardless of depth")
{
	const auto& t = trained();
	const auto& frame = t.data.test[0].frames[3];
	const ShapeParams tracked = decompose(t.ccr.pdm, frame.shape);
	IncrementalOptions opt;
	opt.mode = IncrementalMode::Iccr;

	for (const int depth : {1, 3}) {
		CascadeModel model = t.ccr;
		model.extractor = model.extractor.with_private_counter();
		model.levels.resize(static_cast<std::size_t>(depth));
		ModelUpdater updater(model, opt);
		const auto rec = updater.update(model, *frame.image, tracked, 3);
		CHECK(rec.applied);
		CHECK(rec.extractions == 3);
		CHECK(model.extractor.extraction_count() == 3);
		CHECK(updater.updates_applied() == 1);
	}

	// Same result as updating every level by hand with the shared block.
	CascadeModel model = t.ccr;
	ModelUpdater updater(model, opt);
	updater.update(model, *frame.image, tracked, 3);
	const auto sample = extract_with_jacobian(t.ccr.extractor, t.ccr.pca, *frame.image, t.ccr.pdm, tracked, opt.delta_x,
											  DifferenceScheme::Forward);
	for (std::size_t i = 0; i < model.levels.size(); ++i) {
		CrSolverState s = *t.ccr.levels[i].solver_state;
		LinearRegressor r = t.ccr.levels[i].regressor;
		iccr_update(s, r, sample.block());
		CHECK(oracle::rel(model.levels[i].regressor.matrix, r.matrix) < 1e-12);
	}
	CHECK_THROWS_AS(ModelUpdater(t.sdm, opt), std::invalid_argument);
}

TEST_CASE("ModelUpdater: iSDM extracts L·K times and matches isdm_update")
{
	const auto& t = trained();
	const auto& frame = t.data.test[0].frames[4];
	const ShapeParams tracked = decompose(t.sdm.pdm, frame.shape);
	IncrementalOptions opt;
	opt.mode = IncrementalMode::Isdm;
	opt.isdm_samples = 7;
	opt.seed = 3;
	CascadeModel model = t.sdm;
	model.extractor = model.extractor.with_private_counter();
	ModelUpdater updater(model, opt);
	const auto rec = updater.update(model, *frame.image, tracked, 4);
	CHECK(rec.extractions == 7 * model.levels.size());
	for (std::size_t i = 0; i < model.levels.size(); ++i) {
		CHECK(model.levels[i].sdm_state->count == t.sdm.levels[i].sdm_state->count + 7);
		CHECK(oracle::rel(model.levels[i].regressor.matrix, t.sdm.levels[i].regressor.matrix) > 0.0);
		CHECK(is_psd(model.levels[i].sdm_state->v, 1e-8));
	}
	CHECK_THROWS_AS(ModelUpdater(t.ccr, opt), std::invalid_argument);
	opt.isdm_samples = 0;
	CHECK_THROWS_AS(ModelUpdater(t.sdm, opt), std::invalid_argument);

	IncrementalOptions off;
	CascadeModel untouched = t.sdm;
	ModelUpdater none(untouched, off);
	CHECK_FALSE(none.update(untouched, *frame.image, tracked, 0).applied);
}

TEST_CASE("periodic re-inversion stays on the Woodbury path")
{
	const auto& t = trained();
	IncrementalOptions opt;
	opt.mode = IncrementalMode::Iccr;
	CascadeModel a = t.ccr;
	CascadeModel b = t.ccr;
	ModelUpdater plain(a, opt);
	opt.reinvert_every = 4;
	ModelUpdater reinverting(b, opt);
	const auto& seq = t.data.test[0];
	for (std::size_t f = 0; f < seq.frames.size(); ++f) {
		const auto p = decompose(t.ccr.pdm, seq.frames[f].shape);
		plain.update(a, *seq.frames[f].image, p, f);
		reinverting.update(b, *seq.frames[f].image, p, f);
	}
	for (std::size_t i = 0; i < a.levels.size(); ++i) {
		CHECK(oracle::rel(b.levels[i].regressor.matrix, a.levels[i].regressor.matrix) < 1e-8);
	}
}

TEST_CASE("ModelSnapshots publish atomically")
{
	const auto& t = trained();
	auto first = std::make_shared<const CascadeModel>(t.ccr);
	ModelSnapshots snaps(first);
	CHECK(snaps.version() == 0);
	const auto held = snaps.current();
	auto second = std::make_shared<CascadeModel>(t.ccr);
	second->levels.front().regressor.matrix.setZero();
	snaps.publish(second);
	CHECK(snaps.version() == 1);
	CHECK(held.get() == first.get());
	CHECK(held->levels.front().regressor.matrix.cwiseAbs().maxCoeff() > 0.0);
	CHECK(snaps.current().get() == second.get());
	CHECK_THROWS_AS(snaps.publish(nullptr), std::invalid_argument);
	CHECK_THROWS_AS(ModelSnapshots(nullptr), std::invalid_argument);

	// Readers only ever see one of the published models.
	std::atomic<bool> stop{false};
	std::atomic<int> foreign{0};
	std::thread reader([&] {
		while (!stop) {
			const auto s = snaps.current();
			if (s.get() != first.get() && s.get() != second.get()) {
				++foreign;
			}
		}
	});
	for (int i = 0; i < 200; ++i) {
		snaps.publish(i % 2 ? std::shared_ptr<const CascadeModel>(first) : std::shared_ptr<const CascadeModel>(second));
	}
	stop = true;
	reader.join();
	CHECK(foreign == 0);
	CHECK(snaps.version() == 201);
}
