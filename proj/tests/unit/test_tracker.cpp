/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: tests/unit/test_tracker.cpp
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

#include "iccr/pipeline.hpp"
#include "iccr/synth.hpp"
#include "iccr/tracker.hpp"

#include <doctest.h>

using namespace iccr;

namespace {

struct Setup
{
	SyntheticDataset data;
	CascadeModel ccr;
	CascadeModel sdm;
	std::vector<TrackFrame> frames;

	Setup()
	{
		DatasetOptions opt;
		opt.train_identities = 5;
		opt.train_length = 20;
		opt.test_sequences = 1;
		opt.test_length = 25;
		data = make_dataset(opt);
		const auto seqs = annotated(data.train);
		TrainingConfig cfg;
		cfg.feature_dim = 40;
		cfg.frame_stride = 2;
		ccr = train_from_sequences(seqs, cfg).model;
		cfg.method = Method::Sdm;
		sdm = train_from_sequences(seqs, cfg).model;
		for (const auto& f : data.test[0].frames) {
			frames.push_back({f.image, f.shape});
		}
	}
};

const Setup& setup()
{
	static const Setup s;
	return s;
}

Shape random_shape(Rng& rng, Eigen::Index n)
{
	return Shape(Shape::Points(oracle::random_matrix(rng, n, 2, 20.0)));
}

} // namespace

TEST_CASE("normalized error against the two-loop oracle")
{
	Rng rng(6);
	for (int rep = 0; rep < 20; ++rep) {
		const Shape a = random_shape(rng, 12);
		const Shape b = random_shape(rng, 12);
		CHECK(normalized_error(a, b, {0, 3}) == doctest::Approx(oracle::normalized_error(a, b, 0, 3)).epsilon(1e-13));
	}
	const Shape a = random_shape(rng, 12);
	CHECK(normalized_error(a, a, {0, 3}) == 0.0);
	// Shifting every point by one eye distance gives error exactly 1.
	const double iod = (a.point(0) - a.point(3)).norm();
	CHECK(normalized_error(a.translated(iod, 0.0), a, {0, 3}) == doctest::Approx(1.0));

	Shape::Points same = a.points();
	same.row(3) = same.row(0);
	CHECK_THROWS_WITH_AS(normalized_error(a, Shape(same), {0, 3}), "normalized_error: eye corners coincide", Error);
	CHECK_THROWS_AS(normalized_error(a, a, {0, 12}), std::invalid_argument);
	CHECK_THROWS_AS(normalized_error(a, random_shape(rng, 5), {0, 3}), std::invalid_argument);
}

TEST_CASE("CED and AUC")
{
	const std::vector<double> zeros(10, 0.0);
	CHECK(ced_and_auc(zeros).auc == doctest::Approx(1.0));
	const std::vector<double> large(10, 0.5);
	CHECK(ced_and_auc(large).auc == 0.0);

	const std::vector<double> errs{0.01, 0.02, 0.02, 0.05, 0.079, 0.08, 0.2};
	const auto ca = ced_and_auc(errs);
	REQUIRE(ca.ced.thresholds.size() == 161);
	CHECK(ca.ced.thresholds.front() == 0.0);
	CHECK(ca.ced.thresholds.back() == doctest::Approx(0.08));
	CHECK(ca.ced.fractions.back() == doctest::Approx(6.0 / 7.0));
	for (std::size_t i = 1; i < ca.ced.fractions.size(); ++i) {
		CHECK(ca.ced.fractions[i] >= ca.ced.fractions[i - 1]);
	}

	// The trapezoid differs from the exact step integral by less than one grid cell.
	Rng rng(9);
	std::uniform_real_distribution<double> u(0.0, 0.12);
	std::vector<double> many(500);
	for (auto& e : many) {
		e = u(rng);
	}
	const double exact = oracle::step_area(many, 0.08);
	CHECK(std::abs(ced_and_auc(many).auc - exact) < 1.0 / 160.0);
	CHECK(std::abs(ced_and_auc(many, 0.08, 4001).auc - exact) < 1.0 / 4000.0);

	CHECK_THROWS_AS(ced_and_auc(std::vector<double>{}), std::invalid_argument);
	CHECK_THROWS_AS(ced_and_auc(errs, 0.0), std::invalid_argument);
	CHECK_THROWS_AS(ced_and_auc(errs, 0.08, 1), std::invalid_argument);
}

TEST_CASE("tracking without updates: accounting and report")
{
	const auto& s = setup();
	TrackOptions opt;
	const auto rep = track_sequence(s.ccr, s.frames, opt);
	REQUIRE(rep.frames.size() == s.frames.size());
	CHECK(rep.updates == 0);
	CHECK(rep.errors.size() == s.frames.size());
	int failures = 0;
	for (const auto& f : rep.frames) {
		CHECK(f.fit_extractions == static_cast<std::uint64_t>(s.ccr.num_levels()));
		CHECK(f.update_extractions == 0);
		CHECK(f.error == doctest::Approx(normalized_error(compose(s.ccr.pdm, f.params), s.frames[f.index].ground_truth,
														  {0, 3})));
		failures += f.failure ? 1 : 0;
	}
	CHECK(failures == rep.failures);
	CHECK(rep.auc == doctest::Approx(ced_and_auc(rep.errors).auc));
	CHECK(rep.mean_error > 0.0);
	CHECK(rep.frames[0].error < 0.1);
	CHECK_THROWS_AS(track_sequence(s.ccr, std::vector<TrackFrame>{}), std::invalid_argument);
}

TEST_CASE("a gate that never opens is bit-identical to no updates")
{
	const auto& s = setup();
	TrackOptions none;
	TrackOptions gated;
	gated.incremental.mode = IncrementalMode::Iccr;
	gated.gate = UpdateGate::never();
	const auto a = track_sequence(s.ccr, s.frames, none);
	const auto b = track_sequence(s.ccr, s.frames, gated);
	REQUIRE(a.errors.size() == b.errors.size());
	for (std::size_t i = 0; i < a.errors.size(); ++i) {
		CHECK(a.errors[i] == b.errors[i]);
		CHECK(a.frames[i].params.to_vector() == b.frames[i].params.to_vector());
	}
	CHECK(b.updates == 0);
}

TEST_CASE("updates: extraction counts and the original model is untouched")
{
	const auto& s = setup();
	const Matrix before = s.ccr.levels[0].regressor.matrix;
	TrackOptions opt;
	opt.incremental.mode = IncrementalMode::Iccr;
	opt.gate = UpdateGate::always();
	const auto rep = track_sequence(s.ccr, s.frames, opt);
	CHECK(rep.updates > 0);
	for (const auto& f : rep.frames) {
		if (f.updated) {
			CHECK(f.update_extractions == 3);
		}
	}
	CHECK(oracle::rel(s.ccr.levels[0].regressor.matrix, before) == 0.0);

	TrackOptions isdm;
	isdm.incremental.mode = IncrementalMode::Isdm;
	isdm.incremental.isdm_samples = 4;
	isdm.gate = UpdateGate::always();
	const auto r2 = track_sequence(s.sdm, s.frames, isdm);
	CHECK(r2.updates > 0);
	for (const auto& f : r2.frames) {
		if (f.updated) {
			CHECK(f.update_extractions == 4 * static_cast<std::uint64_t>(s.sdm.num_levels()));
		}
	}
}

TEST_CASE("after a failure the next frame restarts from the previous ground truth")
{
	const auto& s = setup();
	TrackOptions opt;
	opt.reinit_threshold = 1e-12; // every frame counts as a failure
	const auto rep = track_sequence(s.ccr, s.frames, opt);
	CHECK(rep.failures == static_cast<int>(s.frames.size()));
	for (std::size_t t = 1; t < s.frames.size(); ++t) {
		CHECK(rep.frames[t].reinitialized);
		const auto expected = fit(s.ccr, *s.frames[t].image, decompose(s.ccr.pdm, s.frames[t - 1].ground_truth));
		CHECK(rep.frames[t].params.to_vector() == expected.to_vector());
	}
	CHECK_FALSE(rep.frames[0].reinitialized);
}

TEST_CASE("zero regressors: every frame reports the start shape")
{
	const auto& s = setup();
	CascadeModel zero = s.ccr;
	for (auto& lv : zero.levels) {
		lv.regressor.matrix.setZero();
	}
	TrackOptions opt;
	opt.reinit_threshold = 10.0;
	const auto rep = track_sequence(zero, s.frames, opt);
	const Vector start = decompose(zero.pdm, s.frames[0].ground_truth).to_vector();
	for (const auto& f : rep.frames) {
		CHECK((f.params.to_vector() - start).cwiseAbs().maxCoeff() < 1e-12);
	}
	// Frame 0 only carries the PDM reconstruction error of its own truth.
	const Shape recon = compose(zero.pdm, decompose(zero.pdm, s.frames[0].ground_truth));
	CHECK(rep.errors[0] == doctest::Approx(normalized_error(recon, s.frames[0].ground_truth, {0, 3})).epsilon(1e-9));
}

TEST_CASE("lost frames: shape leaves the image")
{
	const auto& s = setup();
	CascadeModel push = s.ccr;
	for (auto& lv : push.levels) {
		lv.regressor.matrix.setZero();
	}
	push.levels[0].regressor.matrix(2, push.levels[0].regressor.matrix.cols() - 1) = -5000.0;
	TrackOptions opt;
	opt.incremental.mode = IncrementalMode::Iccr;
	opt.gate = UpdateGate::always();
	const auto rep = track_sequence(push, std::span(s.frames).first(4), opt);
	for (const auto& f : rep.frames) {
		CHECK(f.failure);
		CHECK(f.reconstruction_score == 1.0);
		CHECK_FALSE(f.updated);
	}
	CHECK(rep.frames[2].reinitialized);
	CHECK(rep.updates == 0);
}

TEST_CASE("merged reports")
{
	const auto& s = setup();
	const auto a = track_sequence(s.ccr, std::span(s.frames).first(10));
	const auto b = track_sequence(s.ccr, std::span(s.frames).subspan(10));
	const std::vector<EvalReport> both{a, b};
	const auto merged = merge_reports(both);
	CHECK(merged.errors.size() == s.frames.size());
	CHECK(merged.failures == a.failures + b.failures);
	std::vector<double> all = a.errors;
	all.insert(all.end(), b.errors.begin(), b.errors.end());
	CHECK(merged.auc == doctest::Approx(ced_and_auc(all).auc));
	CHECK_THROWS_AS(merge_reports(std::vector<EvalReport>{}), std::invalid_argument);
}
