/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: tests/acceptance/acceptance.cpp
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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "oracles.hpp"

#include "iccr/bench.hpp"
#include "iccr/incremental.hpp"
#include "iccr/pipeline.hpp"
#include "iccr/synth.hpp"
#include "iccr/tracker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

using namespace iccr;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome
{
	bool pass = false;
	std::string detail;
};

double seconds_since(Clock::time_point t)
{
	return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(const char* f, auto... args)
{
	char buf[512];
	std::snprintf(buf, sizeof buf, f, args...);
	return buf;
}

// ---------------------------------------------------------------------------
// Algebraic criteria

Outcome ac1_woodbury()
{
	const auto t0 = Clock::now();
	Rng rng(101);
	const Eigen::Index rows = 101; // d = 100 features plus the bias entry
	const Eigen::Index m = 10;
	auto blocks = oracle::random_blocks(rng, rows, m, 40);
	const auto st = oracle::random_stats(rng, m);
	auto sol = train_continuous(FunctionalTrainingSet::from_blocks(blocks), st);
	const double lambda = sol.state.ridge;
	for (int u = 0; u < 50; ++u) {
		auto ds = oracle::random_blocks(rng, rows, m, 1).front();
		iccr_update(sol.state, sol.regressor, ds);
		blocks.push_back(std::move(ds));
	}
	const auto batch = train_continuous(FunctionalTrainingSet::from_blocks(blocks, Ridge::absolute(lambda)), st);
	const double err = oracle::rel(sol.regressor.matrix, batch.regressor.matrix);
	const double secs = seconds_since(t0);
	return {err < 1e-6 && secs < 10.0, fmt("rel err %.2e (< 1e-6), %.2f s (< 10 s)", err, secs)};
}

Outcome ac2_isdm()
{
	const auto t0 = Clock::now();
	Rng rng(202);
	const Eigen::Index d = 60;
	const Eigen::Index m = 10;
	const double lambda = 0.5;
	Matrix x = oracle::random_matrix(rng, d, 100);
	Matrix y = oracle::random_matrix(rng, m, 100);
	IsdmLevelState s;
	s.v = oracle::gauss_jordan_inverse(x * x.transpose() + lambda * Matrix::Identity(d, d));
	s.regressor = y * x.transpose() * s.v;
	for (int u = 0; u < 20; ++u) {
		const Matrix xs = oracle::random_matrix(rng, d, 5);
		const Matrix ys = oracle::random_matrix(rng, m, 5);
		isdm_update(s, xs, ys);
		Matrix nx(d, x.cols() + 5);
		nx << x, xs;
		Matrix ny(m, y.cols() + 5);
		ny << y, ys;
		x = std::move(nx);
		y = std::move(ny);
	}
	const Matrix v = oracle::gauss_jordan_inverse(x * x.transpose() + lambda * Matrix::Identity(d, d));
	const double err = oracle::rel(s.regressor, y * x.transpose() * v);
	const double secs = seconds_since(t0);
	return {err < 1e-8 && secs < 5.0, fmt("rel err %.2e (< 1e-8), %.2f s (< 5 s)", err, secs)};
}

Outcome ac3_integral_oracle()
{
	const auto t0 = Clock::now();
	Rng rng(303);
	const Eigen::Index rows = 60;
	const Eigen::Index m = 8;
	const Eigen::Index blocks_n = 20;
	const auto blocks = oracle::random_blocks(rng, rows, m, blocks_n);
	const auto st = oracle::random_stats(rng, m);
	const auto sol = train_continuous(FunctionalTrainingSet::from_blocks(blocks), st);
	// K counts perturbations per block, as in sampled training (K per image).
	const std::vector<Eigen::Index> per_block{12'500, 50'000, 200'000, 800'000};
	std::vector<double> ks;
	std::vector<double> errs;
	double err_200k = 0.0;
	for (std::size_t i = 0; i < per_block.size(); ++i) {
		const Matrix mc = oracle::monte_carlo_regressor(blocks, st, per_block[i], sol.state.ridge, 1000 + i);
		const double e = oracle::rel(mc, sol.regressor.matrix);
		ks.push_back(static_cast<double>(per_block[i]));
		errs.push_back(e);
		if (per_block[i] == 200'000) {
			err_200k = e;
		}
	}
	bool decreasing = true;
	for (std::size_t i = 1; i < errs.size(); ++i) {
		decreasing = decreasing && errs[i] < errs[i - 1];
	}
	const double rate = fit_loglog_slope(ks, errs);
	const double secs = seconds_since(t0);
	const bool pass = err_200k < 2e-2 && decreasing && std::abs(rate + 0.5) <= 0.15 && secs < 60.0;
	std::ostringstream os;
	os << fmt("rel err at K=200k %.2e (< 2e-2), errors", err_200k);
	for (double e : errs) {
		os << fmt(" %.2e", e);
	}
	os << fmt(", rate %.3f (-0.5 +/- 0.15), %.1f s (< 60 s)", rate, secs);
	return {pass, os.str()};
}

Outcome ac4_legacy()
{
	Rng rng(404);
	const Eigen::Index m = 6;
	const auto ts = FunctionalTrainingSet::from_blocks(oracle::random_blocks(rng, 30, m, 12));
	Vector lambdas(m);
	Vector r(m);
	for (Eigen::Index i = 0; i < m; ++i) {
		lambdas(i) = 10.0 / static_cast<double>(i + 1);
		r(i) = 0.5 + 0.25 * static_cast<double>(i);
	}
	PerturbationStats st;
	st.mean = Vector::Zero(m);
	st.covariance = Matrix::Zero(m, m);
	for (Eigen::Index i = 0; i < m; ++i) {
		st.covariance(i, i) = r(i) * r(i) * lambdas(i) / 3.0;
	}
	const double err = oracle::rel(train_continuous(ts, st).regressor.matrix,
								   train_continuous_legacy(ts, r, lambdas).matrix);
	return {err < 1e-12, fmt("rel err %.2e (< 1e-12)", err)};
}

Outcome ac5_expanded_compact()
{
	Rng rng(505);
	double worst = 0.0;
	for (int i = 0; i < 20; ++i) {
		const Eigen::Index m = 3 + i % 6;
		const auto ts = FunctionalTrainingSet::from_blocks(oracle::random_blocks(rng, 10 + 2 * i, m, 5 + i));
		const auto st = oracle::random_stats(rng, m);
		worst = std::max(worst, oracle::rel(train_continuous_expanded(ts, st).matrix,
											train_continuous(ts, st).regressor.matrix));
	}
	return {worst < 1e-10, fmt("worst rel err over 20 instances %.2e (< 1e-10)", worst)};
}

Outcome ac6_quadratic_form()
{
	Rng rng(606);
	double worst_z = 0.0;
	const Eigen::Index n = 200'000;
	for (int i = 0; i < 10; ++i) {
		const Eigen::Index m = 3 + i % 5;
		const Matrix a = oracle::random_spd(rng, m, 30.0);
		const auto st = oracle::random_stats(rng, m, 0.5);
		const double closed = quadratic_form_expectation(a, st);
		const Matrix draws = sample_gaussian(rng, st.mean, st.covariance, n);
		double sum = 0.0;
		double sum_sq = 0.0;
		for (Eigen::Index k = 0; k < n; ++k) {
			const double q = draws.col(k).dot(a * draws.col(k));
			sum += q;
			sum_sq += q * q;
		}
		const double mean = sum / static_cast<double>(n);
		const double var = (sum_sq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1);
		const double se = std::sqrt(var / static_cast<double>(n));
		worst_z = std::max(worst_z, std::abs(mean - closed) / se);
	}
	return {worst_z < 3.0, fmt("worst deviation %.2f standard errors (< 3)", worst_z)};
}

Outcome ac7_complexity()
{
	const auto t0 = Clock::now();
	const BenchConfig cfg; // d ∈ {250, 500, 1000, 2000}, m = 24, K = 10, L = 3
	const auto rep = bench_updates(cfg);
	const double secs = seconds_since(t0);
	const double gap = rep.slope_isdm - rep.slope_iccr;
	int flagged = 0;
	for (const auto& p : rep.points) {
		flagged += p.resolution_flag ? 1 : 0;
	}
	const bool pass = gap >= 0.6 && rep.update_ratio >= 5.0 && secs < 900.0;
	return {pass, fmt("slopes isdm %.3f iccr %.3f, gap %.3f (>= 0.6); per-frame update ratio at d=2000 %.2f (>= 5), "
					  "whole-frame ratio %.2f; %d flagged points; %.0f s (< 900 s)",
					  rep.slope_isdm, rep.slope_iccr, gap, rep.update_ratio, rep.total_ratio, flagged, secs)};
}

Outcome ac12_jacobian()
{
	const auto world = make_world({12, 4, 128, 128, 3});
	ShapeParams p = ShapeParams::identity(4);
	p.rigid.scale = 1.05;
	p.rigid.rotation = 0.1;
	p.rigid.tx = 63.0;
	p.rigid.ty = 61.0;
	p.flexible << 2.0, -1.0, 0.5, 0.3;

	// Affine analytic extractor: the closed form is Σ_terms (bx, by)·∂(x, y)/∂p.
	const auto map = AnalyticMap::random_affine(12, 4, 2);
	const auto ex = FeatureExtractor::analytic(map);
	const auto pca = FeaturePca::identity(ex.raw_dim());
	const Image canvas(8, 8, 0.0);
	const Matrix sj = shape_jacobian(world.pdm, p);
	Matrix closed = Matrix::Zero(ex.raw_dim() + 1, world.pdm.num_params());
	Eigen::Index row = 0;
	for (std::size_t l = 0; l < map.landmarks.size(); ++l) {
		for (const auto& t : map.landmarks[l]) {
			const auto li = static_cast<Eigen::Index>(l);
			closed.row(row++) = t.bx * sj.row(2 * li) + t.by * sj.row(2 * li + 1);
		}
	}
	const Matrix empirical = jacobian(ex, pca, canvas, world.pdm, p).matrix;
	const double abs_err = (empirical - closed).cwiseAbs().maxCoeff();

	// Convergence order of central differences on a rendered blob image.
	const auto id = make_identity(world, 4);
	const auto img = render_identity(world, id, p);
	const auto patch = FeatureExtractor::pixel_patch(12, 3);
	const auto ipca = FeaturePca::identity(patch.raw_dim());
	const Matrix j1 = jacobian(patch, ipca, *img, world.pdm, p, 1.0).matrix;
	const Matrix j2 = jacobian(patch, ipca, *img, world.pdm, p, 0.5).matrix;
	const Matrix j4 = jacobian(patch, ipca, *img, world.pdm, p, 0.25).matrix;
	const double order = std::log2((j1 - j2).norm() / (j2 - j4).norm());
	return {abs_err < 1e-6 && order >= 1.8, fmt("max abs err %.2e (< 1e-6), order %.2f (>= 1.8)", abs_err, order)};
}

// ---------------------------------------------------------------------------
// Tracking criteria, sharing trained models

struct Trained
{
	SyntheticDataset data;
	CascadeModel ccr;
	CascadeModel sdm;
};

Trained train_world(double burst_probability)
{
	DatasetOptions opt;
	opt.train_identities = 16;
	opt.test_sequences = 10;
	opt.test_length = 100;
	opt.motion.burst_probability = burst_probability;
	Trained t;
	t.data = make_dataset(opt);
	const auto seqs = annotated(t.data.train);
	TrainingConfig cfg;
	cfg.feature_dim = 100;
	cfg.frame_stride = 4;
	cfg.cascade.seed = 3;
	cfg.method = Method::Ccr;
	t.ccr = train_from_sequences(seqs, cfg).model;
	cfg.method = Method::Sdm;
	t.sdm = train_from_sequences(seqs, cfg).model;
	return t;
}

const Trained& calm()
{
	static const Trained t = train_world(0.0);
	return t;
}

const Trained& bursty()
{
	static const Trained t = train_world(0.05);
	return t;
}

std::vector<TrackFrame> frames_of(const SyntheticSequence& seq)
{
	std::vector<TrackFrame> out;
	for (const auto& f : seq.frames) {
		out.push_back({f.image, f.shape});
	}
	return out;
}

double mean_auc(const CascadeModel& model, const std::vector<SyntheticSequence>& seqs, const TrackOptions& opt)
{
	double sum = 0.0;
	for (const auto& s : seqs) {
		sum += track_sequence(model, frames_of(s), opt).auc;
	}
	return sum / static_cast<double>(seqs.size());
}

TrackOptions with_updates(IncrementalMode mode, UpdateGate gate)
{
	TrackOptions o;
	o.incremental.mode = mode;
	o.gate = std::move(gate);
	return o;
}

Outcome ac8_accounting()
{
	const auto& t = calm();
	const auto frames = frames_of(t.data.test[0]);
	const auto ic = track_sequence(t.ccr, frames, with_updates(IncrementalMode::Iccr, UpdateGate::always()));
	const auto is = track_sequence(t.sdm, frames, with_updates(IncrementalMode::Isdm, UpdateGate::always()));
	const auto lk = static_cast<std::uint64_t>(t.sdm.num_levels()) * IncrementalOptions{}.isdm_samples;
	bool ok = ic.updates > 0 && is.updates > 0;
	std::uint64_t iccr_seen = 0;
	std::uint64_t isdm_seen = 0;
	for (const auto& f : ic.frames) {
		if (f.updated) {
			ok = ok && f.update_extractions == 3;
			iccr_seen = f.update_extractions;
		}
	}
	for (const auto& f : is.frames) {
		if (f.updated) {
			ok = ok && f.update_extractions == lk;
			isdm_seen = f.update_extractions;
		}
	}
	return {ok, fmt("iCCR %llu per frame over %d updates (== 3), iSDM %llu per frame over %d updates (== L*K = %llu)",
					static_cast<unsigned long long>(iccr_seen), ic.updates, static_cast<unsigned long long>(isdm_seen),
					is.updates, static_cast<unsigned long long>(lk))};
}

Outcome ac9_parity()
{
	const auto& t = calm();
	const double ccr = mean_auc(t.ccr, t.data.test, {});
	const double sdm = mean_auc(t.sdm, t.data.test, {});
	return {std::abs(ccr - sdm) <= 0.05, fmt("mean AUC CCR %.4f SDM %.4f, |diff| %.4f (<= 0.05)", ccr, sdm,
											 std::abs(ccr - sdm))};
}

Outcome ac10_incremental()
{
	const auto& t = calm();
	const double ccr = mean_auc(t.ccr, t.data.test, {});
	const double iccr = mean_auc(t.ccr, t.data.test, with_updates(IncrementalMode::Iccr, UpdateGate::threshold(0.1)));
	const auto& b = bursty();
	const double gated = mean_auc(b.ccr, b.data.test, with_updates(IncrementalMode::Iccr, UpdateGate::threshold(0.1)));
	const double ungated = mean_auc(b.ccr, b.data.test, with_updates(IncrementalMode::Iccr, UpdateGate::always()));
	return {iccr >= ccr && gated > ungated,
			fmt("mean AUC iCCR %.4f >= CCR %.4f; bursts: gated %.4f > ungated %.4f", iccr, ccr, gated, ungated)};
}

Outcome ac11_protocol()
{
	const auto& t = calm();
	int mismatches = 0;
	int failures = 0;
	int reinits = 0;
	int start_errors = 0;
	int identical = 1;
	for (const auto& seq : t.data.test) {
		const auto frames = frames_of(seq);
		const auto rep = track_sequence(t.ccr, frames, {});
		for (std::size_t i = 0; i < rep.frames.size(); ++i) {
			const auto& f = rep.frames[i];
			mismatches += f.failure != (f.error > 0.1) ? 1 : 0;
			failures += f.failure ? 1 : 0;
			if (i + 1 < rep.frames.size()) {
				mismatches += rep.frames[i + 1].reinitialized != f.failure ? 1 : 0;
			}
			if (f.reinitialized) {
				++reinits;
				const auto expected = fit(t.ccr, *frames[i].image, decompose(t.ccr.pdm, frames[i - 1].ground_truth));
				start_errors += expected.to_vector() == f.params.to_vector() ? 0 : 1;
			}
		}
		const auto never = track_sequence(t.ccr, frames, with_updates(IncrementalMode::Iccr, UpdateGate::never()));
		for (std::size_t i = 0; i < rep.frames.size(); ++i) {
			if (never.errors[i] != rep.errors[i] ||
				never.frames[i].params.to_vector() != rep.frames[i].params.to_vector()) {
				identical = 0;
			}
		}
	}
	return {mismatches == 0 && start_errors == 0 && identical == 1,
			fmt("%d failures, %d re-inits, %d rule mismatches, %d wrong restarts; gate=never bit-identical: %s",
				failures, reinits, mismatches, start_errors, identical ? "yes" : "no")};
}

} // namespace

int main(int argc, char** argv)
{
	// Optional arguments select criteria by prefix, e.g. `iccr_acceptance AC3 AC7`.
	std::vector<std::string> only(argv + 1, argv + argc);
	const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
		{"AC1 Woodbury correctness", ac1_woodbury},
		{"AC2 incremental SDM correctness", ac2_isdm},
		{"AC3 continuous-regression integral oracle", ac3_integral_oracle},
		{"AC4 uniform-box reduction", ac4_legacy},
		{"AC5 expanded and compact forms agree", ac5_expanded_compact},
		{"AC6 quadratic-form expectation", ac6_quadratic_form},
		{"AC7 complexity separation", ac7_complexity},
		{"AC8 feature-extraction accounting", ac8_accounting},
		{"AC9 method parity", ac9_parity},
		{"AC10 incremental benefit", ac10_incremental},
		{"AC11 protocol exactness", ac11_protocol},
		{"AC12 Jacobian validity", ac12_jacobian},
	};
	int failed = 0;
	std::size_t ran = 0;
	for (const auto& [name, run] : criteria) {
		if (!only.empty() && std::none_of(only.begin(), only.end(), [&](const std::string& o) {
				return name.rfind(o + " ", 0) == 0;
			})) {
			continue;
		}
		++ran;
		const auto t0 = Clock::now();
		Outcome o;
		try {
			o = run();
		} catch (const std::exception& e) {
			o = {false, std::string("exception: ") + e.what()};
		}
		std::printf("[%s] %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
					seconds_since(t0));
		std::fflush(stdout);
		failed += o.pass ? 0 : 1;
	}
	std::printf("%d/%zu criteria passed\n", static_cast<int>(ran) - failed, ran);
	return failed == 0 ? 0 : 1;
}
