/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: benchmarks/bench_updates.cpp
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
#include "iccr/incremental.hpp"
#include "iccr/regression.hpp"
#include "iccr/synth.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace iccr;

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale)
{
	std::normal_distribution<double> n(0.0, scale);
	Matrix m(rows, cols);
	for (Eigen::Index j = 0; j < cols; ++j) {
		for (Eigen::Index i = 0; i < rows; ++i) {
			m(i, j) = n(rng);
		}
	}
	return m;
}

Matrix random_spd(Rng& rng, Eigen::Index n)
{
	const Matrix g = random_matrix(rng, n, n, 1.0 / std::sqrt(static_cast<double>(n)));
	Matrix s = g * g.transpose();
	s.diagonal().array() += 1.0;
	return s;
}

// State sizes follow the tracking setup: block (d+1)×(m+1), B identity-like.
struct IccrFixture
{
	CrSolverState state;
	LinearRegressor regressor;
	Matrix b_inv;
	Matrix block;

	IccrFixture(Eigen::Index d, Eigen::Index m)
	{
		Rng rng(1);
		const auto w = m + 1;
		state.v_inv = random_spd(rng, d + 1);
		mirror_lower(state.v_inv);
		state.b = Matrix::Identity(w, w);
		state.a = random_matrix(rng, m, w, 1.0);
		state.sum_d = random_matrix(rng, d + 1, w, 1.0);
		state.ridge = 1.0;
		b_inv = Matrix::Identity(w, w);
		block = random_matrix(rng, d + 1, w, 1e-2);
	}
};

void BM_IccrUpdate(benchmark::State& st)
{
	IccrFixture f(st.range(0), 24);
	for (auto _ : st) {
		iccr_update(f.state, f.regressor, f.block, f.b_inv);
		benchmark::DoNotOptimize(f.regressor.matrix.data());
	}
	st.counters["d"] = static_cast<double>(st.range(0));
}

void BM_IsdmUpdate(benchmark::State& st)
{
	const auto d = st.range(0);
	Rng rng(2);
	IsdmLevelState s;
	s.v = random_spd(rng, d + 1);
	s.regressor = random_matrix(rng, 24, d + 1, 1.0);
	const Matrix xs = random_matrix(rng, d + 1, 10, 1e-2);
	const Matrix ys = random_matrix(rng, 24, 10, 1.0);
	for (auto _ : st) {
		isdm_update(s, xs, ys);
		benchmark::DoNotOptimize(s.regressor.data());
	}
	st.counters["d"] = static_cast<double>(d);
}

void BM_TrainContinuous(benchmark::State& st)
{
	Rng rng(3);
	const Eigen::Index m = 10;
	std::vector<Matrix> blocks;
	for (int j = 0; j < 40; ++j) {
		blocks.push_back(random_matrix(rng, st.range(0) + 1, m + 1, 1.0));
	}
	const auto ts = FunctionalTrainingSet::from_blocks(blocks);
	PerturbationStats stats;
	stats.mean = Vector::Zero(m);
	stats.covariance = random_spd(rng, m);
	for (auto _ : st) {
		benchmark::DoNotOptimize(train_continuous(ts, stats).regressor.matrix.data());
	}
}

void BM_PixelPatchExtraction(benchmark::State& st)
{
	const auto world = make_world({});
	const auto identity = make_identity(world, 5);
	const auto image = render_identity(world, identity, identity.base);
	const Image raster = rasterize(*image);
	const Shape shape = compose(world.pdm, identity.base);
	const auto ex = FeatureExtractor::pixel_patch(world.pdm.num_landmarks(), static_cast<int>(st.range(0)));
	for (auto _ : st) {
		benchmark::DoNotOptimize(ex.extract_raw(raster, shape).data());
	}
	st.counters["raw_dim"] = static_cast<double>(ex.raw_dim());
}

} // namespace

BENCHMARK(BM_IccrUpdate)->Arg(250)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IsdmUpdate)->Arg(250)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainContinuous)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PixelPatchExtraction)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
