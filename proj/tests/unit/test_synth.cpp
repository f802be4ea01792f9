/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: tests/unit/test_synth.cpp
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

#include "iccr/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace iccr;

namespace {

std::vector<Vector> param_vectors(const SyntheticSequence& seq)
{
	std::vector<Vector> out;
	for (const auto& f : seq.frames) {
		out.push_back(f.params.to_vector());
	}
	return out;
}

bool inside_any(const std::vector<SyntheticImage::PlacedBlob>& blobs, double x, double y)
{
	for (const auto& b : blobs) {
		if ((x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy) < b.radius * b.radius) {
			return true;
		}
	}
	return false;
}

} // namespace

TEST_CASE("face template and world")
{
	const Shape t = face_template();
	CHECK(t.size() == 12);
	CHECK(t.points().colwise().mean().norm() < 1e-12);
	CHECK((t.point(kLeftEyeOuter) - t.point(kRightEyeOuter)).norm() > 0.1);
	const Shape dense = face_template(49);
	CHECK(dense.size() == 49);
	// Densification only re-centres the template points.
	CHECK(((dense.point(0) - dense.point(3)) - (t.point(0) - t.point(3))).norm() < 1e-12);

	const auto world = make_world({12, 5, 160, 120, 4});
	CHECK_NOTHROW(world.pdm.validate());
	CHECK(world.pdm.num_modes() == 5);
	CHECK(world.width == 160);
	CHECK(world.height == 120);
	// Modes are orthogonal to the similarity tangent space of the mean.
	CHECK((similarity_basis(world.pdm.mean_shape).transpose() * world.pdm.basis).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rendering: determinism, translation and bounds")
{
	const auto world = make_world();
	const auto id = make_identity(world, 11);
	const auto again = make_identity(world, 11);
	REQUIRE(id.blobs.size() == again.blobs.size());
	for (std::size_t i = 0; i < id.blobs.size(); ++i) {
		CHECK(id.blobs[i].offset == again.blobs[i].offset);
		CHECK(id.blobs[i].radius == again.blobs[i].radius);
	}
	const auto other = make_identity(world, 12);
	CHECK(other.blobs.front().offset != id.blobs.front().offset);

	const auto a = render_identity(world, id, id.base);
	const auto b = render_identity(world, id, id.base);
	ShapeParams moved = id.base;
	moved.rigid.tx += 5.0;
	const auto c = render_identity(world, id, moved);
	REQUIRE(c->blobs().size() == a->blobs().size());
	for (std::size_t i = 0; i < a->blobs().size(); ++i) {
		CHECK(c->blobs()[i].cx == doctest::Approx(a->blobs()[i].cx + 5.0).epsilon(1e-12));
		CHECK(c->blobs()[i].cy == doctest::Approx(a->blobs()[i].cy).epsilon(1e-12));
		CHECK(c->blobs()[i].radius == doctest::Approx(a->blobs()[i].radius).epsilon(1e-12));
	}
	double lo = 1.0;
	double hi = 0.0;
	for (int y = 0; y < world.height; y += 2) {
		for (int x = 0; x < world.width; x += 2) {
			CHECK(a->intensity(x, y) == b->intensity(x, y));
			lo = std::min(lo, a->intensity(x, y));
			hi = std::max(hi, a->intensity(x, y));
			if (x >= 20 && x + 20 < world.width) {
				// Background is shifted along with the blobs only away from the clamped border.
				CHECK(c->intensity(x + 5.0, y) == doctest::Approx(a->intensity(x, y)).epsilon(0.05));
			}
		}
	}
	CHECK(lo >= 0.0);
	CHECK(hi <= 1.0);
	CHECK(hi - lo > 0.3);

	// Heavily overlapping bright blobs on the brightest identity background still saturate below 1.
	const SyntheticImage dense(32, 32, 0.15, 0.05, 0.05,
							   std::vector<SyntheticImage::PlacedBlob>(50, SyntheticImage::PlacedBlob{16, 16, 10, 5}));
	CHECK(dense.intensity(16, 16) <= 1.0);
	CHECK(dense.intensity(-100, 400) >= 0.0);
}

TEST_CASE("rendering locality: a single-landmark mode only changes that landmark's blob supports")
{
	auto world = make_world();
	// Replace mode 0 with one that moves landmark 2 along x only.
	world.pdm.basis.col(0).setZero();
	world.pdm.basis(4, 0) = 1.0;
	const auto id = make_identity(world, 3);
	ShapeParams p = id.base;
	const auto before = render_identity(world, id, p);
	p.flexible(0) += 0.4;
	const auto after = render_identity(world, id, p);

	std::vector<SyntheticImage::PlacedBlob> support;
	for (std::size_t i = 0; i < id.blobs.size(); ++i) {
		const bool own = id.blobs[i].landmark == 2;
		const auto& b0 = before->blobs()[i];
		const auto& b1 = after->blobs()[i];
		if (own) {
			support.push_back(b0);
			support.push_back(b1);
		} else {
			CHECK(b0.cx == b1.cx);
			CHECK(b0.cy == b1.cy);
		}
	}
	REQUIRE_FALSE(support.empty());
	int changed = 0;
	int outside = 0;
	for (int y = 0; y < world.height; ++y) {
		for (int x = 0; x < world.width; ++x) {
			if (before->intensity(x, y) != after->intensity(x, y)) {
				++changed;
				outside += inside_any(support, x, y) ? 0 : 1;
			}
		}
	}
	CHECK(changed > 0);
	CHECK(outside == 0);
}

TEST_CASE("sequences: determinism, frame margin and bursts")
{
	const auto world = make_world();
	const auto id = make_identity(world, 2);
	MotionModel motion;
	const auto s1 = generate_sequence(world, id, 50, motion, 4);
	const auto s2 = generate_sequence(world, id, 50, motion, 4);
	const auto s3 = generate_sequence(world, id, 50, motion, 5);
	for (std::size_t t = 0; t < s1.frames.size(); ++t) {
		CHECK(s1.frames[t].params.to_vector() == s2.frames[t].params.to_vector());
	}
	CHECK(s1.frames[10].params.to_vector() != s3.frames[10].params.to_vector());
	CHECK_THROWS_AS(generate_sequence(world, id, 1, motion, 0), std::invalid_argument);

	motion.burst_probability = 0.2;
	for (std::uint64_t seed = 0; seed < 5; ++seed) {
		const auto seq = generate_sequence(world, id, 120, motion, seed);
		for (const auto& f : seq.frames) {
			const auto pts = f.shape.points();
			CHECK(pts.minCoeff() >= motion.margin - 1e-9);
			CHECK(pts.col(0).maxCoeff() <= world.width - 1.0 - motion.margin + 1e-9);
			CHECK(pts.col(1).maxCoeff() <= world.height - 1.0 - motion.margin + 1e-9);
		}
	}
}

TEST_CASE("burst innovations are scaled by the burst factor")
{
	// A large frame keeps the margin projection inactive so innovations are exact.
	const auto world = make_world({12, 6, 1024, 1024, 9});
	MotionModel motion;
	motion.burst_probability = 0.1;
	motion.burst_factor = 8.0;
	const Vector sigma = motion_sigma(motion, world.pdm);
	double burst_sq = 0.0;
	double calm_sq = 0.0;
	int burst_n = 0;
	int calm_n = 0;
	for (std::uint64_t s = 0; s < 10; ++s) {
		const auto id = make_identity(world, 100 + s);
		const auto seq = generate_sequence(world, id, 200, motion, s);
		const Vector base = id.base.to_vector();
		for (std::size_t t = 1; t < seq.frames.size(); ++t) {
			const Vector prev = seq.frames[t - 1].params.to_vector() - base;
			const Vector cur = seq.frames[t].params.to_vector() - base;
			const Vector innov = (cur - motion.rho * prev).cwiseQuotient(sigma);
			if (seq.frames[t].burst) {
				burst_sq += innov.squaredNorm();
				burst_n += static_cast<int>(innov.size());
			} else {
				calm_sq += innov.squaredNorm();
				calm_n += static_cast<int>(innov.size());
			}
		}
	}
	REQUIRE(burst_n > 500);
	const double ratio = std::sqrt(burst_sq / burst_n) / std::sqrt(calm_sq / calm_n);
	CHECK(ratio == doctest::Approx(8.0).epsilon(0.1));
	CHECK(std::sqrt(calm_sq / calm_n) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("AR(1) statistics recover the stationary increment covariance")
{
	const auto world = make_world({12, 6, 1024, 1024, 9});
	MotionModel motion;
	const Vector sigma = motion_sigma(motion, world.pdm);
	std::vector<std::vector<Vector>> seqs;
	for (std::uint64_t s = 0; s < 20; ++s) {
		seqs.push_back(param_vectors(generate_sequence(world, make_identity(world, s), 501, motion, s)));
	}
	for (const int gap : {1, 3}) {
		const std::vector<int> gaps{gap};
		const auto st = estimate_stats(seqs, gaps);
		CHECK(st.pair_count == 20 * (501 - gap));
		for (Eigen::Index i = 0; i < sigma.size(); ++i) {
			const double expected = ar1_increment_variance(motion.rho, sigma(i), gap);
			INFO("gap " << gap << " param " << i);
			CHECK(std::abs(st.stats.covariance(i, i) / expected - 1.0) < 0.1);
			CHECK(std::abs(st.stats.mean(i)) < 0.1 * std::sqrt(expected));
			for (Eigen::Index j = 0; j < i; ++j) {
				const double corr = st.stats.covariance(i, j) /
									std::sqrt(st.stats.covariance(i, i) * st.stats.covariance(j, j));
				CHECK(std::abs(corr) < 0.1);
			}
		}
	}
	// Closed form: Var(x_t − x_{t+g}) = 2σ²(1 − ρ^g)/(1 − ρ²)
	CHECK(ar1_increment_variance(0.5, 2.0, 1) == doctest::Approx(2.0 * 4.0 * 0.5 / 0.75));
	CHECK(ar1_increment_variance(0.0, 1.0, 4) == doctest::Approx(2.0));
}

TEST_CASE("estimate_stats: static, gaps, shift invariance, errors")
{
	const auto world = make_world();
	std::vector<std::vector<Vector>> seqs;
	for (std::uint64_t s = 0; s < 4; ++s) {
		seqs.push_back(param_vectors(generate_sequence(world, make_identity(world, s), 40, {}, s)));
	}
	const std::vector<int> one{1};
	const std::vector<int> many{1, 2, 3, 5};
	const auto s1 = estimate_stats(seqs, one);
	const auto s4 = estimate_stats(seqs, many);
	CHECK(s4.stats.covariance.trace() > s1.stats.covariance.trace());
	CHECK(s4.gaps == many);
	CHECK(is_psd(s4.stats.covariance));

	auto shifted = seqs;
	for (auto& seq : shifted) {
		for (auto& p : seq) {
			p(2) += 37.5;
			p(3) -= 12.25;
		}
	}
	const auto sh = estimate_stats(shifted, many);
	CHECK((sh.stats.mean - s4.stats.mean).cwiseAbs().maxCoeff() < 1e-10);
	CHECK((sh.stats.covariance - s4.stats.covariance).cwiseAbs().maxCoeff() < 1e-10);

	std::vector<std::vector<Vector>> still(2, std::vector<Vector>(10, seqs[0][0]));
	const auto zero = estimate_stats(still, many);
	CHECK(zero.stats.mean.cwiseAbs().maxCoeff() == 0.0);
	CHECK(zero.stats.covariance.cwiseAbs().maxCoeff() == 0.0);

	std::vector<std::vector<Vector>> tiny{{seqs[0][0], seqs[0][1]}};
	CHECK_THROWS_AS(estimate_stats(tiny, one), Error);
	std::vector<std::vector<Vector>> single{{seqs[0][0]}};
	CHECK_THROWS_AS(estimate_stats(single, one), std::invalid_argument);
	const std::vector<int> bad{0};
	CHECK_THROWS_AS(estimate_stats(seqs, bad), std::invalid_argument);

	// Through the shape path with the generating model the statistics agree.
	std::vector<std::vector<Shape>> shapes;
	for (std::uint64_t s = 0; s < 4; ++s) {
		shapes.push_back(sequence_shapes(std::vector<SyntheticSequence>{
			generate_sequence(world, make_identity(world, s), 40, {}, s)})[0]);
	}
	const auto via = estimate_stats_from_shapes(world.pdm, shapes, many);
	CHECK(oracle::rel(via.stats.covariance, s4.stats.covariance) < 1e-8);
}

TEST_CASE("datasets")
{
	DatasetOptions opt;
	opt.train_identities = 3;
	opt.train_length = 9;
	opt.test_sequences = 2;
	opt.test_length = 7;
	const auto ds = make_dataset(opt);
	REQUIRE(ds.train.size() == 3);
	REQUIRE(ds.test.size() == 2);
	CHECK(ds.train[0].frames.size() == 9);
	CHECK(ds.test[1].frames.size() == 7);
	CHECK(ds.train[0].frames[0].params.to_vector() != ds.test[0].frames[0].params.to_vector());
	const auto again = make_dataset(opt);
	CHECK(again.test[1].frames[6].params.to_vector() == ds.test[1].frames[6].params.to_vector());

	const auto imgs = training_images(ds.train, ds.world.pdm, 4);
	CHECK(imgs.size() == 3 * 3); // frames 0, 4, 8
	const Vector gt = imgs[1].ground_truth.to_vector();
	CHECK((gt - ds.train[0].frames[4].params.to_vector()).cwiseAbs().maxCoeff() < 1e-9);
	CHECK(sequence_shapes(ds.test)[1].size() == 7);
	opt.train_identities = 0;
	CHECK_THROWS_AS(make_dataset(opt), std::invalid_argument);
}
