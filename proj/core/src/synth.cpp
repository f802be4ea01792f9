/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/src/synth.cpp
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
#include "iccr/synth.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>

namespace iccr {

namespace {

// Brows, eyes, nose, mouth, chin; y grows downwards.
constexpr std::array<std::array<double, 2>, 12> kTemplate{{
	{-24.0, -12.0}, // outer left eye
	{-10.0, -12.0},
	{10.0, -12.0},
	{24.0, -12.0}, // outer right eye
	{-18.0, -25.0},
	{18.0, -25.0},
	{0.0, 4.0},
	{-7.0, 10.0},
	{-15.0, 22.0},
	{0.0, 18.0},
	{15.0, 22.0},
	{0.0, 36.0},
}};

} // namespace

Shape face_template(Eigen::Index n)
{
	if (n < 4) {
		throw std::invalid_argument("face_template: at least 4 landmarks required");
	}
	Shape::Points pts(n, 2);
	for (Eigen::Index i = 0; i < n; ++i) {
		if (i < 12) {
			pts(i, 0) = kTemplate[static_cast<std::size_t>(i)][0];
			pts(i, 1) = kTemplate[static_cast<std::size_t>(i)][1];
			continue;
		}
		// Extra points interpolate between template pairs, one ring of 12 at a time.
		const Eigen::Index idx = i - 12;
		const Eigen::Index ring = idx / 12;
		const auto a = static_cast<std::size_t>(idx % 12);
		const auto b = (a + 5 + static_cast<std::size_t>(ring)) % 12;
		const double t = 0.5 / (1.0 + 0.37 * static_cast<double>(ring));
		pts(i, 0) = (1.0 - t) * kTemplate[a][0] + t * kTemplate[b][0] + 0.9 * static_cast<double>(ring % 3);
		pts(i, 1) = (1.0 - t) * kTemplate[a][1] + t * kTemplate[b][1] - 0.7 * static_cast<double>(ring % 2);
	}
	const Eigen::RowVector2d c = pts.colwise().mean();
	pts.rowwise() -= c;
	return Shape(pts);
}

SynthWorld make_world(const WorldOptions& options)
{
	const Shape tmpl = face_template(options.num_landmarks);
	const Eigen::Index n = tmpl.size();
	const Eigen::Index k = options.num_modes;
	if (k < 1 || k > 2 * n - kRigidDims) {
		throw std::invalid_argument("make_world: mode count must be in [1, 2n-4]");
	}
	Rng rng(mix_seed(options.seed, 0));
	Matrix g(2 * n, k);
	for (Eigen::Index c = 0; c < k; ++c) {
		g.col(c) = standard_normal(rng, 2 * n);
	}
	const Matrix sim = similarity_basis(tmpl);
	g -= sim * (sim.transpose() * g);
	Eigen::HouseholderQR<Matrix> qr(g);
	Matrix basis = qr.householderQ() * Matrix::Identity(2 * n, k);
	for (Eigen::Index c = 0; c < k; ++c) {
		Eigen::Index idx = 0;
		basis.col(c).cwiseAbs().maxCoeff(&idx);
		if (basis(idx, c) < 0.0) {
			basis.col(c) *= -1.0;
		}
	}
	// Coefficient spreads keep per-coordinate motion in pixels independent of n.
	Vector eig(k);
	const double scale = 12.0 * std::sqrt(static_cast<double>(n) / 12.0);
	for (Eigen::Index i = 0; i < k; ++i) {
		const double sd = scale * std::pow(0.75, static_cast<double>(i));
		eig(i) = sd * sd;
	}
	SynthWorld world;
	world.pdm.mean_shape = tmpl;
	world.pdm.basis = std::move(basis);
	world.pdm.eigenvalues = std::move(eig);
	world.pdm.validate();
	world.width = options.width;
	world.height = options.height;
	world.seed = options.seed;
	return world;
}

SyntheticIdentity make_identity(const SynthWorld& world, std::uint64_t seed, const IdentityOptions& options)
{
	Rng rng(mix_seed(world.seed, 1000003 + seed));
	Rng shared_rng(mix_seed(world.seed, 999983));
	std::normal_distribution<double> normal(0.0, 1.0);
	std::uniform_real_distribution<double> uniform(0.0, 1.0);
	auto draw_blob = [&](Rng& r, Eigen::Index l, int b) {
		Blob blob;
		blob.landmark = l;
		const double spread = options.offset_sigma * (1.0 + b);
		blob.offset = {spread * normal(r), spread * normal(r)};
		blob.radius = options.radius_min + (options.radius_max - options.radius_min) * uniform(r);
		blob.amplitude = options.amplitude_min + (options.amplitude_max - options.amplitude_min) * uniform(r);
		return blob;
	};
	const double v = std::clamp(options.appearance_variation, 0.0, 1.0);
	SyntheticIdentity id;
	id.seed = seed;
	const Eigen::Index n = world.pdm.num_landmarks();
	for (Eigen::Index l = 0; l < n; ++l) {
		for (int b = 0; b < options.blobs_per_landmark; ++b) {
			const Blob shared = draw_blob(shared_rng, l, b);
			const Blob own = draw_blob(rng, l, b);
			Blob blob = shared;
			blob.offset = (1.0 - v) * shared.offset + v * own.offset;
			blob.radius = (1.0 - v) * shared.radius + v * own.radius;
			blob.amplitude = (1.0 - v) * shared.amplitude + v * own.amplitude;
			id.blobs.push_back(blob);
		}
	}
	id.background = 0.15;
	id.background_gx = 0.1 * (uniform(rng) - 0.5);
	id.background_gy = 0.1 * (uniform(rng) - 0.5);
	const Eigen::Index k = world.pdm.num_modes();
	id.base.flexible.resize(k);
	for (Eigen::Index i = 0; i < k; ++i) {
		id.base.flexible(i) = options.shape_spread * std::sqrt(world.pdm.eigenvalues(i)) * normal(rng);
	}
	id.base.rigid.scale = 0.92 + 0.16 * uniform(rng);
	id.base.rigid.rotation = 0.05 * normal(rng);
	id.base.rigid.tx = 0.5 * (world.width - 1) + 3.0 * normal(rng);
	id.base.rigid.ty = 0.5 * (world.height - 1) + 3.0 * normal(rng);
	return id;
}

SyntheticImage::SyntheticImage(int width, int height, double background, double gx, double gy,
							   std::vector<PlacedBlob> blobs)
	: width_(width), height_(height), background_(background), gx_(gx), gy_(gy), blobs_(std::move(blobs))
{
	if (width <= 0 || height <= 0) {
		throw std::invalid_argument("SyntheticImage: dimensions must be positive");
	}
	for (const auto& b : blobs_) {
		if (!(b.radius > 0.0) || b.amplitude < 0.0) {
			throw std::invalid_argument("SyntheticImage: blobs need positive radius and non-negative amplitude");
		}
	}
}

double SyntheticImage::intensity(double x, double y) const
{
	x = std::clamp(x, 0.0, width_ - 1.0);
	y = std::clamp(y, 0.0, height_ - 1.0);
	const double bg = background_ + gx_ * (x / (width_ - 1.0) - 0.5) + gy_ * (y / (height_ - 1.0) - 0.5);
	double sum = 0.0;
	for (const auto& b : blobs_) {
		const double dx = x - b.cx;
		const double dy = y - b.cy;
		const double q = (dx * dx + dy * dy) / (b.radius * b.radius);
		if (q < 1.0) {
			const double u = 1.0 - q;
			const double u2 = u * u;
			sum += b.amplitude * u2 * u2;
		}
	}
	return bg + 0.8 * (1.0 - std::exp(-sum));
}

std::shared_ptr<SyntheticImage> render_identity(const SynthWorld& world, const SyntheticIdentity& identity,
												const ShapeParams& params)
{
	const Shape shape = compose(world.pdm, params);
	const double s = params.rigid.scale;
	const double c = std::cos(params.rigid.rotation);
	const double sn = std::sin(params.rigid.rotation);
	std::vector<SyntheticImage::PlacedBlob> placed;
	placed.reserve(identity.blobs.size());
	for (const auto& blob : identity.blobs) {
		if (blob.landmark < 0 || blob.landmark >= shape.size()) {
			throw std::invalid_argument("render_identity: blob landmark out of range");
		}
		const auto p = shape.point(blob.landmark);
		const double ox = s * (c * blob.offset.x() - sn * blob.offset.y());
		const double oy = s * (sn * blob.offset.x() + c * blob.offset.y());
		placed.push_back({p.x() + ox, p.y() + oy, s * blob.radius, blob.amplitude});
	}
	return std::make_shared<SyntheticImage>(world.width, world.height, identity.background, identity.background_gx,
											identity.background_gy, std::move(placed));
}

Vector motion_sigma(const MotionModel& motion, const PdmModel& model)
{
	Vector sigma(model.num_params());
	sigma(0) = motion.linear_noise;
	sigma(1) = motion.linear_noise;
	sigma(2) = motion.translation_noise;
	sigma(3) = motion.translation_noise;
	sigma.tail(model.num_modes()) = motion.flexible_noise * model.eigenvalues.cwiseSqrt();
	return sigma;
}

namespace {

// Shrinks shapes wider than the frame about their translation, then shifts the
// translation so every landmark sits at least `margin` inside the frame.
void keep_in_frame(const SynthWorld& world, Vector& p, double margin)
{
	Shape s = compose(world.pdm, ShapeParams::from_vector(p));
	Eigen::RowVector2d lo = s.points().colwise().minCoeff();
	Eigen::RowVector2d hi = s.points().colwise().maxCoeff();
	const double limits[2] = {world.width - 1.0 - margin, world.height - 1.0 - margin};
	double fit = 1.0;
	for (int axis = 0; axis < 2; ++axis) {
		const double room = limits[axis] - margin;
		// The shape spans hi − lo about t; keep 2% slack for the shift below.
		fit = std::min(fit, 0.98 * room / std::max(hi(axis) - lo(axis), 1e-12));
	}
	if (fit < 1.0) {
		p(0) = fit * (1.0 + p(0)) - 1.0;
		p(1) *= fit;
		s = compose(world.pdm, ShapeParams::from_vector(p));
		lo = s.points().colwise().minCoeff();
		hi = s.points().colwise().maxCoeff();
	}
	for (int axis = 0; axis < 2; ++axis) {
		double shift = 0.0;
		if (lo(axis) < margin) {
			shift = margin - lo(axis);
		} else if (hi(axis) > limits[axis]) {
			shift = limits[axis] - hi(axis);
		}
		p(2 + axis) += shift;
	}
}

} // namespace

SyntheticSequence generate_sequence(const SynthWorld& world, const SyntheticIdentity& identity, int length,
									const MotionModel& motion, std::uint64_t seed)
{
	if (length < 2) {
		throw std::invalid_argument("generate_sequence: length must be at least 2");
	}
	if (!(motion.rho >= 0.0 && motion.rho < 1.0)) {
		throw std::invalid_argument("generate_sequence: rho must lie in [0, 1)");
	}
	Rng rng(mix_seed(world.seed ^ 0x5EC0ULL, seed * 7919 + identity.seed));
	std::uniform_real_distribution<double> uniform(0.0, 1.0);
	const Vector base = identity.base.to_vector();
	const Vector sigma = motion_sigma(motion, world.pdm);
	const double stationary = 1.0 / std::sqrt(1.0 - motion.rho * motion.rho);

	SyntheticSequence seq;
	seq.motion = motion;
	seq.seed = seed;
	seq.frames.reserve(static_cast<std::size_t>(length));
	Vector p = base + stationary * sigma.cwiseProduct(standard_normal(rng, base.size()));
	keep_in_frame(world, p, motion.margin);
	int burst_left = 0;
	for (int t = 0; t < length; ++t) {
		bool burst = false;
		if (t > 0) {
			if (burst_left == 0 && motion.burst_probability > 0.0 && uniform(rng) < motion.burst_probability) {
				burst_left = motion.burst_length;
			}
			burst = burst_left > 0;
			const double factor = burst ? motion.burst_factor : 1.0;
			if (burst_left > 0) {
				--burst_left;
			}
			const Vector eps = standard_normal(rng, base.size());
			p = base + motion.rho * (p - base) + factor * sigma.cwiseProduct(eps);
			keep_in_frame(world, p, motion.margin);
		}
		SyntheticFrame f;
		f.params = ShapeParams::from_vector(p);
		f.shape = compose(world.pdm, f.params);
		f.image = render_identity(world, identity, f.params);
		f.burst = burst;
		seq.frames.push_back(std::move(f));
	}
	return seq;
}

SequenceStats estimate_stats(std::span<const std::vector<Vector>> sequences, std::span<const int> gaps)
{
	if (sequences.empty() || gaps.empty()) {
		throw std::invalid_argument("estimate_stats: need at least one sequence and one gap");
	}
	const Eigen::Index m = sequences.front().empty() ? 0 : sequences.front().front().size();
	for (const auto& seq : sequences) {
		if (seq.size() < 2) {
			throw std::invalid_argument("estimate_stats: every sequence needs at least 2 frames");
		}
		for (const auto& p : seq) {
			if (p.size() != m) {
				throw std::invalid_argument("estimate_stats: inconsistent parameter dimensions");
			}
		}
	}
	for (int g : gaps) {
		if (g < 1) {
			throw std::invalid_argument("estimate_stats: gaps must be positive");
		}
	}
	Vector sum = Vector::Zero(m);
	Eigen::Index count = 0;
	for (const auto& seq : sequences) {
		for (int g : gaps) {
			for (std::size_t t = 0; t + static_cast<std::size_t>(g) < seq.size(); ++t) {
				sum += seq[t] - seq[t + static_cast<std::size_t>(g)];
				++count;
			}
		}
	}
	if (count < m + 1) {
		throw Error("estimate_stats: too few frame pairs (" + std::to_string(count) + ") for " + std::to_string(m) +
					" parameters");
	}
	const Vector mean = sum / static_cast<double>(count);
	Matrix cov = Matrix::Zero(m, m);
	for (const auto& seq : sequences) {
		for (int g : gaps) {
			for (std::size_t t = 0; t + static_cast<std::size_t>(g) < seq.size(); ++t) {
				const Vector d = seq[t] - seq[t + static_cast<std::size_t>(g)] - mean;
				cov.noalias() += d * d.transpose();
			}
		}
	}
	cov /= static_cast<double>(count - 1);
	symmetrize(cov);
	SequenceStats out;
	out.stats = {mean, cov};
	out.pair_count = count;
	out.gaps.assign(gaps.begin(), gaps.end());
	return out;
}

SequenceStats estimate_stats_from_shapes(const PdmModel& model, std::span<const std::vector<Shape>> sequences,
										 std::span<const int> gaps)
{
	std::vector<std::vector<Vector>> params;
	params.reserve(sequences.size());
	for (const auto& seq : sequences) {
		std::vector<Vector> ps;
		ps.reserve(seq.size());
		for (const auto& s : seq) {
			ps.push_back(decompose(model, s).to_vector());
		}
		params.push_back(std::move(ps));
	}
	return estimate_stats(params, gaps);
}

double ar1_increment_variance(double rho, double sigma, int gap)
{
	return 2.0 * sigma * sigma * (1.0 - std::pow(rho, gap)) / (1.0 - rho * rho);
}

SyntheticDataset make_dataset(const DatasetOptions& options)
{
	if (options.train_identities < 1 || options.test_sequences < 0) {
		throw std::invalid_argument("make_dataset: need at least one training identity");
	}
	SyntheticDataset ds;
	ds.world = make_world(options.world);
	for (int i = 0; i < options.train_identities; ++i) {
		const auto id = make_identity(ds.world, mix_seed(options.seed, 1000 + static_cast<std::uint64_t>(i)),
									  options.identity);
		ds.train.push_back(generate_sequence(ds.world, id, options.train_length, options.motion,
											 mix_seed(options.seed, 2000 + static_cast<std::uint64_t>(i))));
	}
	for (int i = 0; i < options.test_sequences; ++i) {
		const auto id = make_identity(ds.world, mix_seed(options.seed, 3000 + static_cast<std::uint64_t>(i)),
									  options.identity);
		ds.test.push_back(generate_sequence(ds.world, id, options.test_length, options.motion,
											mix_seed(options.seed, 4000 + static_cast<std::uint64_t>(i))));
	}
	return ds;
}

std::vector<std::vector<Shape>> sequence_shapes(std::span<const SyntheticSequence> sequences)
{
	std::vector<std::vector<Shape>> out;
	for (const auto& seq : sequences) {
		std::vector<Shape> shapes;
		for (const auto& f : seq.frames) {
			shapes.push_back(f.shape);
		}
		out.push_back(std::move(shapes));
	}
	return out;
}

std::vector<TrainingImage> training_images(std::span<const SyntheticSequence> sequences, const PdmModel& model,
										   int stride)
{
	if (stride < 1) {
		throw std::invalid_argument("training_images: stride must be positive");
	}
	std::vector<TrainingImage> out;
	for (const auto& seq : sequences) {
		for (std::size_t t = 0; t < seq.frames.size(); t += static_cast<std::size_t>(stride)) {
			out.push_back({seq.frames[t].image, decompose(model, seq.frames[t].shape)});
		}
	}
	return out;
}

} // namespace iccr
