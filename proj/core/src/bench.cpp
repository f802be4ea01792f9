/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/src/bench.cpp
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
#include "iccr/bench.hpp"

#include "iccr/features.hpp"
#include "iccr/incremental.hpp"
#include "iccr/regression.hpp"
#include "iccr/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace iccr {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t nanos_since(Clock::time_point start)
{
	return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
}

// Cheap deterministic filler for very large matrices.
Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale)
{
	Matrix out(rows, cols);
	std::uint64_t state = seed;
	double* p = out.data();
	for (Eigen::Index i = 0; i < out.size(); ++i) {
		state = mix_seed(state, 0);
		p[i] = scale * (static_cast<double>(state >> 11) * 0x1.0p-53 * 2.0 - 1.0);
	}
	return out;
}

// Symmetric, comfortably positive definite: I + small symmetric noise.
Matrix random_spd(Eigen::Index d, std::uint64_t seed)
{
	Matrix s = random_matrix(d, d, seed, 0.2 / std::sqrt(static_cast<double>(d)));
	symmetrize(s);
	s.diagonal().array() += 1.0;
	return s;
}

const char* const kPhases[] = {"extraction", "projection", "update", "total"};

} // namespace

void BenchConfig::validate() const
{
	if (d_sweep.empty()) {
		return;
	}
	if (!std::is_sorted(d_sweep.begin(), d_sweep.end()) || d_sweep.front() < 2) {
		throw std::invalid_argument("bench: d sweep must be ascending with every d ≥ 2");
	}
	if (reps < 5) {
		throw std::invalid_argument("bench: at least 5 repetitions required");
	}
	if (m <= kRigidDims || k < 1 || levels < 1 || warmup < 0 || raw_factor < 1) {
		throw std::invalid_argument("bench: invalid m, K, L, warmup or raw factor");
	}
	if (2 * landmarks - kRigidDims < m - kRigidDims) {
		throw std::invalid_argument("bench: too few landmarks for m");
	}
}

const PhaseSummary& BenchPoint::phase(const std::string& name) const
{
	for (const auto& p : phases) {
		if (p.phase == name) {
			return p;
		}
	}
	throw std::out_of_range("bench: no phase " + name);
}

const BenchPoint& BenchReport::point(const std::string& method, Eigen::Index d) const
{
	for (const auto& p : points) {
		if (p.method == method && p.d == d) {
			return p;
		}
	}
	throw std::out_of_range("bench: no point for " + method + " at d=" + std::to_string(d));
}

double fit_loglog_slope(std::span<const double> x, std::span<const double> y)
{
	if (x.size() != y.size() || x.size() < 2) {
		throw std::invalid_argument("fit_loglog_slope: need at least two paired points");
	}
	double mx = 0.0;
	double my = 0.0;
	for (std::size_t i = 0; i < x.size(); ++i) {
		mx += std::log(x[i]);
		my += std::log(y[i]);
	}
	mx /= static_cast<double>(x.size());
	my /= static_cast<double>(y.size());
	double sxy = 0.0;
	double sxx = 0.0;
	for (std::size_t i = 0; i < x.size(); ++i) {
		const double dx = std::log(x[i]) - mx;
		sxy += dx * (std::log(y[i]) - my);
		sxx += dx * dx;
	}
	return sxy / sxx;
}

PhaseSummary summarize(const std::string& phase, std::vector<double> values)
{
	if (values.empty()) {
		throw std::invalid_argument("summarize: no values");
	}
	std::sort(values.begin(), values.end());
	auto quantile = [&](double q) {
		const double pos = q * static_cast<double>(values.size() - 1);
		const auto lo = static_cast<std::size_t>(std::floor(pos));
		const auto hi = std::min(lo + 1, values.size() - 1);
		const double frac = pos - static_cast<double>(lo);
		return values[lo] + frac * (values[hi] - values[lo]);
	};
	return {phase, quantile(0.5), quantile(0.25), quantile(0.75)};
}

void finalize_report(BenchReport& report)
{
	std::map<std::pair<std::string, Eigen::Index>, std::map<std::string, std::vector<double>>> grouped;
	for (const auto& s : report.samples) {
		grouped[{s.method, s.d}][s.phase].push_back(static_cast<double>(s.nanos));
	}
	std::vector<BenchPoint> kept = std::move(report.points);
	report.points.clear();
	for (const auto& [key, phases] : grouped) {
		BenchPoint p;
		p.method = key.first;
		p.d = key.second;
		for (const char* name : kPhases) {
			const auto it = phases.find(name);
			if (it != phases.end()) {
				p.phases.push_back(summarize(name, it->second));
			}
		}
		for (const auto& old : kept) {
			if (old.method == p.method && old.d == p.d) {
				p.extractions_per_frame = old.extractions_per_frame;
				p.inner_dim = old.inner_dim;
			}
		}
		p.resolution_flag = p.phase("update").median_ns < 1000.0;
		report.points.push_back(std::move(p));
	}
	auto slope_for = [&](const std::string& method) {
		std::vector<double> xs;
		std::vector<double> ys;
		for (const auto& p : report.points) {
			if (p.method == method && !p.resolution_flag) {
				xs.push_back(static_cast<double>(p.d));
				ys.push_back(p.phase("update").median_ns);
			}
		}
		return xs.size() >= 2 ? fit_loglog_slope(xs, ys) : 0.0;
	};
	report.slope_isdm = slope_for("isdm");
	report.slope_iccr = slope_for("iccr");
	report.total_ratio = 0.0;
	report.update_ratio = 0.0;
	if (!report.config.d_sweep.empty()) {
		const auto dmax = report.config.d_sweep.back();
		const auto& a = report.point("isdm", dmax);
		const auto& b = report.point("iccr", dmax);
		report.total_ratio = a.phase("total").median_ns / b.phase("total").median_ns;
		report.update_ratio = a.phase("update").median_ns / b.phase("update").median_ns;
	}
}

BenchReport bench_updates(const BenchConfig& config)
{
	config.validate();
	if (Eigen::nbThreads() != 1) {
		throw Error("bench: linear-algebra layer runs " + std::to_string(Eigen::nbThreads()) +
					" threads; single-threaded execution required");
	}
	BenchReport report;
	report.config = config;
	const auto m = config.m;
	const auto k_modes = m - kRigidDims;
	const auto world = make_world({config.landmarks, k_modes, 512, 512, config.seed});
	const PdmModel& pdm = world.pdm;
	ShapeParams center = ShapeParams::identity(k_modes);
	center.rigid.tx = center.rigid.ty = 255.0;
	const Shape center_shape = compose(pdm, center);
	const Image canvas(8, 8, 0.5); // analytic features ignore pixel data
	const Matrix mixing = random_matrix(2, m, config.seed + 17, 1.0);

	Rng rng(config.seed);
	PerturbationStats stats;
	stats.mean = 0.01 * standard_normal(rng, m);
	const Matrix g = random_matrix(m, m, config.seed + 3, 0.3);
	stats.covariance = g * g.transpose() / static_cast<double>(m);
	stats.covariance.diagonal().array() += 0.05;
	// Keep rigid draws small; scaling rows and columns together preserves definiteness.
	Vector shrink = Vector::Ones(m);
	shrink.head(kRigidDims).setConstant(0.1);
	stats.covariance = shrink.asDiagonal() * stats.covariance * shrink.asDiagonal();
	symmetrize(stats.covariance);
	const Matrix a_mat = data_term_a(stats);
	const Matrix b_mat = data_term_b(stats);
	const Matrix b_inv = data_term_b_inverse(b_mat);

	for (const auto d : config.d_sweep) {
		const Eigen::Index raw_dim = config.raw_factor * d;
		const auto extractor =
			FeatureExtractor::analytic(AnalyticMap::random_smooth_total(config.landmarks, raw_dim, config.seed + d));
		FeaturePca pca;
		pca.mean = random_matrix(raw_dim, 1, config.seed + 5 * d, 0.1);
		pca.projection = random_matrix(d - 1, raw_dim, config.seed + 7 * d, 1.0 / std::sqrt(static_cast<double>(raw_dim)));
		pca.explained_variance = Vector::Ones(d - 1);

		std::vector<CrSolverState> iccr_states;
		std::vector<LinearRegressor> iccr_regs;
		std::vector<IsdmLevelState> isdm_states;
		for (int l = 0; l < config.levels; ++l) {
			CrSolverState st;
			st.a = a_mat;
			st.b = b_mat;
			st.v_inv = random_spd(d, config.seed + 11 * d + l);
			st.sum_d = random_matrix(d, m + 1, config.seed + 13 * d + l, 1.0);
			st.count = 100;
			iccr_regs.push_back({(st.a * st.sum_d.transpose()) * st.v_inv});
			iccr_states.push_back(std::move(st));
			isdm_states.push_back(
				{random_matrix(m, d, config.seed + 19 * d + l, 0.1), random_spd(d, config.seed + 23 * d + l)});
		}

		std::uint64_t iccr_extractions = 0;
		std::uint64_t isdm_extractions = 0;
		const int total_reps = config.warmup + config.reps;
		for (int rep = 0; rep < total_reps; ++rep) {
			const bool record = rep >= config.warmup;
			const int r = rep - config.warmup;

			// iCCR: one extraction phase, then per-level projection and update.
			{
				std::int64_t t_ext = 0;
				std::int64_t t_proj = 0;
				std::int64_t t_upd = 0;
				const auto c0 = extractor.extraction_count();
				const auto start = Clock::now();
				auto t = Clock::now();
				const auto raw = raw_derivatives(extractor, canvas, center_shape, 1.0, DifferenceScheme::Forward);
				t_ext += nanos_since(t);
				for (int l = 0; l < config.levels; ++l) {
					t = Clock::now();
					Matrix r3(raw_dim, 3);
					r3.col(0) = raw.center - pca.mean;
					r3.col(1) = raw.center + raw.dx - pca.mean;
					r3.col(2) = raw.center + raw.dy - pca.mean;
					Matrix y(d - 1, 3);
					y.noalias() = pca.projection * r3;
					Matrix ds(d, m + 1);
					ds.block(0, 0, d - 1, 1) = y.col(0);
					ds(d - 1, 0) = 1.0;
					Matrix jxy(d - 1, 2);
					jxy.col(0) = y.col(1) - y.col(0);
					jxy.col(1) = y.col(2) - y.col(0);
					ds.block(0, 1, d - 1, m).noalias() = jxy * mixing;
					ds.block(d - 1, 1, 1, m).setZero();
					t_proj += nanos_since(t);
					t = Clock::now();
					iccr_update(iccr_states[static_cast<std::size_t>(l)], iccr_regs[static_cast<std::size_t>(l)], ds,
								b_inv);
					t_upd += nanos_since(t);
				}
				const auto total = nanos_since(start);
				iccr_extractions = extractor.extraction_count() - c0;
				if (record) {
					report.samples.push_back({"iccr", d, "extraction", r, t_ext});
					report.samples.push_back({"iccr", d, "projection", r, t_proj});
					report.samples.push_back({"iccr", d, "update", r, t_upd});
					report.samples.push_back({"iccr", d, "total", r, total});
				}
			}

			// iSDM: sampling and extraction, projection and update repeated per level.
			{
				std::int64_t t_ext = 0;
				std::int64_t t_proj = 0;
				std::int64_t t_upd = 0;
				const auto c0 = extractor.extraction_count();
				const auto start = Clock::now();
				Rng sample_rng(mix_seed(config.seed, static_cast<std::uint64_t>(rep)));
				for (int l = 0; l < config.levels; ++l) {
					auto t = Clock::now();
					const Matrix deltas = sample_gaussian(sample_rng, stats.mean, stats.covariance, config.k);
					Matrix raws(raw_dim, config.k);
					const Vector c = center.to_vector();
					for (int s = 0; s < config.k; ++s) {
						const Shape shape = compose(pdm, ShapeParams::from_vector(c + deltas.col(s)));
						raws.col(s) = extractor.extract_raw(canvas, shape) - pca.mean;
					}
					t_ext += nanos_since(t);
					t = Clock::now();
					Matrix xs(d, config.k);
					xs.topRows(d - 1).noalias() = pca.projection * raws;
					xs.row(d - 1).setOnes();
					t_proj += nanos_since(t);
					t = Clock::now();
					isdm_update(isdm_states[static_cast<std::size_t>(l)], xs, deltas);
					t_upd += nanos_since(t);
				}
				const auto total = nanos_since(start);
				isdm_extractions = extractor.extraction_count() - c0;
				if (record) {
					report.samples.push_back({"isdm", d, "extraction", r, t_ext});
					report.samples.push_back({"isdm", d, "projection", r, t_proj});
					report.samples.push_back({"isdm", d, "update", r, t_upd});
					report.samples.push_back({"isdm", d, "total", r, total});
				}
			}
		}
		BenchPoint pi;
		pi.method = "iccr";
		pi.d = d;
		pi.extractions_per_frame = iccr_extractions;
		pi.inner_dim = iccr_inner_dim(iccr_states.front());
		BenchPoint ps;
		ps.method = "isdm";
		ps.d = d;
		ps.extractions_per_frame = isdm_extractions;
		ps.inner_dim = config.k;
		report.points.push_back(pi);
		report.points.push_back(ps);
	}
	finalize_report(report);
	return report;
}

void emit_report(const BenchReport& report, const std::filesystem::path& dir)
{
	std::error_code ec;
	std::filesystem::create_directories(dir, ec);
	std::ofstream csv(dir / "bench.csv");
	if (!csv) {
		throw Error("cannot write " + (dir / "bench.csv").string());
	}
	csv << "method,d,phase,rep,nanos\n";
	for (const auto& s : report.samples) {
		csv << s.method << ',' << s.d << ',' << s.phase << ',' << s.rep << ',' << s.nanos << '\n';
	}
	nlohmann::json j;
	const auto& c = report.config;
	j["config"] = {{"d_sweep", c.d_sweep}, {"m", c.m},			 {"k", c.k},
				   {"levels", c.levels},   {"reps", c.reps},	 {"warmup", c.warmup},
				   {"raw_factor", c.raw_factor}, {"landmarks", c.landmarks}, {"seed", c.seed}};
	j["eigen_threads"] = Eigen::nbThreads();
	j["slopes"] = {{"isdm", report.slope_isdm}, {"iccr", report.slope_iccr}};
	j["ratios"] = {{"total", report.total_ratio}, {"update", report.update_ratio}};
	j["points"] = nlohmann::json::array();
	for (const auto& p : report.points) {
		nlohmann::json pj;
		pj["method"] = p.method;
		pj["d"] = p.d;
		pj["extractions_per_frame"] = p.extractions_per_frame;
		pj["inner_dim"] = p.inner_dim;
		pj["resolution_flag"] = p.resolution_flag;
		for (const auto& ph : p.phases) {
			pj["phases"][ph.phase] = {{"median_ns", ph.median_ns}, {"q1_ns", ph.q1_ns}, {"q3_ns", ph.q3_ns}};
		}
		j["points"].push_back(pj);
	}
	std::ofstream js(dir / "bench.json");
	if (!js) {
		throw Error("cannot write " + (dir / "bench.json").string());
	}
	js << j.dump(2) << '\n';
	if (!csv || !js) {
		throw Error("failed writing bench report in " + dir.string());
	}
}

BenchReport read_report(const std::filesystem::path& dir)
{
	std::ifstream js(dir / "bench.json");
	std::ifstream csv(dir / "bench.csv");
	if (!js || !csv) {
		throw Error("missing bench.json or bench.csv in " + dir.string());
	}
	const auto j = nlohmann::json::parse(js);
	BenchReport r;
	const auto& c = j.at("config");
	r.config.d_sweep = c.at("d_sweep").get<std::vector<Eigen::Index>>();
	r.config.m = c.at("m");
	r.config.k = c.at("k");
	r.config.levels = c.at("levels");
	r.config.reps = c.at("reps");
	r.config.warmup = c.at("warmup");
	r.config.raw_factor = c.at("raw_factor");
	r.config.landmarks = c.at("landmarks");
	r.config.seed = c.at("seed");
	std::string line;
	std::getline(csv, line);
	if (line != "method,d,phase,rep,nanos") {
		throw Error("unexpected bench.csv header");
	}
	while (std::getline(csv, line)) {
		if (line.empty()) {
			continue;
		}
		std::stringstream ss(line);
		BenchSample s;
		std::string field;
		std::getline(ss, s.method, ',');
		std::getline(ss, field, ',');
		s.d = std::stol(field);
		std::getline(ss, s.phase, ',');
		std::getline(ss, field, ',');
		s.rep = std::stoi(field);
		std::getline(ss, field, ',');
		s.nanos = std::stoll(field);
		r.samples.push_back(s);
	}
	for (const auto& pj : j.at("points")) {
		BenchPoint p;
		p.method = pj.at("method");
		p.d = pj.at("d");
		p.extractions_per_frame = pj.at("extractions_per_frame");
		p.inner_dim = pj.at("inner_dim");
		r.points.push_back(p);
	}
	if (r.samples.empty()) {
		r.points.clear();
		return r;
	}
	finalize_report(r);
	return r;
}

} // namespace iccr
