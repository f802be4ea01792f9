/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/include/iccr/bench.hpp
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
#pragma once

#include "iccr/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace iccr {

struct BenchConfig
{
	std::vector<Eigen::Index> d_sweep{250, 500, 1000, 2000};
	Eigen::Index m = 24;
	int k = 10;
	int levels = 3;
	int reps = 21;
	int warmup = 2;
	int raw_factor = 10; ///< raw feature dimension D = raw_factor·d
	Eigen::Index landmarks = 49;
	std::uint64_t seed = 1;

	/// Throws std::invalid_argument for unsorted sweeps, reps < 5 and similar.
	void validate() const;
};

/// One timed phase of one repetition (long format).
struct BenchSample
{
	std::string method; ///< "iccr" or "isdm"
	Eigen::Index d = 0;
	std::string phase; ///< "extraction", "projection", "update" or "total"
	int rep = 0;
	std::int64_t nanos = 0;
};

struct PhaseSummary
{
	std::string phase;
	double median_ns = 0.0;
	double q1_ns = 0.0;
	double q3_ns = 0.0;
};

struct BenchPoint
{
	std::string method;
	Eigen::Index d = 0;
	std::vector<PhaseSummary> phases;
	std::uint64_t extractions_per_frame = 0;
	Eigen::Index inner_dim = 0; ///< side of the matrix inverted inside the update
	bool resolution_flag = false;

	const PhaseSummary& phase(const std::string& name) const;
};

struct BenchReport
{
	BenchConfig config;
	std::vector<BenchSample> samples;
	std::vector<BenchPoint> points;
	double slope_isdm = 0.0;
	double slope_iccr = 0.0;
	/// At the largest d: iSDM/iCCR median per-frame totals and update phases.
	double total_ratio = 0.0;
	double update_ratio = 0.0;

	const BenchPoint& point(const std::string& method, Eigen::Index d) const;
};

/// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(std::span<const double> x, std::span<const double> y);

/// Median and quartiles by linear interpolation between order statistics.
PhaseSummary summarize(const std::string& phase, std::vector<double> values);

/**
 * Times per-frame incremental updates of both methods on synthetic states.
 * Throws Error when the linear-algebra layer runs more than one thread.
 */
BenchReport bench_updates(const BenchConfig& config);

/// Recomputes points and slopes from the long-format samples.
void finalize_report(BenchReport& report);

/// Writes `bench.csv` (method,d,phase,rep,nanos) and `bench.json` into `dir`.
void emit_report(const BenchReport& report, const std::filesystem::path& dir);

/// Reads what emit_report wrote.
BenchReport read_report(const std::filesystem::path& dir);

} // namespace iccr
