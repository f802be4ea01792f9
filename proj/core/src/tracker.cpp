/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/src/tracker.cpp
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
#include "iccr/tracker.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace iccr {

double normalized_error(const Shape& predicted, const Shape& truth, std::pair<Eigen::Index, Eigen::Index> eyes)
{
	if (predicted.size() != truth.size()) {
		throw std::invalid_argument("normalized_error: landmark counts differ");
	}
	if (eyes.first < 0 || eyes.second < 0 || eyes.first >= truth.size() || eyes.second >= truth.size()) {
		throw std::invalid_argument("normalized_error: eye index out of range");
	}
	const double iod = (truth.point(eyes.first) - truth.point(eyes.second)).norm();
	if (!(iod > 0.0)) {
		throw Error("normalized_error: eye corners coincide");
	}
	return mean_point_error(predicted, truth) / iod;
}

Ced cumulative_error_distribution(std::span<const double> errors, double max_threshold, int points)
{
	if (errors.empty()) {
		throw std::invalid_argument("CED: at least one error value required");
	}
	if (!(max_threshold > 0.0) || points < 2) {
		throw std::invalid_argument("CED: need a positive bound and at least two grid points");
	}
	std::vector<double> sorted(errors.begin(), errors.end());
	std::sort(sorted.begin(), sorted.end());
	Ced ced;
	ced.max_threshold = max_threshold;
	ced.thresholds.resize(static_cast<std::size_t>(points));
	ced.fractions.resize(static_cast<std::size_t>(points));
	for (int i = 0; i < points; ++i) {
		const double t = max_threshold * i / (points - 1);
		const auto below = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
		ced.thresholds[static_cast<std::size_t>(i)] = t;
		ced.fractions[static_cast<std::size_t>(i)] = static_cast<double>(below) / static_cast<double>(sorted.size());
	}
	return ced;
}

double area_under_curve(const Ced& ced)
{
	if (ced.thresholds.size() < 2 || ced.thresholds.size() != ced.fractions.size()) {
		throw std::invalid_argument("AUC: malformed CED");
	}
	double area = 0.0;
	for (std::size_t i = 1; i < ced.thresholds.size(); ++i) {
		area += 0.5 * (ced.fractions[i] + ced.fractions[i - 1]) * (ced.thresholds[i] - ced.thresholds[i - 1]);
	}
	return area / (ced.thresholds.back() - ced.thresholds.front());
}

CedAuc ced_and_auc(std::span<const double> errors, double max_threshold, int points)
{
	CedAuc out;
	out.ced = cumulative_error_distribution(errors, max_threshold, points);
	out.auc = area_under_curve(out.ced);
	return out;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start)
{
	return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void finish_report(EvalReport& report, double max_threshold, int points)
{
	const auto summary = ced_and_auc(report.errors, max_threshold, points);
	report.ced = summary.ced;
	report.auc = summary.auc;
	report.mean_error =
		std::accumulate(report.errors.begin(), report.errors.end(), 0.0) / static_cast<double>(report.errors.size());
}

} // namespace

EvalReport track_sequence(const CascadeModel& model, std::span<const TrackFrame> frames, const TrackOptions& options)
{
	if (frames.empty()) {
		throw std::invalid_argument("track_sequence: empty sequence");
	}
	auto initial = std::make_shared<CascadeModel>(model);
	initial->extractor = model.extractor.with_private_counter();
	const auto& extractor = initial->extractor; // copies below share this counter
	ModelSnapshots snapshots(initial);
	std::optional<ModelUpdater> updater;
	if (options.incremental.mode != IncrementalMode::None) {
		updater.emplace(*initial, options.incremental);
	}

	EvalReport report;
	report.frames.reserve(frames.size());
	ShapeParams previous;
	bool previous_failed = false;
	for (std::size_t t = 0; t < frames.size(); ++t) {
		const auto& frame = frames[t];
		if (!frame.image) {
			throw std::invalid_argument("track_sequence: frame without image");
		}
		const auto snapshot = snapshots.current();
		FrameRecord rec;
		rec.index = t;
		ShapeParams start;
		if (t == 0) {
			start = decompose(snapshot->pdm, frame.ground_truth);
		} else if (previous_failed) {
			start = decompose(snapshot->pdm, frames[t - 1].ground_truth);
			rec.reinitialized = true;
		} else {
			start = previous;
		}

		const auto count0 = extractor.extraction_count();
		auto t0 = std::chrono::steady_clock::now();
		bool lost = false;
		try {
			const FitResult fr = fit_with_diagnostics(*snapshot, *frame.image, start);
			rec.params = fr.params;
			rec.reconstruction_score = fr.reconstruction_score;
		} catch (const FitError& e) {
			rec.params = e.last_valid();
			rec.reconstruction_score = 1.0;
			lost = true;
		}
		rec.fit_seconds = seconds_since(t0);
		rec.fit_extractions = extractor.extraction_count() - count0;

		rec.error = normalized_error(compose(snapshot->pdm, rec.params), frame.ground_truth, options.eyes);
		rec.failure = lost || rec.error > options.reinit_threshold;
		if (rec.failure) {
			++report.failures;
		}

		FitDiagnostics diag;
		diag.reconstruction_score = rec.reconstruction_score;
		if (options.gate_uses_true_error) {
			diag.true_error = rec.error;
		}
		rec.gate_accepted = options.gate.accept(diag);
		if (updater && rec.gate_accepted && !lost) {
			auto next = std::make_shared<CascadeModel>(*snapshot);
			try {
				const auto ur = updater->update(*next, *frame.image, rec.params, t);
				rec.updated = ur.applied;
				rec.update_extractions = ur.extractions;
				rec.update_seconds = ur.extraction_seconds + ur.update_seconds;
			} catch (const Error&) {
				rec.updated = false;
			}
			if (rec.updated) {
				snapshots.publish(std::move(next));
				++report.updates;
			}
		}

		previous = rec.params;
		previous_failed = rec.failure;
		report.errors.push_back(rec.error);
		report.frames.push_back(std::move(rec));
	}
	finish_report(report, options.auc_max_threshold, options.ced_points);
	return report;
}

EvalReport merge_reports(std::span<const EvalReport> reports, double max_threshold, int points)
{
	if (reports.empty()) {
		throw std::invalid_argument("merge_reports: no reports");
	}
	EvalReport out;
	for (const auto& r : reports) {
		out.errors.insert(out.errors.end(), r.errors.begin(), r.errors.end());
		out.frames.insert(out.frames.end(), r.frames.begin(), r.frames.end());
		out.failures += r.failures;
		out.updates += r.updates;
	}
	finish_report(out, max_threshold, points);
	return out;
}

} // namespace iccr
