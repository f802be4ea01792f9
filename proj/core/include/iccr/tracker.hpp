/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/include/iccr/tracker.hpp
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

#include "iccr/cascade.hpp"
#include "iccr/incremental.hpp"

#include <memory>
#include <utility>
#include <vector>

namespace iccr {

/**
 * Mean landmark distance divided by the distance between the two eye
 * corners of the ground truth. Throws Error when the corners coincide.
 */
double normalized_error(const Shape& predicted, const Shape& truth, std::pair<Eigen::Index, Eigen::Index> eyes);

struct Ced
{
	std::vector<double> thresholds;
	std::vector<double> fractions;
	double max_threshold = 0.08;
};

/// CED(t) = fraction of errors ≤ t, on `points` evenly spaced thresholds in [0, max].
Ced cumulative_error_distribution(std::span<const double> errors, double max_threshold = 0.08, int points = 161);

/// Trapezoidal area under the CED divided by its threshold span.
double area_under_curve(const Ced& ced);

struct CedAuc
{
	Ced ced;
	double auc = 0.0;
};

CedAuc ced_and_auc(std::span<const double> errors, double max_threshold = 0.08, int points = 161);

struct TrackFrame
{
	std::shared_ptr<const ImageLike> image;
	Shape ground_truth;
};

struct TrackOptions
{
	IncrementalOptions incremental;
	UpdateGate gate = UpdateGate::threshold(0.1);
	double reinit_threshold = 0.1;
	std::pair<Eigen::Index, Eigen::Index> eyes{0, 3};
	/// Hand the gate the true error (synthetic mode); otherwise only the reconstruction score.
	bool gate_uses_true_error = true;
	double auc_max_threshold = 0.08;
	int ced_points = 161;
};

struct FrameRecord
{
	std::size_t index = 0;
	double error = 0.0;
	bool failure = false;	   ///< error above the reinit threshold; the next frame restarts from this frame's truth
	bool reinitialized = false; ///< this frame started from the previous frame's truth
	bool gate_accepted = false;
	bool updated = false;
	double reconstruction_score = 0.0;
	std::uint64_t fit_extractions = 0;
	std::uint64_t update_extractions = 0;
	double fit_seconds = 0.0;
	double update_seconds = 0.0;
	ShapeParams params;
};

struct EvalReport
{
	std::vector<double> errors;
	std::vector<FrameRecord> frames;
	Ced ced;
	double auc = 0.0;
	int failures = 0;
	int updates = 0;
	double mean_error = 0.0;
};

/**
 * Frame 0 starts from its own ground truth; every later frame starts from
 * the previous fit, or from the previous frame's ground truth after a
 * failure. Accepted fits feed the incremental updater, which works on a
 * private copy of the model.
 */
EvalReport track_sequence(const CascadeModel& model, std::span<const TrackFrame> frames,
						  const TrackOptions& options = {});

/// Aggregate report over several sequences (errors concatenated).
EvalReport merge_reports(std::span<const EvalReport> reports, double max_threshold = 0.08, int points = 161);

} // namespace iccr
