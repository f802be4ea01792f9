/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: tools/run_config.hpp
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

#include "iccr/bench.hpp"
#include "iccr/pipeline.hpp"
#include "iccr/synth.hpp"
#include "iccr/tracker.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace iccr::cli {

/// Bad configuration (file, environment or flag); maps to exit code 1.
class ConfigError : public std::invalid_argument
{
public:
	using std::invalid_argument::invalid_argument;
};

struct DataSection
{
	std::uint64_t seed = 7;
	int train_identities = 16;
	int train_length = 40;
	int test_sequences = 10;
	int test_length = 120;
	Eigen::Index landmarks = 12;
	Eigen::Index modes = 6;
	int width = 128;
	int height = 128;
	double burst_probability = 0.0;
	bool static_motion = false; ///< zero motion noise: every frame repeats the identity's base shape
};

struct TrainSection
{
	std::string method = "ccr";
	std::string feature = "pixel-patch";
	Eigen::Index feature_dim = 128;
	int levels = 3;
	int samples = 10; ///< K perturbations per training image (sdm)
	double ridge = 1e-3; ///< relative to the mean diagonal of the normal matrix
	std::vector<int> gaps{1, 2, 3, 5};
	int stride = 4;
	Eigen::Index pdm_modes = 6;
	double shrinkage = 0.05;
	int patch_radius = 8;
	int hog_cell = 4;
	std::uint64_t seed = 0;
};

struct TrackSection
{
	std::string incremental = "none";
	std::string gate = "threshold";
	double gate_threshold = 0.1;
	std::string gate_signal = "true-error"; ///< or "reconstruction"
	double reinit_threshold = 0.1;
	int isdm_samples = 10;
	int reinvert_every = 0;
	double auc_max = 0.08;
	std::uint64_t seed = 0;
};

struct BenchSection
{
	std::vector<Eigen::Index> d_sweep{250, 500, 1000, 2000};
	Eigen::Index m = 24;
	int k = 10;
	int levels = 3;
	int reps = 21;
	int warmup = 2;
	std::uint64_t seed = 1;
};

/**
 * Every numeric default of the tool. Layers apply in the order
 * defaults < config file < ICCR_* environment < flags; the resolved value
 * is embedded in every artifact. Paths and --jobs are not part of it.
 */
struct RunConfig
{
	DataSection data;
	TrainSection train;
	TrackSection track;
	BenchSection bench;

	nlohmann::json to_json() const;
	/// Overwrites only the keys present in `j`; unknown keys throw ConfigError.
	void merge(const nlohmann::json& j);

	/// Key-sorted compact JSON, the input of the config hash.
	std::string canonical() const;
	std::string hash() const;

	DatasetOptions dataset_options() const;
	TrainingConfig training_config(int jobs) const;
	TrackOptions track_options() const;
	BenchConfig bench_config() const;
};

/// Defaults overlaid with a config file, or with the "config" object of an artifact.
RunConfig load_run_config(const std::filesystem::path& path);

} // namespace iccr::cli
