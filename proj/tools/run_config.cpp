/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: tools/run_config.cpp
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
#include "run_config.hpp"

#include "iccr/serialization.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace iccr::cli {

using nlohmann::json;

namespace {

// Reads known keys of one section and rejects the rest.
class Section
{
public:
	Section(const json& root, const char* name) : name_(name)
	{
		const auto it = root.find(name);
		if (it != root.end()) {
			if (!it->is_object()) {
				throw ConfigError(std::string("config: section '") + name + "' must be an object");
			}
			j_ = &*it;
		}
	}

	template <typename T>
	Section& get(const char* key, T& out)
	{
		known_.insert(key);
		if (j_ == nullptr) {
			return *this;
		}
		const auto it = j_->find(key);
		if (it == j_->end()) {
			return *this;
		}
		try {
			out = it->get<T>();
		} catch (const json::exception&) {
			throw ConfigError("config: bad value for " + name_ + "." + key);
		}
		return *this;
	}

	void finish() const
	{
		if (j_ == nullptr) {
			return;
		}
		for (const auto& [key, value] : j_->items()) {
			if (!known_.count(key)) {
				throw ConfigError("config: unknown key " + name_ + "." + key);
			}
		}
	}

private:
	std::string name_;
	const json* j_ = nullptr;
	std::set<std::string> known_;
};

} // namespace

json RunConfig::to_json() const
{
	json j;
	j["data"] = {{"seed", data.seed},
				 {"train_identities", data.train_identities},
				 {"train_length", data.train_length},
				 {"test_sequences", data.test_sequences},
				 {"test_length", data.test_length},
				 {"landmarks", data.landmarks},
				 {"modes", data.modes},
				 {"width", data.width},
				 {"height", data.height},
				 {"burst_probability", data.burst_probability},
				 {"static_motion", data.static_motion}};
	j["train"] = {{"method", train.method},
				  {"feature", train.feature},
				  {"feature_dim", train.feature_dim},
				  {"levels", train.levels},
				  {"samples", train.samples},
				  {"ridge", train.ridge},
				  {"gaps", train.gaps},
				  {"stride", train.stride},
				  {"pdm_modes", train.pdm_modes},
				  {"shrinkage", train.shrinkage},
				  {"patch_radius", train.patch_radius},
				  {"hog_cell", train.hog_cell},
				  {"seed", train.seed}};
	j["track"] = {{"incremental", track.incremental},
				  {"gate", track.gate},
				  {"gate_threshold", track.gate_threshold},
				  {"gate_signal", track.gate_signal},
				  {"reinit_threshold", track.reinit_threshold},
				  {"isdm_samples", track.isdm_samples},
				  {"reinvert_every", track.reinvert_every},
				  {"auc_max", track.auc_max},
				  {"seed", track.seed}};
	j["bench"] = {{"d_sweep", bench.d_sweep}, {"m", bench.m},		{"k", bench.k},		  {"levels", bench.levels},
				  {"reps", bench.reps},		  {"warmup", bench.warmup}, {"seed", bench.seed}};
	return j;
}

void RunConfig::merge(const json& j)
{
	if (!j.is_object()) {
		throw ConfigError("config: top level must be an object");
	}
	for (const auto& [key, value] : j.items()) {
		if (key != "data" && key != "train" && key != "track" && key != "bench") {
			throw ConfigError("config: unknown section " + key);
		}
	}
	Section(j, "data")
		.get("seed", data.seed)
		.get("train_identities", data.train_identities)
		.get("train_length", data.train_length)
		.get("test_sequences", data.test_sequences)
		.get("test_length", data.test_length)
		.get("landmarks", data.landmarks)
		.get("modes", data.modes)
		.get("width", data.width)
		.get("height", data.height)
		.get("burst_probability", data.burst_probability)
		.get("static_motion", data.static_motion)
		.finish();
	Section(j, "train")
		.get("method", train.method)
		.get("feature", train.feature)
		.get("feature_dim", train.feature_dim)
		.get("levels", train.levels)
		.get("samples", train.samples)
		.get("ridge", train.ridge)
		.get("gaps", train.gaps)
		.get("stride", train.stride)
		.get("pdm_modes", train.pdm_modes)
		.get("shrinkage", train.shrinkage)
		.get("patch_radius", train.patch_radius)
		.get("hog_cell", train.hog_cell)
		.get("seed", train.seed)
		.finish();
	Section(j, "track")
		.get("incremental", track.incremental)
		.get("gate", track.gate)
		.get("gate_threshold", track.gate_threshold)
		.get("gate_signal", track.gate_signal)
		.get("reinit_threshold", track.reinit_threshold)
		.get("isdm_samples", track.isdm_samples)
		.get("reinvert_every", track.reinvert_every)
		.get("auc_max", track.auc_max)
		.get("seed", track.seed)
		.finish();
	Section(j, "bench")
		.get("d_sweep", bench.d_sweep)
		.get("m", bench.m)
		.get("k", bench.k)
		.get("levels", bench.levels)
		.get("reps", bench.reps)
		.get("warmup", bench.warmup)
		.get("seed", bench.seed)
		.finish();
}

std::string RunConfig::canonical() const
{
	return to_json().dump();
}

std::string RunConfig::hash() const
{
	return fnv1a_hex(canonical());
}

DatasetOptions RunConfig::dataset_options() const
{
	if (data.train_identities < 1 || data.train_length < 2 || data.test_sequences < 0 || data.test_length < 1) {
		throw ConfigError("gen-data: need at least one training identity with two frames");
	}
	if (!(data.burst_probability >= 0.0 && data.burst_probability <= 1.0)) {
		throw ConfigError("gen-data: burst probability must lie in [0, 1]");
	}
	DatasetOptions o;
	o.seed = data.seed;
	o.train_identities = data.train_identities;
	o.train_length = data.train_length;
	o.test_sequences = data.test_sequences;
	o.test_length = data.test_length;
	o.world.num_landmarks = data.landmarks;
	o.world.num_modes = data.modes;
	o.world.width = data.width;
	o.world.height = data.height;
	o.world.seed = data.seed;
	o.motion.burst_probability = data.burst_probability;
	if (data.static_motion) {
		o.motion.flexible_noise = 0.0;
		o.motion.linear_noise = 0.0;
		o.motion.translation_noise = 0.0;
	}
	return o;
}

TrainingConfig RunConfig::training_config(int jobs) const
{
	TrainingConfig c;
	c.method = method_from_string(train.method);
	c.feature = feature_kind_from_string(train.feature);
	if (c.feature == FeatureKind::Analytic) {
		throw ConfigError("train: analytic features are for tests only");
	}
	c.feature_dim = train.feature_dim;
	c.patch_radius = train.patch_radius;
	c.hog_cell = train.hog_cell;
	c.pdm_modes = train.pdm_modes;
	c.gaps = train.gaps;
	c.frame_stride = train.stride;
	c.cascade.levels = train.levels;
	c.cascade.samples_per_image = train.samples;
	c.cascade.shrinkage = train.shrinkage;
	c.cascade.ridge = Ridge::relative(train.ridge);
	c.cascade.seed = train.seed;
	c.cascade.jobs = jobs;
	return c;
}

TrackOptions RunConfig::track_options() const
{
	TrackOptions o;
	o.incremental.mode = incremental_mode_from_string(track.incremental);
	o.incremental.isdm_samples = track.isdm_samples;
	o.incremental.reinvert_every = track.reinvert_every;
	o.incremental.seed = track.seed;
	switch (gate_kind_from_string(track.gate)) {
	case UpdateGate::Kind::Threshold:
		o.gate = UpdateGate::threshold(track.gate_threshold);
		break;
	case UpdateGate::Kind::Always:
		o.gate = UpdateGate::always();
		break;
	case UpdateGate::Kind::Never:
	case UpdateGate::Kind::Pluggable:
		o.gate = UpdateGate::never();
		break;
	}
	if (track.gate_signal != "true-error" && track.gate_signal != "reconstruction") {
		throw ConfigError("track: gate signal must be true-error or reconstruction");
	}
	o.gate_uses_true_error = track.gate_signal == "true-error";
	o.reinit_threshold = track.reinit_threshold;
	o.auc_max_threshold = track.auc_max;
	return o;
}

BenchConfig RunConfig::bench_config() const
{
	BenchConfig c;
	c.d_sweep = bench.d_sweep;
	c.m = bench.m;
	c.k = bench.k;
	c.levels = bench.levels;
	c.reps = bench.reps;
	c.warmup = bench.warmup;
	c.seed = bench.seed;
	c.validate();
	return c;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in) {
		throw ConfigError("cannot read config file " + path.string());
	}
	std::stringstream ss;
	ss << in.rdbuf();
	json j;
	try {
		j = json::parse(ss.str());
	} catch (const json::exception& e) {
		throw ConfigError("config file " + path.string() + ": " + e.what());
	}
	// Artifacts carry their resolved config under "config"; accept them directly.
	if (j.is_object() && j.contains("format") && j.contains("config")) {
		j = j.at("config");
	}
	RunConfig c;
	c.merge(j);
	return c;
}

} // namespace iccr::cli
