/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: tools/main.cpp
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
#include "dataset_io.hpp"
#include "run_config.hpp"

#include "iccr/bench.hpp"
#include "iccr/pipeline.hpp"
#include "iccr/serialization.hpp"
#include "iccr/synth.hpp"
#include "iccr/tracker.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace iccr;
using namespace iccr::cli;

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

struct Globals
{
	bool json_output = false;
	bool dump_config = false;
	int jobs = 1;
	std::string config_path;
};

struct Paths
{
	std::string data;
	std::string out;
	std::string model;
	std::string input;
	std::string split;
	std::string sequence;
};

// Diagnostics go to stderr as JSON lines.
void log_event(const std::string& level, const std::string& event, json fields = json::object())
{
	fields["level"] = level;
	fields["event"] = event;
	std::cerr << fields.dump() << '\n';
}

void info(const std::string& event, json fields = json::object())
{
	log_event("info", event, std::move(fields));
}

json provenance(const RunConfig& cfg)
{
	return {{"tool_version", tool_version()}, {"config", cfg.to_json()}, {"config_hash", cfg.hash()}};
}

void write_json(const std::filesystem::path& path, const json& j)
{
	std::ofstream out(path);
	out << j.dump(2) << '\n';
	if (!out) {
		throw Error("cannot write " + path.string());
	}
}

json read_json(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in) {
		throw Error("cannot read " + path.string());
	}
	std::stringstream ss;
	ss << in.rdbuf();
	try {
		return json::parse(ss.str());
	} catch (const json::exception& e) {
		throw Error(path.string() + ": " + e.what());
	}
}

void emit(const Globals& g, const json& j, const std::string& human)
{
	if (g.json_output) {
		std::cout << j.dump() << '\n';
	} else {
		std::cout << human << '\n';
	}
}

const std::string& need(const std::string& value, const char* flag)
{
	if (value.empty()) {
		throw ConfigError(std::string(flag) + " is required");
	}
	return value;
}

// Linear interpolation between order statistics.
double quantile(std::vector<double> v, double q)
{
	if (v.empty()) {
		return 0.0;
	}
	std::sort(v.begin(), v.end());
	const double pos = q * static_cast<double>(v.size() - 1);
	const auto lo = static_cast<std::size_t>(pos);
	const auto hi = std::min(lo + 1, v.size() - 1);
	return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

json timing_summary(const std::vector<double>& ms)
{
	return {{"count", ms.size()},
			{"p50", quantile(ms, 0.5)},
			{"p90", quantile(ms, 0.9)},
			{"p99", quantile(ms, 0.99)},
			{"max", ms.empty() ? 0.0 : *std::max_element(ms.begin(), ms.end())}};
}

std::string fmt(const char* f, double v)
{
	char buf[64];
	std::snprintf(buf, sizeof(buf), f, v);
	return buf;
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const RunConfig& cfg, const Paths& p, const Globals& g)
{
	const std::filesystem::path out = need(p.out, "--out");
	const auto options = cfg.dataset_options();
	info("gen-data.start", {{"out", out.string()}, {"config_hash", cfg.hash()}});
	const auto dataset = make_dataset(options);
	write_dataset(dataset, out, provenance(cfg));
	std::size_t frames = 0;
	for (const auto* split : {&dataset.train, &dataset.test}) {
		for (const auto& s : *split) {
			frames += s.frames.size();
		}
	}
	info("gen-data.done", {{"frames", frames}});
	emit(g,
		 {{"out", out.string()},
		  {"train_sequences", dataset.train.size()},
		  {"test_sequences", dataset.test.size()},
		  {"frames", frames},
		  {"config_hash", cfg.hash()}},
		 "wrote " + std::to_string(frames) + " frames to " + out.string());
	return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const RunConfig& cfg, const Paths& p, const Globals& g)
{
	const std::filesystem::path data = need(p.data, "--data");
	const std::filesystem::path out = need(p.out, "--out");
	const auto tc = cfg.training_config(g.jobs);
	const auto split = read_split(data, p.split.empty() ? "train" : p.split);
	std::vector<AnnotatedSequence> seqs;
	for (const auto& s : split.sequences) {
		seqs.push_back(s.frames);
	}
	info("train.start", {{"method", cfg.train.method}, {"sequences", seqs.size()}, {"config_hash", cfg.hash()}});
	const auto outcome = train_from_sequences(seqs, tc);
	ModelMetadata meta;
	meta.config_json = cfg.canonical();
	if (out.has_parent_path()) {
		std::filesystem::create_directories(out.parent_path());
	}
	save_model(outcome.model, out, meta);
	json levels = json::array();
	for (const auto& lv : outcome.model.levels) {
		levels.push_back({{"train_error_in", lv.train_error_in}, {"train_error_out", lv.train_error_out}});
	}
	info("train.done", {{"model", out.string()}});
	std::ostringstream human;
	human << "trained " << cfg.train.method << " model with " << outcome.model.num_levels() << " levels on "
		  << outcome.training_images << " images -> " << out.string();
	emit(g,
		 {{"model", out.string()},
		  {"method", cfg.train.method},
		  {"training_images", outcome.training_images},
		  {"feature_dim", outcome.model.pca.dim()},
		  {"levels", levels},
		  {"config_hash", cfg.hash()},
		  {"tool_version", tool_version()}},
		 human.str());
	return 0;
}

// ---------------------------------------------------------------- track

json frame_json(const std::string& sequence, const FrameRecord& f)
{
	return {{"sequence", sequence},
			{"frame", f.index},
			{"error", f.error},
			{"failure", f.failure},
			{"reinitialized", f.reinitialized},
			{"gate_accepted", f.gate_accepted},
			{"updated", f.updated},
			{"reconstruction_score", f.reconstruction_score},
			{"fit_extractions", f.fit_extractions},
			{"update_extractions", f.update_extractions},
			{"params", f.params.to_vector()},
			{"fit_seconds", f.fit_seconds},
			{"update_seconds", f.update_seconds}};
}

int count_reinits(const EvalReport& r)
{
	return static_cast<int>(std::count_if(r.frames.begin(), r.frames.end(), [](const FrameRecord& f) {
		return f.reinitialized;
	}));
}

int cmd_track(const RunConfig& cfg, const Paths& p, const Globals& g)
{
	const std::filesystem::path model_path = need(p.model, "--model");
	const std::filesystem::path data = need(p.data, "--data");
	const std::filesystem::path out = need(p.out, "--out");
	auto options = cfg.track_options();
	ModelMetadata mm;
	const auto model = load_model(model_path, &mm);
	const auto split_name = p.split.empty() ? std::string("test") : p.split;
	const auto split = read_split(data, split_name);
	options.eyes = split.eyes;
	info("track.start", {{"sequences", split.sequences.size()},
						 {"incremental", cfg.track.incremental},
						 {"gate", cfg.track.gate},
						 {"config_hash", cfg.hash()}});

	std::vector<EvalReport> reports(split.sequences.size());
	parallel_for(split.sequences.size(), g.jobs, [&](std::size_t i) {
		const auto& s = split.sequences[i].frames;
		std::vector<TrackFrame> frames;
		for (std::size_t t = 0; t < s.images.size(); ++t) {
			frames.push_back({s.images[t], s.shapes[t]});
		}
		reports[i] = track_sequence(model, frames, options);
	});

	std::filesystem::create_directories(out);
	std::ofstream lines(out / "frames.jsonl");
	json sequences = json::array();
	std::vector<double> fit_ms;
	std::vector<double> update_ms;
	int reinits = 0;
	for (std::size_t i = 0; i < reports.size(); ++i) {
		const auto& name = split.sequences[i].name;
		const auto& r = reports[i];
		for (const auto& f : r.frames) {
			lines << frame_json(name, f).dump() << '\n';
			fit_ms.push_back(1e3 * f.fit_seconds);
			if (f.updated) {
				update_ms.push_back(1e3 * f.update_seconds);
			}
		}
		reinits += count_reinits(r);
		sequences.push_back({{"name", name},
							 {"frames", r.frames.size()},
							 {"auc", r.auc},
							 {"failures", r.failures},
							 {"reinits", count_reinits(r)},
							 {"updates", r.updates},
							 {"mean_error", r.mean_error}});
	}
	lines.close();
	if (!lines) {
		throw Error("cannot write " + (out / "frames.jsonl").string());
	}
	const auto merged = merge_reports(reports, options.auc_max_threshold, options.ced_points);
	const json overall{{"frames", merged.errors.size()},
					   {"auc", merged.auc},
					   {"auc_max_threshold", options.auc_max_threshold},
					   {"failures", merged.failures},
					   {"reinits", reinits},
					   {"updates", merged.updates},
					   {"mean_error", merged.mean_error}};
	json report = provenance(cfg);
	report["format"] = "iccr-eval-report";
	report["format_version"] = 1;
	report["model"] = {{"method", to_string(model.method)},
					   {"levels", model.num_levels()},
					   {"config_hash", mm.config_hash},
					   {"tool_version", mm.tool_version}};
	report["data"] = {{"split", split_name},
					  {"sequences", split.sequences.size()},
					  {"config_hash", split.manifest.value("config_hash", std::string())}};
	report["incremental"] = cfg.track.incremental;
	report["gate"] = cfg.track.gate;
	report["overall"] = overall;
	report["ced"] = {{"thresholds", merged.ced.thresholds}, {"fractions", merged.ced.fractions}};
	report["sequences"] = sequences;
	report["timing"] = {{"fit_ms", timing_summary(fit_ms)}, {"update_ms", timing_summary(update_ms)}};
	write_json(out / "report.json", report);
	info("track.done", {{"out", out.string()}});
	emit(g, overall,
		 "AUC " + fmt("%.4f", merged.auc) + " over " + std::to_string(merged.errors.size()) + " frames, " +
			 std::to_string(merged.failures) + " failures, " + std::to_string(merged.updates) + " updates");
	return 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const RunConfig& cfg, const Paths& p, const Globals& g)
{
	const std::filesystem::path input = need(p.input, "--input");
	const std::filesystem::path out = need(p.out, "--out");
	const auto source = read_json(input / "report.json");
	std::ifstream in(input / "frames.jsonl");
	if (!in) {
		throw Error("cannot read " + (input / "frames.jsonl").string());
	}
	std::vector<json> frames;
	std::string line;
	while (std::getline(in, line)) {
		if (line.empty()) {
			continue;
		}
		try {
			frames.push_back(json::parse(line));
		} catch (const json::exception& e) {
			throw Error((input / "frames.jsonl").string() + ": " + e.what());
		}
	}
	if (frames.empty()) {
		throw Error((input / "frames.jsonl").string() + ": no frames");
	}
	std::vector<double> errors;
	std::vector<double> update_ms;
	int failures = 0;
	int reinits = 0;
	int updates = 0;
	std::filesystem::create_directories(out);
	std::ofstream csv(out / "errors.csv");
	csv << "sequence,frame,error,failure,reinitialized,updated\n";
	try {
		for (const auto& f : frames) {
			const double e = f.at("error").get<double>();
			errors.push_back(e);
			const bool fail = f.at("failure").get<bool>();
			const bool re = f.at("reinitialized").get<bool>();
			const bool up = f.at("updated").get<bool>();
			failures += fail ? 1 : 0;
			reinits += re ? 1 : 0;
			updates += up ? 1 : 0;
			if (up) {
				update_ms.push_back(1e3 * f.at("update_seconds").get<double>());
			}
			char buf[32];
			std::snprintf(buf, sizeof(buf), "%.17g", e);
			csv << f.at("sequence").get<std::string>() << ',' << f.at("frame").get<std::size_t>() << ',' << buf << ','
				<< fail << ',' << re << ',' << up << '\n';
		}
	} catch (const json::exception& e) {
		throw Error((input / "frames.jsonl").string() + ": " + e.what());
	}
	csv.close();
	const auto ca = ced_and_auc(errors, cfg.track.auc_max);
	std::ofstream ced(out / "ced.csv");
	ced << "threshold,fraction\n";
	for (std::size_t i = 0; i < ca.ced.thresholds.size(); ++i) {
		char buf[80];
		std::snprintf(buf, sizeof(buf), "%.17g,%.17g", ca.ced.thresholds[i], ca.ced.fractions[i]);
		ced << buf << '\n';
	}
	ced.close();
	if (!csv || !ced) {
		throw Error("cannot write CSV files in " + out.string());
	}
	double mean = 0.0;
	for (double e : errors) {
		mean += e;
	}
	mean /= static_cast<double>(errors.size());
	json summary = provenance(cfg);
	summary["format"] = "iccr-eval-summary";
	summary["format_version"] = 1;
	summary["source"] = {{"config_hash", source.value("config_hash", std::string())},
						 {"tool_version", source.value("tool_version", std::string())}};
	summary["frames"] = errors.size();
	summary["auc"] = ca.auc;
	summary["auc_max_threshold"] = cfg.track.auc_max;
	summary["failures"] = failures;
	summary["reinit_count"] = reinits;
	summary["updates"] = updates;
	summary["mean_error"] = mean;
	summary["update_timing_ms"] = timing_summary(update_ms);
	write_json(out / "summary.json", summary);
	emit(g, summary, "AUC " + fmt("%.4f", ca.auc) + ", mean error " + fmt("%.4f", mean) + ", " +
						 std::to_string(reinits) + " re-initialisations");
	return 0;
}

// ---------------------------------------------------------------- bench-update

int cmd_bench(const RunConfig& cfg, const Paths& p, const Globals& g)
{
	const std::filesystem::path out = need(p.out, "--out");
	const auto bc = cfg.bench_config();
	info("bench.start", {{"config_hash", cfg.hash()}});
	const auto report = bench_updates(bc);
	emit_report(report, out);
	// Provenance rides along in the JSON summary.
	auto j = read_json(out / "bench.json");
	const auto prov = provenance(cfg);
	for (const auto& [k, v] : prov.items()) {
		j[k] = v;
	}
	write_json(out / "bench.json", j);
	const json result{{"slopes", {{"isdm", report.slope_isdm}, {"iccr", report.slope_iccr}}},
					  {"ratios", {{"update", report.update_ratio}, {"total", report.total_ratio}}},
					  {"out", out.string()}};
	emit(g, result,
		 "slopes isdm " + fmt("%.3f", report.slope_isdm) + " iccr " + fmt("%.3f", report.slope_iccr) +
			 ", update ratio " + fmt("%.2f", report.update_ratio));
	return 0;
}

// ---------------------------------------------------------------- stats

int cmd_stats(const RunConfig& cfg, const Paths& p, const Globals& g)
{
	const std::filesystem::path data = need(p.data, "--data");
	const auto split = read_split(data, p.split.empty() ? "train" : p.split);
	std::vector<std::vector<Shape>> shapes;
	std::vector<Shape> all;
	for (const auto& s : split.sequences) {
		if (!p.sequence.empty() && s.name != p.sequence) {
			continue;
		}
		shapes.push_back(s.frames.shapes);
		all.insert(all.end(), s.frames.shapes.begin(), s.frames.shapes.end());
	}
	if (shapes.empty()) {
		throw Error("stats: no sequence named " + p.sequence);
	}
	PdmModel pdm;
	if (!p.model.empty()) {
		pdm = load_model(p.model).pdm;
	} else {
		PdmTrainOptions po;
		if (cfg.train.pdm_modes > 0) {
			po.fixed_modes = cfg.train.pdm_modes;
		}
		pdm = train_pdm(all, po);
	}
	const auto st = estimate_stats_from_shapes(pdm, shapes, cfg.train.gaps);
	json cov = json::array();
	for (Eigen::Index r = 0; r < st.stats.covariance.rows(); ++r) {
		cov.push_back(std::vector<double>(st.stats.covariance.row(r).begin(), st.stats.covariance.row(r).end()));
	}
	json j = provenance(cfg);
	j["format"] = "iccr-stats";
	j["format_version"] = 1;
	j["gaps"] = st.gaps;
	j["pair_count"] = st.pair_count;
	j["num_params"] = pdm.num_params();
	j["mean"] = std::vector<double>(st.stats.mean.begin(), st.stats.mean.end());
	j["covariance"] = cov;
	if (!p.out.empty()) {
		write_json(p.out, j);
	}
	std::ostringstream human;
	human << st.pair_count << " pairs\nmean: " << st.stats.mean.transpose() << "\ncovariance:\n"
		  << st.stats.covariance;
	emit(g, j, human.str());
	return 0;
}

std::string env_name(const std::string& flag)
{
	std::string s = "ICCR_";
	for (char c : flag.substr(2)) {
		s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
	}
	return s;
}

// --config has to be known before CLI11 writes flag and environment values on top of it.
std::string prescan_config(int argc, char** argv)
{
	for (int i = 1; i < argc; ++i) {
		const std::string a = argv[i];
		if (a == "--config" && i + 1 < argc) {
			return argv[i + 1];
		}
		if (a.rfind("--config=", 0) == 0) {
			return a.substr(9);
		}
	}
	const char* env = std::getenv("ICCR_CONFIG");
	return env != nullptr ? env : "";
}

} // namespace

int main(int argc, char** argv)
{
	RunConfig cfg;
	Globals g;
	Paths p;
	try {
		const auto path = prescan_config(argc, argv);
		if (!path.empty()) {
			cfg = load_run_config(path);
		}
	} catch (const std::exception& e) {
		log_event("error", "config", {{"message", e.what()}});
		return kUsageError;
	}

	CLI::App app{"iccr: cascaded-regression landmark tracking with online model updates"};
	app.set_version_flag("--version", tool_version());
	app.require_subcommand(1, 1);
	app.fallthrough(); // global flags may follow the subcommand
	app.option_defaults()->always_capture_default();
	app.add_option("--config", g.config_path, "JSON config file, or any artifact with an embedded config")
		->envname("ICCR_CONFIG");
	app.add_flag("--json", g.json_output, "Write only machine-readable JSON to stdout");
	app.add_option("--jobs", g.jobs, "Worker threads for per-sequence and per-image work")
		->envname("ICCR_JOBS")
		->check(CLI::Range(1, 256));
	app.add_flag("--dump-config", g.dump_config, "Print the resolved config and exit");

	auto opt = [](CLI::App* sub, const std::string& flag, auto& var, const std::string& desc) {
		return sub->add_option(flag, var, desc)->envname(env_name(flag));
	};

	auto* gen = app.add_subcommand("gen-data", "Render synthetic sequences as PGM frames with pts annotations");
	gen->add_option("--out", p.out, "Output directory");
	opt(gen, "--seed", cfg.data.seed, "Dataset seed");
	opt(gen, "--train-identities", cfg.data.train_identities, "Training sequences (one identity each)");
	opt(gen, "--train-length", cfg.data.train_length, "Frames per training sequence");
	opt(gen, "--test-sequences", cfg.data.test_sequences, "Test sequences");
	opt(gen, "--test-length", cfg.data.test_length, "Frames per test sequence");
	opt(gen, "--landmarks", cfg.data.landmarks, "Landmarks per shape");
	opt(gen, "--modes", cfg.data.modes, "Deformation modes of the generating shape model");
	opt(gen, "--width", cfg.data.width, "Frame width");
	opt(gen, "--height", cfg.data.height, "Frame height");
	opt(gen, "--burst-probability", cfg.data.burst_probability, "Per-frame chance a motion burst starts");
	gen->add_flag("--static", cfg.data.static_motion, "No motion: every frame repeats the base shape")
		->envname("ICCR_STATIC");

	auto* train = app.add_subcommand("train", "Train a cascade from a generated or annotated dataset");
	train->add_option("--data", p.data, "Dataset directory (manifest.json)");
	train->add_option("--split", p.split, "Split to train on (default train)");
	train->add_option("--out", p.out, "Model file to write");
	opt(train, "--method", cfg.train.method, "Cascade kind")->check(CLI::IsMember({"ccr", "sdm"}));
	opt(train, "--feature", cfg.train.feature, "Descriptor")
		->check(CLI::IsMember({"pixel-patch", "gradient-histogram"}));
	opt(train, "--feature-dim", cfg.train.feature_dim, "PCA feature dimension d");
	opt(train, "--levels", cfg.train.levels, "Cascade levels L");
	opt(train, "--samples", cfg.train.samples, "Perturbations per training image K (sdm)");
	opt(train, "--ridge", cfg.train.ridge, "Ridge factor relative to the mean normal-matrix diagonal");
	opt(train, "--gaps", cfg.train.gaps, "Frame gaps pooled into the data term")->delimiter(',');
	opt(train, "--stride", cfg.train.stride, "Every n-th frame becomes a training image");
	opt(train, "--pdm-modes", cfg.train.pdm_modes, "Shape modes kept (<= 0 keeps 98% of the variance)");
	opt(train, "--shrinkage", cfg.train.shrinkage, "Covariance shrinkage between levels");
	opt(train, "--patch-radius", cfg.train.patch_radius, "Pixel-patch radius");
	opt(train, "--hog-cell", cfg.train.hog_cell, "Gradient-histogram cell size");
	opt(train, "--seed", cfg.train.seed, "Training seed");

	auto* track = app.add_subcommand("track", "Track sequences and write per-frame records and a report");
	track->add_option("--model", p.model, "Model file");
	track->add_option("--data", p.data, "Dataset directory");
	track->add_option("--split", p.split, "Split to track (default test)");
	track->add_option("--out", p.out, "Output directory for frames.jsonl and report.json");
	opt(track, "--incremental", cfg.track.incremental, "Online update rule")
		->check(CLI::IsMember({"none", "iccr", "isdm"}));
	opt(track, "--gate", cfg.track.gate, "Update gate")->check(CLI::IsMember({"threshold", "always", "never"}));
	opt(track, "--gate-threshold", cfg.track.gate_threshold, "Threshold gate limit");
	opt(track, "--gate-signal", cfg.track.gate_signal, "Quantity the threshold gate reads")
		->check(CLI::IsMember({"true-error", "reconstruction"}));
	opt(track, "--reinit-threshold", cfg.track.reinit_threshold, "Normalized error counted as a failure");
	opt(track, "--isdm-samples", cfg.track.isdm_samples, "Samples per level for isdm updates");
	opt(track, "--reinvert-every", cfg.track.reinvert_every, "Exact re-inversion period for iccr (0: never)");
	opt(track, "--auc-max", cfg.track.auc_max, "Upper error bound of the CED");
	opt(track, "--seed", cfg.track.seed, "Update sampling seed");

	auto* eval = app.add_subcommand("eval", "Per-frame error CSV, CED CSV and summary JSON from a track run");
	eval->add_option("--input", p.input, "Directory written by track");
	eval->add_option("--out", p.out, "Output directory");
	opt(eval, "--auc-max", cfg.track.auc_max, "Upper error bound of the CED");

	auto* bench = app.add_subcommand("bench-update", "Time iccr against isdm updates over a dimension sweep");
	bench->add_option("--out", p.out, "Output directory for bench.csv and bench.json");
	opt(bench, "--d-sweep", cfg.bench.d_sweep, "Feature dimensions, ascending")->delimiter(',');
	opt(bench, "--m", cfg.bench.m, "Shape parameters");
	opt(bench, "--k", cfg.bench.k, "isdm samples per level");
	opt(bench, "--levels", cfg.bench.levels, "Cascade levels");
	opt(bench, "--reps", cfg.bench.reps, "Timed repetitions (>= 5)");
	opt(bench, "--warmup", cfg.bench.warmup, "Untimed warm-up repetitions");
	opt(bench, "--seed", cfg.bench.seed, "Synthetic state seed");

	auto* stats = app.add_subcommand("stats", "Data-term statistics of inter-frame shape differences");
	stats->add_option("--data", p.data, "Dataset directory");
	stats->add_option("--split", p.split, "Split to read (default train)");
	stats->add_option("--sequence", p.sequence, "Restrict to one sequence");
	stats->add_option("--model", p.model, "Take the shape model from this file instead of fitting one");
	stats->add_option("--out", p.out, "Also write the statistics to this JSON file");
	opt(stats, "--gaps", cfg.train.gaps, "Frame gaps")->delimiter(',');
	opt(stats, "--pdm-modes", cfg.train.pdm_modes, "Shape modes when fitting a model");

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		const int code = app.exit(e);
		if (code == 0) {
			return 0;
		}
		const auto selected = app.get_subcommands();
		std::cerr << (selected.empty() ? app.help() : selected.front()->help());
		return kUsageError;
	}
	if (g.dump_config) {
		std::cout << cfg.to_json().dump(2) << '\n';
		return 0;
	}

	const std::map<CLI::App*, int (*)(const RunConfig&, const Paths&, const Globals&)> handlers{
		{gen, cmd_gen_data}, {train, cmd_train}, {track, cmd_track},
		{eval, cmd_eval},	 {bench, cmd_bench}, {stats, cmd_stats}};
	try {
		return handlers.at(app.get_subcommands().front())(cfg, p, g);
	} catch (const std::invalid_argument& e) {
		log_event("error", "usage", {{"message", e.what()}});
		return kUsageError;
	} catch (const std::exception& e) {
		log_event("error", "data", {{"message", e.what()}});
		return kDataError;
	}
}
