/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: tools/dataset_io.cpp
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

#include "iccr/image.hpp"
#include "iccr/landmarks_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace iccr::cli {

using nlohmann::json;

namespace {

std::string frame_stem(std::size_t t)
{
	char buf[32];
	std::snprintf(buf, sizeof(buf), "%05zu", t);
	return buf;
}

std::string sequence_name(std::size_t i)
{
	char buf[32];
	std::snprintf(buf, sizeof(buf), "seq_%03zu", i);
	return buf;
}

json write_split(std::span<const SyntheticSequence> sequences, const std::filesystem::path& dir)
{
	json list = json::array();
	for (std::size_t i = 0; i < sequences.size(); ++i) {
		const auto name = sequence_name(i);
		const auto seq_dir = dir / name;
		std::filesystem::create_directories(seq_dir);
		json bursts = json::array();
		const auto& frames = sequences[i].frames;
		for (std::size_t t = 0; t < frames.size(); ++t) {
			write_pgm(rasterize(*frames[t].image), seq_dir / (frame_stem(t) + ".pgm"));
			write_pts(seq_dir / (frame_stem(t) + ".pts"), frames[t].shape);
			if (frames[t].burst) {
				bursts.push_back(t);
			}
		}
		list.push_back({{"name", name}, {"frames", frames.size()}, {"seed", sequences[i].seed}, {"bursts", bursts}});
	}
	return list;
}

} // namespace

void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& dir, const json& provenance)
{
	std::filesystem::create_directories(dir);
	json manifest = provenance;
	manifest["format"] = kDatasetFormat;
	manifest["format_version"] = 1;
	manifest["width"] = dataset.world.width;
	manifest["height"] = dataset.world.height;
	manifest["num_landmarks"] = dataset.world.pdm.num_landmarks();
	manifest["eyes"] = {kLeftEyeOuter, kRightEyeOuter};
	manifest["splits"] = {{"train", write_split(dataset.train, dir / "train")},
						  {"test", write_split(dataset.test, dir / "test")}};
	std::ofstream out(dir / "manifest.json");
	out << manifest.dump(2) << '\n';
	if (!out) {
		throw Error("cannot write " + (dir / "manifest.json").string());
	}
}

LoadedSplit read_split(const std::filesystem::path& dir, const std::string& split)
{
	const auto path = dir / "manifest.json";
	std::ifstream in(path);
	if (!in) {
		throw Error("cannot read " + path.string());
	}
	std::stringstream ss;
	ss << in.rdbuf();
	LoadedSplit out;
	try {
		out.manifest = json::parse(ss.str());
		if (out.manifest.at("format").get<std::string>() != kDatasetFormat) {
			throw Error(path.string() + ": not a dataset manifest");
		}
		const auto& eyes = out.manifest.at("eyes");
		out.eyes = {eyes.at(0).get<Eigen::Index>(), eyes.at(1).get<Eigen::Index>()};
		const auto& splits = out.manifest.at("splits");
		if (!splits.contains(split)) {
			throw Error(path.string() + ": no split named " + split);
		}
		for (const auto& entry : splits.at(split)) {
			LoadedSequence seq;
			seq.name = entry.at("name").get<std::string>();
			const auto n = entry.at("frames").get<std::size_t>();
			const auto seq_dir = dir / split / seq.name;
			for (std::size_t t = 0; t < n; ++t) {
				seq.frames.images.push_back(std::make_shared<Image>(read_image(seq_dir / (frame_stem(t) + ".pgm"))));
				seq.frames.shapes.push_back(read_pts(seq_dir / (frame_stem(t) + ".pts")));
			}
			out.sequences.push_back(std::move(seq));
		}
	} catch (const json::exception& e) {
		throw Error(path.string() + ": " + e.what());
	}
	return out;
}

} // namespace iccr::cli
