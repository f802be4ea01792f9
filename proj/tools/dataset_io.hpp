/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: tools/dataset_io.hpp
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

#include "iccr/pipeline.hpp"
#include "iccr/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace iccr::cli {

inline constexpr const char* kDatasetFormat = "iccr-dataset";

/**
 * On-disk layout:
 *
 *     manifest.json
 *     train/seq_000/00000.pgm, 00000.pts, ...
 *     test/seq_000/...
 *
 * `provenance` (tool version, config, hash) is merged into the manifest.
 */
void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& dir,
				   const nlohmann::json& provenance);

struct LoadedSequence
{
	std::string name;
	AnnotatedSequence frames;
};

struct LoadedSplit
{
	std::vector<LoadedSequence> sequences;
	std::pair<Eigen::Index, Eigen::Index> eyes{kLeftEyeOuter, kRightEyeOuter};
	nlohmann::json manifest;
};

/// Reads every sequence of `split` ("train" or "test") listed in the manifest.
LoadedSplit read_split(const std::filesystem::path& dir, const std::string& split);

} // namespace iccr::cli
