/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: include/iccr/serialization.hpp
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

#include <filesystem>
#include <string>
#include <string_view>

namespace iccr {

inline constexpr const char* kModelFormat = "iccr-model";
inline constexpr int kModelFormatVersion = 1;

/// Library version string baked in at build time.
std::string tool_version();

/// 64-bit FNV-1a of `bytes`, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Provenance carried by every model file.
struct ModelMetadata
{
	std::string tool_version;
	/// Canonical (key-sorted, compact) JSON of the resolved run configuration; "{}" when absent.
	std::string config_json = "{}";
	std::string config_hash; ///< fnv1a_hex(config_json); filled in on save
};

/// JSON text of the whole model. Doubles are written with round-trip precision.
std::string model_to_json(const CascadeModel& model, const ModelMetadata& meta = {});
CascadeModel model_from_json(const std::string& text, ModelMetadata* meta = nullptr);

void save_model(const CascadeModel& model, const std::filesystem::path& path, const ModelMetadata& meta = {});
/// Throws Error on unreadable files, wrong format tags and malformed payloads.
CascadeModel load_model(const std::filesystem::path& path, ModelMetadata* meta = nullptr);

std::string pdm_to_json(const PdmModel& pdm);
PdmModel pdm_from_json(const std::string& text);

} // namespace iccr
