/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: include/iccr/landmarks_io.hpp
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

#include "iccr/pdm.hpp"

#include <filesystem>
#include <iosfwd>

namespace iccr {

/**
 * "pts" annotation text:
 *
 *     version: 1
 *     n_points: 68
 *     {
 *     x y
 *     ...
 *     }
 *
 * Coordinates in the file are 1-based; shapes in memory are 0-based.
 */
Shape read_pts(std::istream& in);
Shape read_pts(const std::filesystem::path& path);

void write_pts(std::ostream& out, const Shape& shape);
void write_pts(const std::filesystem::path& path, const Shape& shape);

} // namespace iccr
