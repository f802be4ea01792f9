/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: src/landmarks_io.cpp
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
#include "iccr/landmarks_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace iccr {

namespace {

std::string trim(const std::string& s)
{
	const auto b = s.find_first_not_of(" \t\r\n");
	if (b == std::string::npos) {
		return {};
	}
	const auto e = s.find_last_not_of(" \t\r\n");
	return s.substr(b, e - b + 1);
}

} // namespace

Shape read_pts(std::istream& in)
{
	std::string line;
	long declared = -1;
	bool in_body = false;
	std::vector<Eigen::Vector2d> points;
	while (std::getline(in, line)) {
		const std::string t = trim(line);
		if (t.empty()) {
			continue;
		}
		if (!in_body) {
			if (t == "{") {
				in_body = true;
			} else if (t.rfind("n_points", 0) == 0) {
				const auto colon = t.find(':');
				if (colon == std::string::npos) {
					throw Error("pts: malformed n_points line");
				}
				try {
					declared = std::stol(t.substr(colon + 1));
				} catch (const std::exception&) {
					throw Error("pts: malformed n_points line");
				}
			}
			continue;
		}
		if (t == "}") {
			in_body = false;
			break;
		}
		std::istringstream ss(t);
		double x = 0.0;
		double y = 0.0;
		if (!(ss >> x >> y)) {
			throw Error("pts: malformed point line '" + t + "'");
		}
		points.emplace_back(x - 1.0, y - 1.0);
	}
	if (declared < 0) {
		throw Error("pts: missing n_points header");
	}
	if (in_body) {
		throw Error("pts: missing closing brace");
	}
	if (static_cast<long>(points.size()) != declared) {
		throw Error("pts: header declares " + std::to_string(declared) + " points, file has " +
					std::to_string(points.size()));
	}
	Shape::Points pts(static_cast<Eigen::Index>(points.size()), 2);
	for (std::size_t i = 0; i < points.size(); ++i) {
		pts.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
	}
	return Shape(std::move(pts));
}

Shape read_pts(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in) {
		throw Error("cannot open " + path.string());
	}
	return read_pts(in);
}

void write_pts(std::ostream& out, const Shape& shape)
{
	out << "version: 1\n";
	out << "n_points: " << shape.size() << "\n{\n";
	out << std::setprecision(17);
	for (Eigen::Index i = 0; i < shape.size(); ++i) {
		const auto p = shape.point(i);
		out << p.x() + 1.0 << ' ' << p.y() + 1.0 << '\n';
	}
	out << "}\n";
}

void write_pts(const std::filesystem::path& path, const Shape& shape)
{
	std::ofstream out(path);
	if (!out) {
		throw Error("cannot write " + path.string());
	}
	write_pts(out, shape);
	if (!out) {
		throw Error("failed writing " + path.string());
	}
}

} // namespace iccr
