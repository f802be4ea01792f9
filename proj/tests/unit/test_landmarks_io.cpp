/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: tests/unit/test_landmarks_io.cpp
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

#include <doctest.h>

#include <sstream>

using namespace iccr;

TEST_CASE("pts round-trip")
{
	Shape::Points p(3, 2);
	p << 0.1, 2.5, 30.125, 4.0, 1.0 / 3.0, 7.0;
	std::stringstream ss;
	write_pts(ss, Shape(p));
	const Shape back = read_pts(ss);
	// The one-based offset costs at most an ulp or two.
	CHECK((back.points() - p).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("pts coordinates are one-based on disk")
{
	std::istringstream in("version: 1\nn_points: 3\n{\n1 1\n2 3\n 10.5 4 \n}\n");
	const Shape s = read_pts(in);
	CHECK(s.point(0).x() == 0.0);
	CHECK(s.point(1).y() == 2.0);
	CHECK(s.point(2).x() == 9.5);
}

TEST_CASE("pts errors")
{
	std::istringstream count("version: 1\nn_points: 4\n{\n1 1\n2 2\n3 3\n}\n");
	CHECK_THROWS_AS(read_pts(count), Error);
	std::istringstream header("{\n1 1\n2 2\n3 3\n}\n");
	CHECK_THROWS_AS(read_pts(header), Error);
	std::istringstream junk("n_points: 3\n{\n1 1\nx y\n3 3\n}\n");
	CHECK_THROWS_AS(read_pts(junk), Error);
	std::istringstream open("n_points: 3\n{\n1 1\n2 2\n3 3\n");
	CHECK_THROWS_AS(read_pts(open), Error);
}
