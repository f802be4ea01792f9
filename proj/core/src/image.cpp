/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/src/image.cpp
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
#include "iccr/image.hpp"
#include "iccr/linalg.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace iccr {

Image::Image(int width, int height, double fill) : width_(width), height_(height)
{
	if (width <= 0 || height <= 0) {
		throw std::invalid_argument("Image: dimensions must be positive");
	}
	pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

double Image::intensity(double x, double y) const
{
	x = std::clamp(x, 0.0, width_ - 1.0);
	y = std::clamp(y, 0.0, height_ - 1.0);
	const int x0 = std::min(static_cast<int>(x), width_ - 1);
	const int y0 = std::min(static_cast<int>(y), height_ - 1);
	const int x1 = std::min(x0 + 1, width_ - 1);
	const int y1 = std::min(y0 + 1, height_ - 1);
	const double fx = x - x0;
	const double fy = y - y0;
	const double top = (1.0 - fx) * at(x0, y0) + fx * at(x1, y0);
	const double bottom = (1.0 - fx) * at(x0, y1) + fx * at(x1, y1);
	return (1.0 - fy) * top + fy * bottom;
}

Image rasterize(const ImageLike& image)
{
	Image out(image.width(), image.height());
	for (int y = 0; y < out.height(); ++y) {
		for (int x = 0; x < out.width(); ++x) {
			out.at(x, y) = image.intensity(x, y);
		}
	}
	return out;
}

namespace {

std::string next_token(std::istream& in)
{
	std::string tok;
	char c = 0;
	while (in.get(c)) {
		if (c == '#') {
			std::string rest;
			std::getline(in, rest);
			continue;
		}
		if (std::isspace(static_cast<unsigned char>(c))) {
			if (!tok.empty()) {
				break;
			}
			continue;
		}
		tok.push_back(c);
	}
	return tok;
}

int parse_int(const std::string& tok, const std::filesystem::path& path)
{
	try {
		return std::stoi(tok);
	} catch (const std::exception&) {
		throw Error("malformed PGM header in " + path.string());
	}
}

} // namespace

Image read_pgm(const std::filesystem::path& path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw Error("cannot open " + path.string());
	}
	const std::string magic = next_token(in);
	if (magic != "P5" && magic != "P2") {
		throw Error("not a PGM file: " + path.string());
	}
	const int w = parse_int(next_token(in), path);
	const int h = parse_int(next_token(in), path);
	const int maxval = parse_int(next_token(in), path);
	if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
		throw Error("unsupported PGM (8-bit grayscale only): " + path.string());
	}
	Image img(w, h);
	if (magic == "P5") {
		std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h);
		in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
		if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
			throw Error("truncated PGM data in " + path.string());
		}
		for (int y = 0; y < h; ++y) {
			for (int x = 0; x < w; ++x) {
				img.at(x, y) = buf[static_cast<std::size_t>(y) * w + x] / static_cast<double>(maxval);
			}
		}
	} else {
		for (int y = 0; y < h; ++y) {
			for (int x = 0; x < w; ++x) {
				const std::string tok = next_token(in);
				if (tok.empty()) {
					throw Error("truncated PGM data in " + path.string());
				}
				img.at(x, y) = parse_int(tok, path) / static_cast<double>(maxval);
			}
		}
	}
	return img;
}

void write_pgm(const Image& image, const std::filesystem::path& path)
{
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw Error("cannot write " + path.string());
	}
	out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
	std::vector<unsigned char> buf(static_cast<std::size_t>(image.width()) * image.height());
	for (int y = 0; y < image.height(); ++y) {
		for (int x = 0; x < image.width(); ++x) {
			const double v = std::clamp(image.at(x, y), 0.0, 1.0);
			buf[static_cast<std::size_t>(y) * image.width() + x] =
				static_cast<unsigned char>(std::lround(v * 255.0));
		}
	}
	out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
	if (!out) {
		throw Error("failed writing " + path.string());
	}
}

Image read_png(const std::filesystem::path& path)
{
	png_image png{};
	png.version = PNG_IMAGE_VERSION;
	if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
		throw Error("cannot read PNG " + path.string() + ": " + png.message);
	}
	png.format = PNG_FORMAT_GRAY;
	std::vector<png_byte> buf(PNG_IMAGE_SIZE(png));
	if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
		const std::string msg = png.message;
		png_image_free(&png);
		throw Error("cannot decode PNG " + path.string() + ": " + msg);
	}
	const int w = static_cast<int>(png.width);
	const int h = static_cast<int>(png.height);
	Image img(w, h);
	for (int y = 0; y < h; ++y) {
		for (int x = 0; x < w; ++x) {
			img.at(x, y) = buf[static_cast<std::size_t>(y) * w + x] / 255.0;
		}
	}
	return img;
}

Image read_image(const std::filesystem::path& path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw Error("cannot open " + path.string());
	}
	unsigned char sig[8] = {};
	in.read(reinterpret_cast<char*>(sig), 8);
	if (in.gcount() >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '2')) {
		return read_pgm(path);
	}
	static constexpr unsigned char kPng[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
	if (in.gcount() == 8 && std::equal(sig, sig + 8, kPng)) {
		return read_png(path);
	}
	throw Error("unrecognised image format: " + path.string());
}

} // namespace iccr
