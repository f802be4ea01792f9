/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/include/iccr/image.hpp
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

#include <filesystem>
#include <memory>
#include <vector>

namespace iccr {

/**
 * An image that can be evaluated at any real-valued pixel coordinate.
 * Pixel centres sit at integer coordinates; reads outside
 * [0, width−1] × [0, height−1] clamp to the border.
 */
class ImageLike
{
public:
	virtual ~ImageLike() = default;

	virtual int width() const = 0;
	virtual int height() const = 0;
	virtual double intensity(double x, double y) const = 0;

	bool contains(double x, double y) const
	{
		return x >= 0.0 && y >= 0.0 && x <= width() - 1.0 && y <= height() - 1.0;
	}
};

/// Row-major grayscale raster with bilinear interpolation.
class Image final : public ImageLike
{
public:
	Image() = default;
	Image(int width, int height, double fill = 0.0);

	int width() const override { return width_; }
	int height() const override { return height_; }
	double intensity(double x, double y) const override;

	double& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
	double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

	const std::vector<double>& pixels() const { return pixels_; }

private:
	int width_ = 0;
	int height_ = 0;
	std::vector<double> pixels_;
};

/// Samples any ImageLike at pixel centres.
Image rasterize(const ImageLike& image);

/**
 * 8-bit grayscale I/O. Intensities map linearly between [0, 1] and
 * [0, 255]; writing rounds and clamps.
 */
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

/// Dispatches on the file signature (PGM "P5"/"P2" or PNG).
Image read_image(const std::filesystem::path& path);

} // namespace iccr
