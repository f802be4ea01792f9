/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/include/iccr/pipeline.hpp
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
#include "iccr/synth.hpp"

#include <memory>
#include <span>
#include <vector>

namespace iccr {

/// Everything needed to go from annotated sequences to a cascade model.
struct TrainingConfig
{
	Method method = Method::Ccr;
	FeatureKind feature = FeatureKind::PixelPatch;
	int patch_radius = 8;
	int hog_cell = 4;
	Eigen::Index feature_dim = 128;
	Eigen::Index pdm_modes = 6; ///< ≤ 0 keeps 98% of the shape variance
	std::vector<int> gaps{1, 2, 3, 5};
	int frame_stride = 4; ///< every n-th frame becomes a training image
	int pca_perturbations = 3;
	CascadeOptions cascade;
};

/// One annotated sequence, frames in order.
struct AnnotatedSequence
{
	std::vector<std::shared_ptr<const ImageLike>> images;
	std::vector<Shape> shapes;
};

struct TrainingOutcome
{
	CascadeModel model;
	SequenceStats stats; ///< data term of the first level
	std::size_t training_images = 0;
};

/// PDM from all shapes, data term from frame differences, shared PCA, then the cascade.
TrainingOutcome train_from_sequences(std::span<const AnnotatedSequence> sequences, const TrainingConfig& config);

/// Views synthetic sequences as annotated ones.
std::vector<AnnotatedSequence> annotated(std::span<const SyntheticSequence> sequences);

} // namespace iccr
