/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/src/pipeline.cpp
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
#include "iccr/pipeline.hpp"

#include <stdexcept>

namespace iccr {

TrainingOutcome train_from_sequences(std::span<const AnnotatedSequence> sequences, const TrainingConfig& config)
{
	if (sequences.empty()) {
		throw std::invalid_argument("train_from_sequences: no sequences");
	}
	if (config.frame_stride < 1) {
		throw std::invalid_argument("train_from_sequences: frame stride must be positive");
	}
	std::vector<Shape> all;
	std::vector<std::vector<Shape>> per_sequence;
	for (const auto& seq : sequences) {
		if (seq.images.size() != seq.shapes.size()) {
			throw std::invalid_argument("train_from_sequences: image and shape counts differ");
		}
		all.insert(all.end(), seq.shapes.begin(), seq.shapes.end());
		per_sequence.push_back(seq.shapes);
	}
	PdmTrainOptions po;
	if (config.pdm_modes > 0) {
		po.fixed_modes = config.pdm_modes;
	}
	TrainingOutcome out;
	const PdmModel pdm = train_pdm(all, po);
	out.stats = estimate_stats_from_shapes(pdm, per_sequence, config.gaps);

	std::vector<TrainingImage> images;
	for (const auto& seq : sequences) {
		for (std::size_t t = 0; t < seq.images.size(); t += static_cast<std::size_t>(config.frame_stride)) {
			images.push_back({seq.images[t], decompose(pdm, seq.shapes[t])});
		}
	}
	out.training_images = images.size();

	FeatureExtractor extractor;
	switch (config.feature) {
	case FeatureKind::PixelPatch:
		extractor = FeatureExtractor::pixel_patch(pdm.num_landmarks(), config.patch_radius);
		break;
	case FeatureKind::GradientHistogram:
		extractor = FeatureExtractor::gradient_histogram(pdm.num_landmarks(), config.hog_cell);
		break;
	case FeatureKind::Analytic:
		throw std::invalid_argument("train_from_sequences: analytic features need an explicit map");
	}
	const FeaturePca pca = fit_training_pca(images, extractor, pdm, out.stats.stats, config.feature_dim,
											config.pca_perturbations, config.cascade.seed, config.cascade.jobs);
	out.model = config.method == Method::Ccr ? train_ccr(images, pdm, extractor, pca, out.stats.stats, config.cascade)
											 : train_sdm(images, pdm, extractor, pca, out.stats.stats, config.cascade);
	return out;
}

std::vector<AnnotatedSequence> annotated(std::span<const SyntheticSequence> sequences)
{
	std::vector<AnnotatedSequence> out;
	for (const auto& seq : sequences) {
		AnnotatedSequence a;
		for (const auto& f : seq.frames) {
			a.images.push_back(f.image);
			a.shapes.push_back(f.shape);
		}
		out.push_back(std::move(a));
	}
	return out;
}

} // namespace iccr
