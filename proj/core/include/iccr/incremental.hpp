/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: core/include/iccr/incremental.hpp
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
#include "iccr/regression.hpp"

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace iccr {

/// One level of incremental SDM: R_T and V_T = (X_T X_Tᵀ + λI)⁻¹.
struct IsdmLevelState
{
	Matrix regressor;
	Matrix v;
};

/**
 * Rank-K update with new samples X_S (columns) and targets Y_S:
 *   U = (I_K + X_Sᵀ V_T X_S)⁻¹,  Q = X_S U X_Sᵀ V_T,
 *   V ← V_T − V_T Q,  R ← R_T − R_T Q + Y_S X_Sᵀ V.
 * K = 0 leaves the state untouched; non-finite input throws and leaves it unchanged.
 */
void isdm_update(IsdmLevelState& state, const Matrix& xs, const Matrix& ys);

/**
 * Woodbury update of V⁻¹ with one functional block D_S ((d+1)×(m+1)):
 *   V⁻¹ ← V⁻¹ − V⁻¹D_S (B⁻¹ + D_SᵀV⁻¹D_S)⁻¹ D_SᵀV⁻¹,
 * then sum_D += D_S and R = A·sum_Dᵀ·V⁻¹. Throws Error("data term not
 * invertible") when B is singular; on any error the inputs are unchanged.
 */
void iccr_update(CrSolverState& state, LinearRegressor& regressor, const Matrix& ds);

/// Same update with a precomputed B⁻¹ (see data_term_b_inverse).
void iccr_update(CrSolverState& state, LinearRegressor& regressor, const Matrix& ds, const Matrix& b_inv);

/// B⁻¹ from the block form, via Σ⁻¹; throws Error("data term not invertible").
Matrix data_term_b_inverse(const Matrix& b);

/// Dimension of the matrix inverted inside iccr_update.
inline Eigen::Index iccr_inner_dim(const CrSolverState& state) { return state.b.rows(); }

struct FitDiagnostics
{
	double reconstruction_score = 0.0;
	std::optional<double> true_error;
};

class UpdateGate
{
public:
	enum class Kind { Threshold, Always, Never, Pluggable };
	using Predicate = std::function<bool(const FitDiagnostics&)>;

	/// Accepts when the true error (if known) or else the reconstruction score is ≤ threshold.
	static UpdateGate threshold(double threshold = 0.1);
	static UpdateGate always();
	static UpdateGate never();
	static UpdateGate pluggable(Predicate predicate);

	Kind kind() const { return kind_; }
	double threshold_value() const { return threshold_; }

	bool accept(const FitDiagnostics& diagnostics) const;

private:
	UpdateGate(Kind kind, double threshold, Predicate predicate);

	Kind kind_;
	double threshold_;
	Predicate predicate_;
};

std::string to_string(UpdateGate::Kind kind);
UpdateGate::Kind gate_kind_from_string(const std::string& s);

bool gate_accept(const UpdateGate& gate, const FitDiagnostics& diagnostics);

enum class IncrementalMode { None, Iccr, Isdm };

std::string to_string(IncrementalMode mode);
IncrementalMode incremental_mode_from_string(const std::string& s);

struct IncrementalOptions
{
	IncrementalMode mode = IncrementalMode::None;
	int isdm_samples = 10;
	double delta_x = 1.0;
	/// Every this many updates V⁻¹ is re-inverted from the accumulated V (0 = never).
	int reinvert_every = 0;
	std::uint64_t seed = 0;
};

struct UpdateRecord
{
	bool applied = false;
	std::uint64_t extractions = 0;
	double extraction_seconds = 0.0;
	double update_seconds = 0.0;
	std::string rejected_reason;
};

/**
 * Per-sequence online learner over a CascadeModel. Levels carry their own
 * solver state and statistics; iCCR shares one block D_S across levels,
 * iSDM draws K samples per level around the tracked parameters.
 */
class ModelUpdater
{
public:
	ModelUpdater(const CascadeModel& model, IncrementalOptions options);

	/// Applies one tracked frame to `model` in place.
	UpdateRecord update(CascadeModel& model, const ImageLike& image, const ShapeParams& tracked, std::uint64_t frame);

	int updates_applied() const { return updates_; }

private:
	IncrementalOptions options_;
	std::vector<Matrix> b_inv_;
	std::vector<Matrix> v_direct_; // accumulated V, kept only when re-inversion is enabled
	int updates_ = 0;
};

/**
 * Immutable model snapshots: readers take a shared pointer and keep using it
 * while a writer publishes a replacement.
 */
class ModelSnapshots
{
public:
	explicit ModelSnapshots(std::shared_ptr<const CascadeModel> initial);

	std::shared_ptr<const CascadeModel> current() const;
	void publish(std::shared_ptr<const CascadeModel> next);
	std::uint64_t version() const;

private:
	mutable std::mutex mutex_;
	std::shared_ptr<const CascadeModel> current_;
	std::uint64_t version_ = 0;
};

} // namespace iccr
