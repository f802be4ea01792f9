/*
 * iccr: cascaded-regression landmark tracking with online model updates
 * File: src/serialization.cpp
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
#include "iccr/serialization.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace iccr {

using nlohmann::json;

std::string tool_version()
{
#ifdef ICCR_VERSION
	return ICCR_VERSION;
#else
	return "unknown";
#endif
}

std::string fnv1a_hex(std::string_view bytes)
{
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (const unsigned char c : bytes) {
		h ^= c;
		h *= 0x100000001b3ULL;
	}
	static const char* digits = "0123456789abcdef";
	std::string out(16, '0');
	for (int i = 15; i >= 0; --i) {
		out[static_cast<std::size_t>(i)] = digits[h & 0xf];
		h >>= 4;
	}
	return out;
}

namespace {

json matrix_json(const Matrix& m)
{
	json data = json::array();
	for (Eigen::Index r = 0; r < m.rows(); ++r) {
		for (Eigen::Index c = 0; c < m.cols(); ++c) {
			data.push_back(m(r, c));
		}
	}
	return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from(const json& j)
{
	const auto rows = j.at("rows").get<Eigen::Index>();
	const auto cols = j.at("cols").get<Eigen::Index>();
	const auto& data = j.at("data");
	if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
		throw Error("model file: matrix payload size does not match its shape");
	}
	Matrix m(rows, cols);
	std::size_t k = 0;
	for (Eigen::Index r = 0; r < rows; ++r) {
		for (Eigen::Index c = 0; c < cols; ++c) {
			m(r, c) = data[k++].get<double>();
		}
	}
	return m;
}

json vector_json(const Vector& v) { return matrix_json(v); }

Vector vector_from(const json& j)
{
	Matrix m = matrix_from(j);
	if (m.cols() != 1 && m.size() != 0) {
		throw Error("model file: expected a column vector");
	}
	return Eigen::Map<const Vector>(m.data(), m.size());
}

json pdm_json(const PdmModel& pdm)
{
	return {{"mean_shape", vector_json(pdm.mean_shape.to_vector())},
			{"basis", matrix_json(pdm.basis)},
			{"eigenvalues", vector_json(pdm.eigenvalues)}};
}

PdmModel pdm_from(const json& j)
{
	PdmModel pdm;
	pdm.mean_shape = Shape::from_vector(vector_from(j.at("mean_shape")));
	pdm.basis = matrix_from(j.at("basis"));
	pdm.eigenvalues = vector_from(j.at("eigenvalues"));
	return pdm;
}

json extractor_json(const FeatureExtractor& e)
{
	json j = {{"kind", to_string(e.kind())}, {"num_landmarks", e.num_landmarks()}};
	switch (e.kind()) {
	case FeatureKind::PixelPatch:
		j["patch_radius"] = e.patch_radius();
		break;
	case FeatureKind::GradientHistogram:
		j["cell_size"] = e.cell_size();
		break;
	case FeatureKind::Analytic: {
		json lms = json::array();
		for (const auto& terms : e.analytic_map().landmarks) {
			json tj = json::array();
			for (const auto& t : terms) {
				tj.push_back({t.amplitude, t.wx, t.wy, t.phase, t.bx, t.by, t.offset});
			}
			lms.push_back(std::move(tj));
		}
		j["analytic"] = std::move(lms);
		break;
	}
	}
	return j;
}

FeatureExtractor extractor_from(const json& j)
{
	const auto kind = feature_kind_from_string(j.at("kind").get<std::string>());
	const auto n = j.at("num_landmarks").get<Eigen::Index>();
	switch (kind) {
	case FeatureKind::PixelPatch:
		return FeatureExtractor::pixel_patch(n, j.at("patch_radius").get<int>());
	case FeatureKind::GradientHistogram:
		return FeatureExtractor::gradient_histogram(n, j.at("cell_size").get<int>());
	case FeatureKind::Analytic: {
		AnalyticMap map;
		for (const auto& tj : j.at("analytic")) {
			std::vector<AnalyticTerm> terms;
			for (const auto& t : tj) {
				if (t.size() != 7) {
					throw Error("model file: analytic term needs 7 coefficients");
				}
				terms.push_back({t[0].get<double>(), t[1].get<double>(), t[2].get<double>(), t[3].get<double>(),
								 t[4].get<double>(), t[5].get<double>(), t[6].get<double>()});
			}
			map.landmarks.push_back(std::move(terms));
		}
		if (static_cast<Eigen::Index>(map.landmarks.size()) != n) {
			throw Error("model file: analytic map landmark count mismatch");
		}
		return FeatureExtractor::analytic(std::move(map));
	}
	}
	throw Error("model file: unknown extractor kind");
}

json pca_json(const FeaturePca& p)
{
	return {{"mean", vector_json(p.mean)},
			{"projection", matrix_json(p.projection)},
			{"explained_variance", vector_json(p.explained_variance)},
			{"total_variance", p.total_variance}};
}

FeaturePca pca_from(const json& j)
{
	FeaturePca p;
	p.mean = vector_from(j.at("mean"));
	p.projection = matrix_from(j.at("projection"));
	p.explained_variance = vector_from(j.at("explained_variance"));
	p.total_variance = j.at("total_variance").get<double>();
	return p;
}

json level_json(const CascadeLevel& l)
{
	json j = {{"regressor", matrix_json(l.regressor.matrix)},
			  {"stats", {{"mean", vector_json(l.stats.mean)}, {"covariance", matrix_json(l.stats.covariance)}}},
			  {"train_error_in", l.train_error_in},
			  {"train_error_out", l.train_error_out}};
	if (l.solver_state) {
		const auto& s = *l.solver_state;
		j["solver_state"] = {{"a", matrix_json(s.a)},		  {"b", matrix_json(s.b)},
							 {"v_inv", matrix_json(s.v_inv)}, {"sum_d", matrix_json(s.sum_d)},
							 {"ridge", s.ridge},			  {"count", s.count}};
	}
	if (l.sdm_state) {
		const auto& s = *l.sdm_state;
		j["sdm_state"] = {{"v", matrix_json(s.v)}, {"ridge", s.ridge}, {"count", s.count}};
	}
	return j;
}

CascadeLevel level_from(const json& j)
{
	CascadeLevel l;
	l.regressor.matrix = matrix_from(j.at("regressor"));
	l.stats.mean = vector_from(j.at("stats").at("mean"));
	l.stats.covariance = matrix_from(j.at("stats").at("covariance"));
	l.train_error_in = j.at("train_error_in").get<double>();
	l.train_error_out = j.at("train_error_out").get<double>();
	if (j.contains("solver_state")) {
		const auto& s = j.at("solver_state");
		CrSolverState st;
		st.a = matrix_from(s.at("a"));
		st.b = matrix_from(s.at("b"));
		st.v_inv = matrix_from(s.at("v_inv"));
		st.sum_d = matrix_from(s.at("sum_d"));
		st.ridge = s.at("ridge").get<double>();
		st.count = s.at("count").get<Eigen::Index>();
		l.solver_state = std::move(st);
	}
	if (j.contains("sdm_state")) {
		const auto& s = j.at("sdm_state");
		SdmSolverState st;
		st.v = matrix_from(s.at("v"));
		st.ridge = s.at("ridge").get<double>();
		st.count = s.at("count").get<Eigen::Index>();
		l.sdm_state = std::move(st);
	}
	return l;
}

json parse_or_throw(const std::string& text, const char* what)
{
	try {
		return json::parse(text);
	} catch (const json::parse_error& e) {
		throw Error(std::string(what) + ": " + e.what());
	}
}

} // namespace

std::string model_to_json(const CascadeModel& model, const ModelMetadata& meta)
{
	json config = parse_or_throw(meta.config_json.empty() ? "{}" : meta.config_json, "model config");
	const std::string canonical = config.dump();
	json levels = json::array();
	for (const auto& l : model.levels) {
		levels.push_back(level_json(l));
	}
	json j = {{"format", kModelFormat},
			  {"format_version", kModelFormatVersion},
			  {"tool_version", meta.tool_version.empty() ? tool_version() : meta.tool_version},
			  {"config", config},
			  {"config_hash", fnv1a_hex(canonical)},
			  {"method", to_string(model.method)},
			  {"pdm", pdm_json(model.pdm)},
			  {"extractor", extractor_json(model.extractor)},
			  {"pca", pca_json(model.pca)},
			  {"levels", std::move(levels)}};
	return j.dump();
}

CascadeModel model_from_json(const std::string& text, ModelMetadata* meta)
{
	const json j = parse_or_throw(text, "model file");
	try {
		if (j.at("format").get<std::string>() != kModelFormat) {
			throw Error("model file: wrong format tag");
		}
		if (j.at("format_version").get<int>() != kModelFormatVersion) {
			throw Error("model file: unsupported format version " + j.at("format_version").dump());
		}
		CascadeModel m;
		m.method = method_from_string(j.at("method").get<std::string>());
		m.pdm = pdm_from(j.at("pdm"));
		m.extractor = extractor_from(j.at("extractor"));
		m.pca = pca_from(j.at("pca"));
		for (const auto& lj : j.at("levels")) {
			m.levels.push_back(level_from(lj));
		}
		if (meta) {
			meta->tool_version = j.at("tool_version").get<std::string>();
			meta->config_json = j.at("config").dump();
			meta->config_hash = j.at("config_hash").get<std::string>();
		}
		m.validate();
		return m;
	} catch (const json::exception& e) {
		throw Error(std::string("model file: ") + e.what());
	} catch (const std::invalid_argument& e) {
		throw Error(std::string("model file: ") + e.what());
	}
}

void save_model(const CascadeModel& model, const std::filesystem::path& path, const ModelMetadata& meta)
{
	const std::string text = model_to_json(model, meta);
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw Error("cannot write " + path.string());
	}
	out << text << '\n';
	if (!out) {
		throw Error("failed writing " + path.string());
	}
}

CascadeModel load_model(const std::filesystem::path& path, ModelMetadata* meta)
{
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw Error("cannot open " + path.string());
	}
	std::stringstream ss;
	ss << in.rdbuf();
	return model_from_json(ss.str(), meta);
}

std::string pdm_to_json(const PdmModel& pdm)
{
	json j = pdm_json(pdm);
	j["format"] = "iccr-pdm";
	j["format_version"] = kModelFormatVersion;
	return j.dump();
}

PdmModel pdm_from_json(const std::string& text)
{
	const json j = parse_or_throw(text, "pdm file");
	try {
		if (j.at("format").get<std::string>() != "iccr-pdm") {
			throw Error("pdm file: wrong format tag");
		}
		return pdm_from(j);
	} catch (const json::exception& e) {
		throw Error(std::string("pdm file: ") + e.what());
	}
}

} // namespace iccr
