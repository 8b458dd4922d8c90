#include <cavg/nn/checkpoint.hpp>

#include <cavg/common/error.hpp>

#include <nlohmann/json.hpp>

#include <fstream>

namespace cavg::nn {

using nlohmann::json;

namespace {

	std::string count_mismatch(const char* which, std::size_t expected, std::size_t got) {
		return std::string(which) + ": expected " + std::to_string(expected) + " parameters, checkpoint has " +
			std::to_string(got);
	}

	json matrix_to_json(const Matrix& m) {
		json values = json::array();
		for (Eigen::Index i = 0; i < m.size(); ++i) {
			values.push_back(m.data()[i]);
		}
		return {{"shape", {m.rows(), m.cols()}}, {"values", std::move(values)}};
	}

	Matrix matrix_from_json(const json& j, const std::string& what) {
		const auto& shape = j.at("shape");
		const auto& values = j.at("values");
		const auto rows = shape.at(0).get<Eigen::Index>();
		const auto cols = shape.at(1).get<Eigen::Index>();
		if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(values.size()) != rows * cols) {
			fail(ErrorCode::IncompatibleCheckpoint, what + ": value count does not match its shape");
		}
		Matrix m(rows, cols);
		for (Eigen::Index i = 0; i < m.size(); ++i) {
			m.data()[i] = values[static_cast<std::size_t>(i)].get<double>();
		}
		return m;
	}

	json params_to_json(const ParameterSet& set) {
		json out = json::object();
		for (const auto& p : set) {
			out[p.name] = matrix_to_json(p.value);
		}
		return out;
	}

	void params_from_json(ParameterSet& set, const json& j, const char* which) {
		if (j.size() != set.size()) {
			fail(ErrorCode::IncompatibleCheckpoint, count_mismatch(which, set.size(), j.size()));
		}
		for (auto& p : set) {
			if (!j.contains(p.name)) {
				fail(ErrorCode::IncompatibleCheckpoint, std::string(which) + ": missing parameter " + p.name);
			}
			Matrix m = matrix_from_json(j.at(p.name), p.name);
			if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
				fail(ErrorCode::IncompatibleCheckpoint, "shape mismatch for parameter " + p.name);
			}
			p.value = std::move(m);
			p.grad.setZero();
		}
	}

	json moments_to_json(const std::vector<Matrix>& ms) {
		json out = json::array();
		for (const auto& m : ms) {
			out.push_back(matrix_to_json(m));
		}
		return out;
	}

	std::vector<Matrix> moments_from_json(const json& j) {
		std::vector<Matrix> out;
		for (const auto& m : j) {
			out.push_back(matrix_from_json(m, "optimizer moment"));
		}
		return out;
	}

	json adam_to_json(const Adam& a) {
		return {{"steps", a.steps()}, {"m", moments_to_json(a.first_moments())}, {"v", moments_to_json(a.second_moments())}};
	}

	Adam adam_from_json(const ParameterSet& set, const json& j) {
		Adam a(set);
		a.restore(j.at("steps").get<long>(), moments_from_json(j.at("m")), moments_from_json(j.at("v")));
		return a;
	}

	const char* activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

} // namespace

json to_json(const NetworkConfig& c) {
	return {
		{"obs_dim", c.obs_dim},
		{"hidden", c.hidden},
		{"heads", c.heads},
		{"activation", activation_name(c.activation)},
		{"attention", c.attention == AttentionNormalization::Softmax ? "softmax" : "ratio_softmax"},
		{"action_min", c.action_min},
		{"action_max", c.action_max},
	};
}

NetworkConfig network_config_from_json(const json& j) {
	NetworkConfig c;
	c.obs_dim = j.at("obs_dim").get<Eigen::Index>();
	c.hidden = j.at("hidden").get<Eigen::Index>();
	c.heads = j.at("heads").get<int>();
	const auto act = j.at("activation").get<std::string>();
	if (act == "tanh") {
		c.activation = Activation::Tanh;
	} else if (act == "relu") {
		c.activation = Activation::ReLU;
	} else {
		fail(ErrorCode::IncompatibleCheckpoint, "unknown activation '" + act + "'");
	}
	const auto att = j.at("attention").get<std::string>();
	if (att == "softmax") {
		c.attention = AttentionNormalization::Softmax;
	} else if (att == "ratio_softmax") {
		c.attention = AttentionNormalization::RatioSoftmax;
	} else {
		fail(ErrorCode::IncompatibleCheckpoint, "unknown attention normalization '" + att + "'");
	}
	c.action_min = j.at("action_min").get<double>();
	c.action_max = j.at("action_max").get<double>();
	return c;
}

void save_checkpoint(const std::filesystem::path& path, const ActorNetwork& actor, const CriticNetwork& critic,
	const TrainingState* training) {
	json doc = {
		{"format", kCheckpointFormat},
		{"version", kCheckpointVersion},
		{"architecture", to_json(actor.config())},
		{"actor", params_to_json(actor.params())},
		{"critic", params_to_json(critic.params())},
	};
	if (training != nullptr) {
		doc["training"] = {
			{"episode", training->episode},
			{"actor_opt", adam_to_json(training->actor_opt)},
			{"critic_opt", adam_to_json(training->critic_opt)},
		};
	}
	if (path.has_parent_path()) {
		std::filesystem::create_directories(path.parent_path());
	}
	std::ofstream out(path);
	if (!out) {
		fail(ErrorCode::IoError, "cannot write checkpoint " + path.string());
	}
	out << doc.dump() << '\n';
	if (!out) {
		fail(ErrorCode::IoError, "failed writing checkpoint " + path.string());
	}
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkConfig* expected) {
	std::ifstream in(path);
	if (!in) {
		fail(ErrorCode::IoError, "cannot open checkpoint " + path.string());
	}
	json doc;
	try {
		doc = json::parse(in);
	} catch (const json::exception& e) {
		fail(ErrorCode::ParseError, "checkpoint " + path.string() + ": " + e.what());
	}
	try {
		if (doc.value("format", "") != kCheckpointFormat) {
			fail(ErrorCode::IncompatibleCheckpoint, "not a checkpoint file: " + path.string());
		}
		if (doc.at("version").get<int>() != kCheckpointVersion) {
			fail(ErrorCode::IncompatibleCheckpoint, "unsupported checkpoint version");
		}
		const NetworkConfig config = network_config_from_json(doc.at("architecture"));
		if (expected != nullptr && !(config == *expected)) {
			fail(ErrorCode::IncompatibleCheckpoint,
				"checkpoint architecture " + to_json(config).dump() + " does not match " + to_json(*expected).dump());
		}
		Rng scratch(0);
		Checkpoint ck{ActorNetwork(config, scratch), CriticNetwork(config, scratch), std::nullopt};
		params_from_json(ck.actor.params(), doc.at("actor"), "actor");
		params_from_json(ck.critic.params(), doc.at("critic"), "critic");
		if (doc.contains("training")) {
			const auto& t = doc.at("training");
			ck.training = TrainingState{
				adam_from_json(ck.actor.params(), t.at("actor_opt")),
				adam_from_json(ck.critic.params(), t.at("critic_opt")),
				t.at("episode").get<int>(),
			};
		}
		return ck;
	} catch (const json::exception& e) {
		fail(ErrorCode::IncompatibleCheckpoint, "checkpoint " + path.string() + ": " + e.what());
	}
}

} // namespace cavg::nn
