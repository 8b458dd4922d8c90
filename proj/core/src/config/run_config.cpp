#include <cavg/config/run_config.hpp>

#include <cavg/common/error.hpp>
#include <cavg/sim/observation.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <type_traits>

namespace cavg::config {

using nlohmann::json;

namespace {

	[[noreturn]] void parse_error(const std::string& message) {
		fail(ErrorCode::ParseError, message);
	}

	// Reads the keys of one JSON object and remembers which were consumed, so
	// anything left over at finish() is a typo.
	class Reader {
	public:
		Reader(const json& j, std::string path)
			: j_(j)
			, path_(std::move(path)) {
			if (!j_.is_object()) {
				parse_error(fmt::format("'{}' must be an object", path_.empty() ? "<root>" : path_));
			}
		}

		std::string key_path(std::string_view key) const {
			return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
		}

		const json* find(std::string_view key) {
			seen_.insert(std::string(key));
			auto it = j_.find(std::string(key));
			return it == j_.end() ? nullptr : &*it;
		}

		template <class T>
		bool get(std::string_view key, T& out) {
			const json* v = find(key);
			if (!v) {
				return false;
			}
			out = convert<T>(*v, key_path(key));
			return true;
		}

		void finish() const {
			for (auto it = j_.begin(); it != j_.end(); ++it) {
				if (!seen_.contains(it.key())) {
					parse_error(fmt::format("unknown key '{}'", key_path(it.key())));
				}
			}
		}

	private:
		template <class T>
		static T convert(const json& v, const std::string& where) {
			if constexpr (std::is_same_v<T, bool>) {
				if (!v.is_boolean()) {
					parse_error(fmt::format("key '{}': expected true or false", where));
				}
				return v.get<bool>();
			} else if constexpr (std::is_same_v<T, std::string>) {
				if (!v.is_string()) {
					parse_error(fmt::format("key '{}': expected a string", where));
				}
				return v.get<std::string>();
			} else if constexpr (std::is_same_v<T, double>) {
				if (!v.is_number()) {
					parse_error(fmt::format("key '{}': expected a number", where));
				}
				return v.get<double>();
			} else if constexpr (std::is_same_v<T, std::uint64_t>) {
				if (!v.is_number_unsigned()) {
					parse_error(fmt::format("key '{}': expected a non-negative integer", where));
				}
				return v.get<std::uint64_t>();
			} else {
				static_assert(std::is_integral_v<T>);
				if (!v.is_number_integer()) {
					parse_error(fmt::format("key '{}': expected an integer", where));
				}
				const auto x = v.get<std::int64_t>();
				if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
					parse_error(fmt::format("key '{}': integer out of range", where));
				}
				return static_cast<T>(x);
			}
		}

		const json& j_;
		std::string path_;
		std::set<std::string> seen_;
	};

	sim::NetworkKind network_from_string(const std::string& s, const std::string& where) {
		if (s == "ring") {
			return sim::NetworkKind::Ring;
		}
		if (s == "figure_eight") {
			return sim::NetworkKind::FigureEight;
		}
		if (s == "merge") {
			return sim::NetworkKind::Merge;
		}
		parse_error(fmt::format("key '{}': expected ring, figure_eight or merge, got '{}'", where, s));
	}

	std::string network_name(sim::NetworkKind k) {
		switch (k) {
		case sim::NetworkKind::Ring:
			return "ring";
		case sim::NetworkKind::FigureEight:
			return "figure_eight";
		case sim::NetworkKind::Merge:
			return "merge";
		}
		return "ring";
	}

	std::string scheme_name(graph::SchemeKind k) {
		switch (k) {
		case graph::SchemeKind::GaussianSpeedField:
			return "both";
		case graph::SchemeKind::PositionOnly:
			return "position";
		case graph::SchemeKind::VelocityOnly:
			return "velocity";
		}
		return "both";
	}

	graph::SchemeKind scheme_from_string(const std::string& s, const std::string& where) {
		if (s == "both") {
			return graph::SchemeKind::GaussianSpeedField;
		}
		if (s == "position") {
			return graph::SchemeKind::PositionOnly;
		}
		if (s == "velocity") {
			return graph::SchemeKind::VelocityOnly;
		}
		parse_error(fmt::format("key '{}': expected both, position or velocity, got '{}'", where, s));
	}

	void read_bounds(Reader& r, std::string_view key, sim::AccelBounds& out) {
		const json* v = r.find(key);
		if (!v) {
			return;
		}
		if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
			parse_error(fmt::format("key '{}': expected [min, max]", r.key_path(key)));
		}
		out.min = (*v)[0].get<double>();
		out.max = (*v)[1].get<double>();
	}

	void read_scenario(const json& j, RunConfig& c, bool& v0_set, bool& spawn_set) {
		Reader r(j, "scenario");
		std::string network;
		r.get("network", network); // consumed by the caller already
		auto& n = c.scenario.network;
		r.get("ring_length", n.ring_length);
		r.get("loop_length", n.loop_length);
		r.get("conflict_start", n.conflict_start);
		r.get("conflict_length", n.conflict_length);
		r.get("right_of_way_range", n.right_of_way_range);
		r.get("highway_length", n.highway_length);
		r.get("ramp_length", n.ramp_length);
		r.get("merge_point", n.merge_point);
		r.get("inflow_main", n.inflow_main);
		r.get("inflow_ramp", n.inflow_ramp);
		r.get("cav_share", n.cav_share);
		spawn_set = r.get("spawn_speed", n.spawn_speed);
		r.get("vehicle_length", n.vehicle_length);

		r.get("n_human", c.n_human);
		r.get("n_cav", c.n_cav);
		r.get("target_speed_kmh", c.target_speed_kmh);
		r.get("horizon", c.horizon);
		r.get("warmup_steps", c.warmup_steps);

		auto& p = c.scenario.params;
		r.get("dt", p.dt);
		std::string noise;
		if (r.get("noise", noise)) {
			if (noise == "uniform") {
				p.noise = sim::NoiseDistribution::Uniform;
			} else if (noise == "gaussian") {
				p.noise = sim::NoiseDistribution::Gaussian;
			} else {
				parse_error(fmt::format("key 'scenario.noise': expected uniform or gaussian, got '{}'", noise));
			}
		}
		r.get("noise_mag", p.idm.noise_mag);
		if (const json* idm = r.find("idm")) {
			Reader ir(*idm, "scenario.idm");
			v0_set = ir.get("v0", p.idm.v0);
			ir.get("time_headway", p.idm.time_headway);
			ir.get("a_max", p.idm.a_max);
			ir.get("b_comfort", p.idm.b_comfort);
			ir.get("delta", p.idm.delta);
			ir.get("s0", p.idm.s0);
			ir.finish();
		}
		read_bounds(r, "cav_accel", p.cav);
		read_bounds(r, "human_accel", p.human);
		r.get("safety_clamp", p.safety_clamp);
		r.finish();
	}

	json bounds_json(const sim::AccelBounds& b) { return json::array({b.min, b.max}); }

} // namespace

RunConfig defaults_for(sim::NetworkKind kind) {
	RunConfig c;
	c.scenario.network.kind = kind;
	c.scenario.params.safety_clamp = true;
	switch (kind) {
	case sim::NetworkKind::Ring:
		c.n_human = 6;
		c.n_cav = 16;
		c.horizon = 3000;
		break;
	case sim::NetworkKind::FigureEight:
		c.n_human = 7;
		c.n_cav = 7;
		c.horizon = 1500;
		break;
	case sim::NetworkKind::Merge:
		c.n_human = 0;
		c.n_cav = 0;
		c.horizon = 600;
		c.warmup_steps = 1500;
		c.reward.kind = rl::RewardKind::Merge;
		c.reward.w_v = 1.0;
		break;
	}
	return c;
}

void RunConfig::validate() const {
	try {
		to_env_config(*this).validate();
		nn::NetworkConfig net = network;
		net.validate();
		ppo.validate();
	} catch (const Error& e) {
		if (e.code() == ErrorCode::ValidationError) {
			throw;
		}
		fail(ErrorCode::ValidationError, e.what());
	}
	if (!(target_speed_kmh > 0.0)) {
		fail(ErrorCode::ValidationError, "scenario.target_speed_kmh must be > 0");
	}
	if (scenario.network.closed() && n_human + n_cav < 1) {
		fail(ErrorCode::ValidationError, "closed network needs at least one vehicle");
	}
	if (eval_episodes < 1) {
		fail(ErrorCode::ValidationError, "eval.episodes must be >= 1");
	}
	if (seeds.empty()) {
		fail(ErrorCode::ValidationError, "seeds must not be empty");
	}
	if (output_dir.empty()) {
		fail(ErrorCode::ValidationError, "output_dir must not be empty");
	}
}

RunConfig from_json(const json& j) {
	Reader top(j, "");
	sim::NetworkKind kind = sim::NetworkKind::Ring;
	const json* scenario = top.find("scenario");
	if (scenario && scenario->is_object() && scenario->contains("network")) {
		const auto& v = scenario->at("network");
		if (!v.is_string()) {
			parse_error("key 'scenario.network': expected a string");
		}
		kind = network_from_string(v.get<std::string>(), "scenario.network");
	}
	RunConfig c = defaults_for(kind);

	bool v0_set = false;
	bool spawn_set = false;
	if (scenario) {
		read_scenario(*scenario, c, v0_set, spawn_set);
	}
	const double vt = c.target_speed();
	if (!v0_set) {
		c.scenario.params.idm.v0 = vt;
	}
	if (!spawn_set) {
		c.scenario.network.spawn_speed = vt;
	}

	if (const json* reward = top.find("reward")) {
		Reader r(*reward, "reward");
		r.get("w_v", c.reward.w_v);
		r.get("w_a", c.reward.w_a);
		r.get("accel_threshold", c.reward.accel_threshold);
		r.get("w_h", c.reward.w_h);
		r.get("t_min", c.reward.t_min);
		r.get("headway_cap", c.reward.headway_cap);
		r.finish();
	}
	c.reward.target_speed = vt;

	if (const json* g = top.find("graph")) {
		Reader r(*g, "graph");
		std::string scheme;
		if (r.get("scheme", scheme)) {
			c.scheme.kind = scheme_from_string(scheme, "graph.scheme");
		}
		r.get("scan_scale", c.scan_scale);
		r.get("length_scale", c.scheme.kernel.length_scale);
		r.get("amplitude", c.scheme.kernel.amplitude);
		r.get("epsilon", c.scheme.epsilon);
		r.finish();
	}
	c.scheme.target_speed = vt;

	if (const json* n = top.find("nn")) {
		Reader r(*n, "nn");
		r.get("hidden", c.network.hidden);
		r.get("heads", c.network.heads);
		std::string s;
		if (r.get("activation", s)) {
			if (s == "tanh") {
				c.network.activation = nn::Activation::Tanh;
			} else if (s == "relu") {
				c.network.activation = nn::Activation::ReLU;
			} else {
				parse_error(fmt::format("key 'nn.activation': expected tanh or relu, got '{}'", s));
			}
		}
		if (r.get("attention", s)) {
			if (s == "softmax") {
				c.network.attention = nn::AttentionNormalization::Softmax;
			} else if (s == "ratio_softmax") {
				c.network.attention = nn::AttentionNormalization::RatioSoftmax;
			} else {
				parse_error(fmt::format("key 'nn.attention': expected softmax or ratio_softmax, got '{}'", s));
			}
		}
		r.finish();
	}
	c.network.obs_dim = static_cast<Eigen::Index>(sim::kObservationSize);
	c.network.action_min = c.scenario.params.cav.min;
	c.network.action_max = c.scenario.params.cav.max;

	if (const json* p = top.find("ppo")) {
		Reader r(*p, "ppo");
		r.get("gamma", c.ppo.gamma);
		r.get("clip", c.ppo.clip);
		r.get("batch_size", c.ppo.batch_size);
		r.get("epochs", c.ppo.epochs);
		r.get("minibatch_size", c.ppo.minibatch_size);
		r.get("actor_lr", c.ppo.actor_lr);
		r.get("critic_lr", c.ppo.critic_lr);
		r.get("max_grad_norm", c.ppo.max_grad_norm);
		r.get("normalize_advantages", c.ppo.normalize_advantages);
		r.get("episodes", c.ppo.episodes);
		r.get("checkpoint_every", c.ppo.checkpoint_every);
		r.get("nan_retries", c.ppo.nan_retries);
		r.finish();
	}

	if (const json* e = top.find("eval")) {
		Reader r(*e, "eval");
		r.get("episodes", c.eval_episodes);
		r.finish();
	}

	if (const json* s = top.find("seeds")) {
		if (!s->is_array()) {
			parse_error("key 'seeds': expected a list of non-negative integers");
		}
		c.seeds.clear();
		for (const auto& v : *s) {
			if (!v.is_number_unsigned()) {
				parse_error("key 'seeds': expected a list of non-negative integers");
			}
			c.seeds.push_back(v.get<std::uint64_t>());
		}
	}
	top.get("output_dir", c.output_dir);
	top.finish();

	c.validate();
	return c;
}

RunConfig parse_config_text(std::string_view text, std::string_view origin) {
	json j;
	try {
		j = json::parse(text);
	} catch (const json::parse_error& e) {
		// Translate the byte offset into line:column.
		std::size_t line = 1;
		std::size_t col = 1;
		const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
		for (std::size_t i = 0; i < end; ++i) {
			if (text[i] == '\n') {
				++line;
				col = 1;
			} else {
				++col;
			}
		}
		parse_error(fmt::format("{}:{}:{}: malformed JSON", origin, line, col));
	}
	try {
		return from_json(j);
	} catch (const Error& e) {
		if (e.code() == ErrorCode::ParseError) {
			parse_error(fmt::format("{}: {}", origin, e.what()));
		}
		throw;
	}
}

RunConfig parse_config(const std::filesystem::path& path) {
	std::ifstream in(path);
	if (!in) {
		fail(ErrorCode::IoError, "cannot read config " + path.string());
	}
	std::stringstream ss;
	ss << in.rdbuf();
	return parse_config_text(ss.str(), path.string());
}

json to_json(const RunConfig& c) {
	const auto& n = c.scenario.network;
	const auto& p = c.scenario.params;
	json scenario = {
		{"network", network_name(n.kind)},
		{"ring_length", n.ring_length},
		{"loop_length", n.loop_length},
		{"conflict_start", n.conflict_start},
		{"conflict_length", n.conflict_length},
		{"right_of_way_range", n.right_of_way_range},
		{"highway_length", n.highway_length},
		{"ramp_length", n.ramp_length},
		{"merge_point", n.merge_point},
		{"inflow_main", n.inflow_main},
		{"inflow_ramp", n.inflow_ramp},
		{"cav_share", n.cav_share},
		{"spawn_speed", n.spawn_speed},
		{"vehicle_length", n.vehicle_length},
		{"n_human", c.n_human},
		{"n_cav", c.n_cav},
		{"target_speed_kmh", c.target_speed_kmh},
		{"horizon", c.horizon},
		{"warmup_steps", c.warmup_steps},
		{"dt", p.dt},
		{"noise", p.noise == sim::NoiseDistribution::Uniform ? "uniform" : "gaussian"},
		{"noise_mag", p.idm.noise_mag},
		{"idm",
			{{"v0", p.idm.v0}, {"time_headway", p.idm.time_headway}, {"a_max", p.idm.a_max},
				{"b_comfort", p.idm.b_comfort}, {"delta", p.idm.delta}, {"s0", p.idm.s0}}},
		{"cav_accel", bounds_json(p.cav)},
		{"human_accel", bounds_json(p.human)},
		{"safety_clamp", p.safety_clamp},
	};
	json reward = {{"w_v", c.reward.w_v}, {"w_a", c.reward.w_a}, {"accel_threshold", c.reward.accel_threshold},
		{"w_h", c.reward.w_h}, {"t_min", c.reward.t_min}, {"headway_cap", c.reward.headway_cap}};
	json graph = {{"scheme", scheme_name(c.scheme.kind)}, {"scan_scale", c.scan_scale},
		{"length_scale", c.scheme.kernel.length_scale}, {"amplitude", c.scheme.kernel.amplitude},
		{"epsilon", c.scheme.epsilon}};
	json net = {{"hidden", c.network.hidden}, {"heads", c.network.heads},
		{"activation", c.network.activation == nn::Activation::Tanh ? "tanh" : "relu"},
		{"attention", c.network.attention == nn::AttentionNormalization::Softmax ? "softmax" : "ratio_softmax"}};
	json ppo = {{"gamma", c.ppo.gamma}, {"clip", c.ppo.clip}, {"batch_size", c.ppo.batch_size},
		{"epochs", c.ppo.epochs}, {"minibatch_size", c.ppo.minibatch_size}, {"actor_lr", c.ppo.actor_lr},
		{"critic_lr", c.ppo.critic_lr}, {"max_grad_norm", c.ppo.max_grad_norm},
		{"normalize_advantages", c.ppo.normalize_advantages}, {"episodes", c.ppo.episodes},
		{"checkpoint_every", c.ppo.checkpoint_every}, {"nan_retries", c.ppo.nan_retries}};
	return {{"scenario", std::move(scenario)}, {"reward", std::move(reward)}, {"graph", std::move(graph)},
		{"nn", std::move(net)}, {"ppo", std::move(ppo)}, {"eval", {{"episodes", c.eval_episodes}}},
		{"seeds", c.seeds}, {"output_dir", c.output_dir}};
}

std::string dump(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

void write_config(const RunConfig& config, const std::filesystem::path& path) {
	if (path.has_parent_path()) {
		std::filesystem::create_directories(path.parent_path());
	}
	std::ofstream out(path);
	if (!out) {
		fail(ErrorCode::IoError, "cannot write " + path.string());
	}
	out << dump(config);
}

std::string config_hash(const RunConfig& config) {
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (unsigned char ch : to_json(config).dump()) {
		h ^= ch;
		h *= 0x100000001b3ULL;
	}
	return fmt::format("{:016x}", h);
}

rl::EnvConfig to_env_config(const RunConfig& c) {
	rl::EnvConfig env;
	env.scenario = std::make_shared<const sim::Scenario>(c.scenario);
	env.n_human = c.n_human;
	env.n_cav = c.n_cav;
	env.horizon = c.horizon;
	env.warmup_steps = c.warmup_steps;
	env.target_speed = c.target_speed();
	env.scheme = c.scheme;
	env.scan_scale = c.scan_scale;
	env.reward = c.reward;
	return env;
}

rl::TrainConfig to_train_config(const RunConfig& c, std::uint64_t seed) {
	rl::TrainConfig t;
	t.env = to_env_config(c);
	t.network = c.network;
	t.ppo = c.ppo;
	t.seed = seed;
	return t;
}

} // namespace cavg::config
