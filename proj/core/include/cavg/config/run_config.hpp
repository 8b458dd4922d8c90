#pragma once

#include <cavg/eval/evaluate.hpp>
#include <cavg/rl/ppo.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cavg::config {

/// Fully resolved run configuration: every default is filled in at parse time,
/// so emitting and re-parsing is the identity.
struct RunConfig {
	sim::Scenario scenario;
	int n_human = 6;
	int n_cav = 16;
	double target_speed_kmh = 30.0;
	int horizon = 3000;
	int warmup_steps = 0;

	rl::RewardSpec reward;
	graph::AdjacencyScheme scheme;
	double scan_scale = 30.0;
	nn::NetworkConfig network;
	rl::PpoConfig ppo;
	int eval_episodes = 10;

	std::vector<std::uint64_t> seeds{0};
	std::string output_dir = "runs/default";

	double target_speed() const noexcept { return target_speed_kmh / 3.6; }

	/// Throws ValidationError naming the violated invariant.
	void validate() const;
	bool operator==(const RunConfig&) const = default;
};

/// Defaults for a network kind (counts, horizon, warm-up, reward weights).
RunConfig defaults_for(sim::NetworkKind kind);

/// ParseError (syntax with line/column, unknown or mistyped key with its path)
/// or ValidationError.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(std::string_view text, std::string_view origin = "<config>");
RunConfig from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunConfig& config);
/// Pretty-printed effective config.
std::string dump(const RunConfig& config);
void write_config(const RunConfig& config, const std::filesystem::path& path);

/// FNV-1a 64 over the compact JSON dump, as 16 hex digits.
std::string config_hash(const RunConfig& config);

rl::EnvConfig to_env_config(const RunConfig& config);
rl::TrainConfig to_train_config(const RunConfig& config, std::uint64_t seed);

} // namespace cavg::config
