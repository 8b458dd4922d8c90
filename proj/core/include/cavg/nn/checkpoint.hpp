#pragma once

#include <cavg/nn/optimizer.hpp>
#include <cavg/nn/policy.hpp>

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <optional>

namespace cavg::nn {

inline constexpr const char* kCheckpointFormat = "cavg-checkpoint";
inline constexpr int kCheckpointVersion = 1;

nlohmann::json to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(const nlohmann::json& j);

struct TrainingState {
	Adam actor_opt;
	Adam critic_opt;
	/// Number of completed episodes when the checkpoint was written.
	int episode = 0;
};

struct Checkpoint {
	ActorNetwork actor;
	CriticNetwork critic;
	std::optional<TrainingState> training;
};

/// JSON: {format, version, architecture, actor:{name:{shape,values}}, critic:{...}, [training]}.
/// Doubles are written with round-trip precision, so load(save(x)) reproduces x bit for bit.
void save_checkpoint(const std::filesystem::path& path, const ActorNetwork& actor, const CriticNetwork& critic,
	const TrainingState* training = nullptr);

/// Throws IncompatibleCheckpoint on a format/version/architecture mismatch (including
/// against `expected` when given), IoError/ParseError on unreadable files.
Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkConfig* expected = nullptr);

} // namespace cavg::nn
