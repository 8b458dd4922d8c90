#pragma once

#include <cavg/nn/checkpoint.hpp>
#include <cavg/nn/optimizer.hpp>
#include <cavg/nn/policy.hpp>
#include <cavg/rl/environment.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace cavg::rl {

struct PpoConfig {
	double gamma = 0.99;
	double clip = 0.2;
	/// Step transitions (one per simulator step, all agents) per update.
	int batch_size = 2048;
	int epochs = 10;
	/// Step transitions per minibatch.
	int minibatch_size = 64;
	double actor_lr = 3e-4;
	double critic_lr = 1e-3;
	double max_grad_norm = 0.5;
	bool normalize_advantages = true;
	int episodes = 200;
	/// Save a checkpoint every k episodes; 0 disables.
	int checkpoint_every = 10;
	/// Retries with a halved step size before NanGradient is raised.
	int nan_retries = 3;

	void validate() const;
	bool operator==(const PpoConfig&) const = default;
};

/// Everything recorded for one simulator step (all agents present at that step).
struct Transition {
	std::vector<int> agent_ids;
	Matrix obs;            // S_t, N x obs_dim
	nn::GraphInputs graph; // M_t, used for both S_t and S_{t+1}
	Vector actions;
	Vector old_log_prob;
	Vector rewards;   // team reward per agent
	Matrix next_obs;  // rows aligned with agent_ids
	Vector continues; // 1 if the agent is still live after the step and the episode goes on
	bool done = false;

	// Filled by compute_advantages.
	Vector values;
	Vector returns;
	Vector advantages;

	Eigen::Index agents() const noexcept { return obs.rows(); }
};

struct EpisodeStats {
	double ret = 0.0;
	double mean_speed = 0.0;
	double mean_abs_accel = 0.0;
	int length = 0;
	bool collided = false;
};

/// Accumulates per-step metrics into EpisodeStats.
class StatsAccumulator {
public:
	void add(const sim::SimState& post_step, double reward, bool collided);
	EpisodeStats result() const;

private:
	double ret_ = 0.0;
	double speed_ = 0.0;
	double accel_ = 0.0;
	int n_ = 0;
	bool collided_ = false;
};

/// Action-selection policy during a rollout.
enum class ActionMode { Sample, Mean };

struct StepRecord {
	std::optional<Transition> transition; // empty when no agent was present
	StepOutcome outcome;
};

/// Observes, acts and steps `env` once.
StepRecord act_and_step(nn::ActorNetwork& actor, Environment& env, Rng& policy_rng, ActionMode mode);

struct Rollout {
	std::vector<Transition> transitions;
	EpisodeStats stats;
};

/// Resets `env` with `episode_seed` and runs one episode (<= horizon, stops on collision).
Rollout collect_rollout(nn::ActorNetwork& actor, Environment& env, std::uint64_t episode_seed, Rng& policy_rng,
	ActionMode mode = ActionMode::Sample);

using ValueFn = std::function<Vector(const Matrix& obs, const nn::GraphInputs& graph)>;

ValueFn critic_value_fn(nn::CriticNetwork& critic);

/// Fills values, returns (discounted reward-to-go) and advantages = returns - values,
/// un-normalised. `transitions` must be in time order; a trailing transition that is
/// not `done` bootstraps with V(S', M_t).
void compute_advantages(std::span<Transition> transitions, const ValueFn& value, const PpoConfig& config);

/// Zero mean, unit spread across every agent-step of the batch (no-op for < 2 samples).
void normalize_advantages(std::span<Transition> transitions);

/// Minibatch stacked into one block-diagonal graph (one block per transition).
struct StackedBatch {
	Matrix obs;
	nn::GraphInputs graph;
	Matrix next_obs;
	Vector actions;
	Vector old_log_prob;
	Vector advantages;
	Vector rewards;
	Vector continues;
	Vector td_targets;
	Eigen::Index rows() const noexcept { return obs.rows(); }
};

StackedBatch stack_transitions(std::span<const Transition> transitions, std::span<const std::size_t> indices);
StackedBatch stack_transitions(std::span<const Transition> transitions);

/// mean over samples of min(rho A, clip(rho, 1-eps, 1+eps) A).
nn::Var clipped_surrogate(nn::Var ratio, const Vector& advantages, double clip);

/// Negative clipped surrogate of the actor on `batch` (to be minimised).
nn::Var actor_loss(nn::Tape& tape, nn::ActorNetwork& actor, const StackedBatch& batch, double clip);

/// Mean squared TD error against the fixed `batch.td_targets`.
nn::Var critic_loss(nn::Tape& tape, nn::CriticNetwork& critic, const StackedBatch& batch);

/// r + gamma * continues * V(S', M_t) per agent-step.
Vector td_targets(const StackedBatch& batch, nn::CriticNetwork& critic, double gamma);

struct UpdateStats {
	double critic_loss = 0.0;     // before the update
	double actor_objective = 0.0; // before the update
	double actor_lr = 0.0;        // step sizes actually used
	double critic_lr = 0.0;
};

/// TD regression of the critic over `epochs` shuffled minibatch passes.
/// Returns the full-batch loss before the update and the step size used.
std::pair<double, double> critic_update(std::span<const Transition> batch, nn::CriticNetwork& critic, nn::Adam& opt,
	const PpoConfig& config, Rng& rng);

/// Clipped-surrogate ascent; `batch` must carry advantages.
std::pair<double, double> actor_update(std::span<const Transition> batch, nn::ActorNetwork& actor, nn::Adam& opt,
	const PpoConfig& config, Rng& rng);

/// Advantages, critic update, then actor update.
UpdateStats ppo_update(std::vector<Transition>& batch, nn::ActorNetwork& actor, nn::CriticNetwork& critic,
	nn::Adam& actor_opt, nn::Adam& critic_opt, const PpoConfig& config, Rng& rng);

struct TrainConfig {
	EnvConfig env;
	nn::NetworkConfig network;
	PpoConfig ppo;
	std::uint64_t seed = 0;
};

struct EpisodeRecord {
	int episode = 0;
	std::uint64_t seed = 0;
	EpisodeStats stats;
};

struct TrainOptions {
	/// Checkpoints go here as `episode_<k>.json` (and `final.json`); empty = none.
	std::filesystem::path checkpoint_dir;
	/// Continue from a checkpoint that carries training state.
	const nn::Checkpoint* resume = nullptr;
	std::function<void(const EpisodeRecord&)> on_episode;
};

struct TrainResult {
	nn::ActorNetwork actor;
	nn::CriticNetwork critic;
	nn::TrainingState training;
	std::vector<EpisodeRecord> curve;
	std::vector<std::filesystem::path> checkpoints;
};

/// Per-episode streams: environment seed = derive_seed(seed, Episode, k),
/// action sampling = stream(seed, Policy, k); minibatch order = stream(seed, Minibatch, update).
std::uint64_t episode_seed(std::uint64_t master, int episode) noexcept;

TrainResult train(const TrainConfig& config, const TrainOptions& options = {});

/// CSV `episode,seed,return,mean_speed,mean_abs_accel,episode_len`.
void write_learning_curve(const std::filesystem::path& path, std::span<const EpisodeRecord> records);

} // namespace cavg::rl
