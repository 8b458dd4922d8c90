#include <cavg/rl/ppo.hpp>

#include <cavg/common/error.hpp>
#include <cavg/nn/ops.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace cavg::rl {

using nn::Var;

void PpoConfig::validate() const {
	auto require = [](bool ok, const char* what) {
		if (!ok) {
			fail(ErrorCode::InvalidSpec, std::string("ppo: ") + what);
		}
	};
	require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
	require(clip > 0.0, "clip must be > 0");
	require(batch_size >= 1, "batch_size must be >= 1");
	require(epochs >= 1, "epochs must be >= 1");
	require(minibatch_size >= 1, "minibatch_size must be >= 1");
	require(actor_lr >= 0.0 && critic_lr >= 0.0, "step sizes must be >= 0");
	require(max_grad_norm > 0.0, "max_grad_norm must be > 0");
	require(episodes >= 0, "episodes must be >= 0");
	require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
	require(nan_retries >= 0, "nan_retries must be >= 0");
}

// ---------------------------------------------------------------- rollouts

void StatsAccumulator::add(const sim::SimState& s, double reward, bool collided) {
	ret_ += reward;
	double speed = 0.0;
	for (const auto& v : s.vehicles) {
		speed += v.speed;
	}
	speed_ += s.vehicles.empty() ? 0.0 : speed / static_cast<double>(s.vehicles.size());
	double accel = 0.0;
	int cavs = 0;
	for (const auto& v : s.vehicles) {
		if (v.is_cav()) {
			accel += std::abs(v.last_accel);
			++cavs;
		}
	}
	accel_ += cavs == 0 ? 0.0 : accel / cavs;
	++n_;
	collided_ = collided_ || collided;
}

EpisodeStats StatsAccumulator::result() const {
	EpisodeStats s;
	s.ret = ret_;
	s.length = n_;
	s.collided = collided_;
	if (n_ > 0) {
		s.mean_speed = speed_ / n_;
		s.mean_abs_accel = accel_ / n_;
	}
	return s;
}

StepRecord act_and_step(nn::ActorNetwork& actor, Environment& env, Rng& policy_rng, ActionMode mode) {
	const auto ids = env.agents();
	StepRecord rec;
	if (ids.empty()) {
		rec.outcome = env.step(Vector());
		return rec;
	}
	Transition tr;
	tr.agent_ids = ids;
	tr.obs = env.observe(ids);
	tr.graph = nn::GraphInputs::from(env.adjacency());

	nn::Tape tape;
	const auto out = actor.forward(tape, tr.obs, tr.graph);
	const Vector mean = out.mean.value().col(0);
	const double log_spread = out.log_spread.scalar();
	const double spread = std::exp(log_spread);
	const auto n = static_cast<Eigen::Index>(ids.size());
	tr.actions.resize(n);
	tr.old_log_prob.resize(n);
	std::normal_distribution<double> normal(0.0, 1.0);
	for (Eigen::Index i = 0; i < n; ++i) {
		const double a = mode == ActionMode::Sample ? mean(i) + spread * normal(policy_rng) : mean(i);
		tr.actions(i) = a;
		tr.old_log_prob(i) = nn::gaussian_log_density(a, mean(i), log_spread);
	}

	rec.outcome = env.step(tr.actions);
	tr.done = rec.outcome.done;
	tr.rewards = Vector::Constant(n, rec.outcome.reward);

	// Next observations of the same agents; agents that left keep a dummy row.
	const auto& next_state = env.state();
	tr.next_obs = tr.obs;
	tr.continues = Vector::Zero(n);
	std::vector<int> live;
	std::vector<Eigen::Index> rows;
	for (Eigen::Index i = 0; i < n; ++i) {
		if (next_state.index_of(ids[static_cast<std::size_t>(i)]) >= 0) {
			live.push_back(ids[static_cast<std::size_t>(i)]);
			rows.push_back(i);
		}
	}
	if (!live.empty()) {
		const Matrix next = env.observe(live);
		for (std::size_t k = 0; k < rows.size(); ++k) {
			tr.next_obs.row(rows[k]) = next.row(static_cast<Eigen::Index>(k));
			tr.continues(rows[k]) = tr.done ? 0.0 : 1.0;
		}
	}
	rec.transition = std::move(tr);
	return rec;
}

Rollout collect_rollout(nn::ActorNetwork& actor, Environment& env, std::uint64_t episode_seed, Rng& policy_rng,
	ActionMode mode) {
	env.reset(episode_seed);
	Rollout out;
	StatsAccumulator stats;
	while (!env.done()) {
		auto rec = act_and_step(actor, env, policy_rng, mode);
		stats.add(env.state(), rec.outcome.reward, rec.outcome.collided);
		if (rec.transition) {
			out.transitions.push_back(std::move(*rec.transition));
		}
	}
	out.stats = stats.result();
	return out;
}

// ---------------------------------------------------------------- advantages

ValueFn critic_value_fn(nn::CriticNetwork& critic) {
	return [&critic](const Matrix& obs, const nn::GraphInputs& graph) { return critic.values(obs, graph); };
}

void compute_advantages(std::span<Transition> transitions, const ValueFn& value, const PpoConfig& config) {
	if (transitions.empty()) {
		return;
	}
	for (auto& tr : transitions) {
		tr.values = value(tr.obs, tr.graph);
	}
	// Reward-to-go per agent id, walking backwards. `carry` holds G_{t+1} for
	// agents of the following transition.
	std::map<int, double> carry;
	for (std::size_t k = transitions.size(); k-- > 0;) {
		auto& tr = transitions[k];
		const auto n = tr.agents();
		tr.returns.resize(n);
		const bool last = k + 1 == transitions.size();
		Vector bootstrap;
		if (last && !tr.done) {
			bootstrap = value(tr.next_obs, tr.graph);
		}
		std::map<int, double> next_carry;
		for (Eigen::Index i = 0; i < n; ++i) {
			const int id = tr.agent_ids[static_cast<std::size_t>(i)];
			double future = 0.0;
			if (tr.continues(i) > 0.0) {
				if (last) {
					future = bootstrap(i);
				} else if (auto it = carry.find(id); it != carry.end()) {
					future = it->second;
				}
			}
			tr.returns(i) = tr.rewards(i) + config.gamma * future;
			next_carry[id] = tr.returns(i);
		}
		carry = std::move(next_carry);
		tr.advantages = tr.returns - tr.values;
	}
}

void normalize_advantages(std::span<Transition> transitions) {
	double sum = 0.0;
	double count = 0.0;
	for (const auto& tr : transitions) {
		sum += tr.advantages.sum();
		count += static_cast<double>(tr.advantages.size());
	}
	if (count < 2.0) {
		return;
	}
	const double mean = sum / count;
	double sq = 0.0;
	for (const auto& tr : transitions) {
		sq += (tr.advantages.array() - mean).square().sum();
	}
	const double spread = std::sqrt(sq / count) + 1e-8;
	for (auto& tr : transitions) {
		tr.advantages = ((tr.advantages.array() - mean) / spread).matrix();
	}
}

// ---------------------------------------------------------------- batching

StackedBatch stack_transitions(std::span<const Transition> transitions, std::span<const std::size_t> indices) {
	Eigen::Index rows = 0;
	Eigen::Index width = 0;
	for (auto k : indices) {
		rows += transitions[k].agents();
		width = transitions[k].obs.cols();
	}
	StackedBatch b;
	b.obs = Matrix::Zero(rows, width);
	b.next_obs = Matrix::Zero(rows, width);
	b.actions = Vector::Zero(rows);
	b.old_log_prob = Vector::Zero(rows);
	b.advantages = Vector::Zero(rows);
	b.rewards = Vector::Zero(rows);
	b.continues = Vector::Zero(rows);
	Eigen::Index at = 0;
	for (auto k : indices) {
		const auto& tr = transitions[k];
		const auto n = tr.agents();
		b.obs.middleRows(at, n) = tr.obs;
		b.next_obs.middleRows(at, n) = tr.next_obs;
		b.graph.append(tr.graph);
		b.actions.segment(at, n) = tr.actions;
		b.old_log_prob.segment(at, n) = tr.old_log_prob;
		if (tr.advantages.size() == n) {
			b.advantages.segment(at, n) = tr.advantages;
		}
		b.rewards.segment(at, n) = tr.rewards;
		b.continues.segment(at, n) = tr.continues;
		at += n;
	}
	return b;
}

StackedBatch stack_transitions(std::span<const Transition> transitions) {
	std::vector<std::size_t> all(transitions.size());
	std::iota(all.begin(), all.end(), std::size_t{0});
	return stack_transitions(transitions, all);
}

// ---------------------------------------------------------------- losses

Var clipped_surrogate(Var ratio, const Vector& advantages, double clip) {
	if (ratio.rows() != advantages.size() || ratio.cols() != 1) {
		fail(ErrorCode::ShapeMismatch, "surrogate: ratio / advantage shape mismatch");
	}
	const Var adv = ratio.tape->constant(advantages);
	const Var unclipped = nn::mul(ratio, adv);
	const Var clipped = nn::mul(nn::clamp(ratio, 1.0 - clip, 1.0 + clip), adv);
	return nn::mean(nn::minimum(unclipped, clipped));
}

Var actor_loss(nn::Tape& tape, nn::ActorNetwork& actor, const StackedBatch& batch, double clip) {
	const auto out = actor.forward(tape, batch.obs, batch.graph);
	const Var logp = nn::gaussian_log_density(tape.constant(batch.actions), out.mean, out.log_spread);
	const Var ratio = nn::exp(nn::sub(logp, tape.constant(batch.old_log_prob)));
	return nn::neg(clipped_surrogate(ratio, batch.advantages, clip));
}

Var critic_loss(nn::Tape& tape, nn::CriticNetwork& critic, const StackedBatch& batch) {
	if (batch.td_targets.size() != batch.rows()) {
		fail(ErrorCode::ShapeMismatch, "critic loss: TD targets missing");
	}
	const Var v = critic.forward(tape, batch.obs, batch.graph);
	return nn::mean(nn::square(nn::sub(tape.constant(batch.td_targets), v)));
}

Vector td_targets(const StackedBatch& batch, nn::CriticNetwork& critic, double gamma) {
	const Vector next = critic.values(batch.next_obs, batch.graph);
	return batch.rewards + gamma * batch.continues.cwiseProduct(next);
}

// ---------------------------------------------------------------- updates

namespace {

	std::vector<std::vector<std::size_t>> minibatches(std::size_t count, int size, Rng& rng) {
		std::vector<std::size_t> order(count);
		std::iota(order.begin(), order.end(), std::size_t{0});
		std::shuffle(order.begin(), order.end(), rng);
		std::vector<std::vector<std::size_t>> out;
		for (std::size_t at = 0; at < count; at += static_cast<std::size_t>(size)) {
			const auto end = std::min(count, at + static_cast<std::size_t>(size));
			out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at), order.begin() + static_cast<std::ptrdiff_t>(end));
		}
		return out;
	}

	/// One clipped gradient step; false when the loss or gradient is non-finite.
	template <class LossFn>
	bool gradient_step(nn::ParameterSet& params, nn::Adam& opt, double lr, double max_norm, LossFn&& loss_fn) {
		params.zero_grad();
		nn::Tape tape;
		const Var loss = loss_fn(tape);
		if (!std::isfinite(loss.scalar())) {
			return false;
		}
		tape.backward(loss);
		const double norm = params.grad_norm();
		if (!std::isfinite(norm)) {
			return false;
		}
		if (norm > max_norm) {
			params.scale_grad(max_norm / norm);
		}
		opt.step(params, lr);
		return params.all_finite();
	}

	/// Runs `attempt(lr)` and, on a non-finite value, restores the parameters and
	/// optimizer, halves the step size and retries.
	template <class Net, class Attempt>
	double with_nan_guard(Net& net, nn::Adam& opt, double lr, int retries, const char* what, Attempt&& attempt) {
		const nn::ParameterSet saved = net.params();
		const nn::Adam saved_opt = opt;
		for (int k = 0; k <= retries; ++k) {
			bool ok = false;
			try {
				ok = attempt(lr);
			} catch (const Error& e) {
				if (e.code() != ErrorCode::NonFiniteValue) {
					throw;
				}
			}
			if (ok) {
				return lr;
			}
			net.params() = saved;
			opt = saved_opt;
			lr *= 0.5;
		}
		fail(ErrorCode::NanGradient, std::string(what) + " update kept producing non-finite values");
	}

} // namespace

std::pair<double, double> critic_update(std::span<const Transition> batch, nn::CriticNetwork& critic, nn::Adam& opt,
	const PpoConfig& config, Rng& rng) {
	if (batch.empty()) {
		fail(ErrorCode::InvalidSpec, "critic_update: empty batch");
	}
	// Targets are fixed for the whole update (semi-gradient TD).
	auto full = stack_transitions(batch);
	full.td_targets = td_targets(full, critic, config.gamma);
	std::vector<Eigen::Index> offset(batch.size() + 1, 0);
	for (std::size_t k = 0; k < batch.size(); ++k) {
		offset[k + 1] = offset[k] + batch[k].agents();
	}
	auto stack_with_targets = [&](std::span<const std::size_t> idx) {
		auto b = stack_transitions(batch, idx);
		b.td_targets.resize(b.rows());
		Eigen::Index at = 0;
		for (auto k : idx) {
			const auto n = batch[k].agents();
			b.td_targets.segment(at, n) = full.td_targets.segment(offset[k], n);
			at += n;
		}
		return b;
	};
	double initial = 0.0;
	{
		nn::Tape tape;
		initial = critic_loss(tape, critic, full).scalar();
	}
	std::vector<std::vector<std::vector<std::size_t>>> plan;
	for (int e = 0; e < config.epochs; ++e) {
		plan.push_back(minibatches(batch.size(), config.minibatch_size, rng));
	}
	const double lr = with_nan_guard(critic, opt, config.critic_lr, config.nan_retries, "critic", [&](double step) {
		for (const auto& epoch : plan) {
			for (const auto& mb : epoch) {
				const auto b = stack_with_targets(mb);
				const bool ok = gradient_step(critic.params(), opt, step, config.max_grad_norm,
					[&](nn::Tape& tape) { return critic_loss(tape, critic, b); });
				if (!ok) {
					return false;
				}
			}
		}
		return true;
	});
	return {initial, lr};
}

std::pair<double, double> actor_update(std::span<const Transition> batch, nn::ActorNetwork& actor, nn::Adam& opt,
	const PpoConfig& config, Rng& rng) {
	if (batch.empty()) {
		fail(ErrorCode::InvalidSpec, "actor_update: empty batch");
	}
	double initial = 0.0;
	{
		nn::Tape tape;
		initial = -actor_loss(tape, actor, stack_transitions(batch), config.clip).scalar();
	}
	std::vector<std::vector<std::vector<std::size_t>>> plan;
	for (int e = 0; e < config.epochs; ++e) {
		plan.push_back(minibatches(batch.size(), config.minibatch_size, rng));
	}
	const double lr = with_nan_guard(actor, opt, config.actor_lr, config.nan_retries, "actor", [&](double step) {
		for (const auto& epoch : plan) {
			for (const auto& mb : epoch) {
				const auto b = stack_transitions(batch, mb);
				const bool ok = gradient_step(actor.params(), opt, step, config.max_grad_norm,
					[&](nn::Tape& tape) { return actor_loss(tape, actor, b, config.clip); });
				if (!ok) {
					return false;
				}
			}
		}
		return true;
	});
	return {initial, lr};
}

UpdateStats ppo_update(std::vector<Transition>& batch, nn::ActorNetwork& actor, nn::CriticNetwork& critic,
	nn::Adam& actor_opt, nn::Adam& critic_opt, const PpoConfig& config, Rng& rng) {
	compute_advantages(batch, critic_value_fn(critic), config);
	if (config.normalize_advantages) {
		normalize_advantages(batch);
	}
	UpdateStats s;
	std::tie(s.critic_loss, s.critic_lr) = critic_update(batch, critic, critic_opt, config, rng);
	std::tie(s.actor_objective, s.actor_lr) = actor_update(batch, actor, actor_opt, config, rng);
	return s;
}

// ---------------------------------------------------------------- training loop

std::uint64_t episode_seed(std::uint64_t master, int episode) noexcept {
	return derive_seed(master, StreamPurpose::Episode, static_cast<std::uint64_t>(episode));
}

TrainResult train(const TrainConfig& config, const TrainOptions& options) {
	config.env.validate();
	config.network.validate();
	config.ppo.validate();

	TrainResult result;
	int first_episode = 0;
	if (options.resume != nullptr) {
		if (!(options.resume->actor.config() == config.network)) {
			fail(ErrorCode::IncompatibleCheckpoint, "resume checkpoint architecture differs from the run config");
		}
		if (!options.resume->training) {
			fail(ErrorCode::IncompatibleCheckpoint, "resume checkpoint carries no training state");
		}
		result.actor = options.resume->actor;
		result.critic = options.resume->critic;
		result.training = *options.resume->training;
		first_episode = result.training.episode;
	} else {
		Rng init = make_stream(config.seed, StreamPurpose::Init);
		result.actor = nn::ActorNetwork(config.network, init);
		result.critic = nn::CriticNetwork(config.network, init);
		result.training = {nn::Adam(result.actor.params()), nn::Adam(result.critic.params()), 0};
	}

	auto save = [&](const std::filesystem::path& file) {
		nn::save_checkpoint(file, result.actor, result.critic, &result.training);
		result.checkpoints.push_back(file);
	};

	Environment env(config.env);
	std::vector<Transition> buffer;
	for (int ep = first_episode; ep < config.ppo.episodes; ++ep) {
		env.reset(episode_seed(config.seed, ep));
		Rng policy_rng = make_stream(config.seed, StreamPurpose::Policy, static_cast<std::uint64_t>(ep));
		StatsAccumulator stats;
		while (!env.done()) {
			auto rec = act_and_step(result.actor, env, policy_rng, ActionMode::Sample);
			stats.add(env.state(), rec.outcome.reward, rec.outcome.collided);
			if (rec.transition) {
				buffer.push_back(std::move(*rec.transition));
			}
			if (static_cast<int>(buffer.size()) >= config.ppo.batch_size) {
				const auto index = (static_cast<std::uint64_t>(ep) << 24) + static_cast<std::uint64_t>(env.steps());
				Rng mb_rng = make_stream(config.seed, StreamPurpose::Minibatch, index);
				ppo_update(buffer, result.actor, result.critic, result.training.actor_opt, result.training.critic_opt,
					config.ppo, mb_rng);
				buffer.clear();
			}
		}
		result.training.episode = ep + 1;
		EpisodeRecord rec{ep, config.seed, stats.result()};
		result.curve.push_back(rec);
		if (options.on_episode) {
			options.on_episode(rec);
		}
		if (!options.checkpoint_dir.empty() && config.ppo.checkpoint_every > 0 &&
			(ep + 1) % config.ppo.checkpoint_every == 0) {
			save(options.checkpoint_dir / fmt::format("episode_{}.json", ep + 1));
		}
	}
	if (!options.checkpoint_dir.empty()) {
		save(options.checkpoint_dir / "final.json");
	}
	return result;
}

void write_learning_curve(const std::filesystem::path& path, std::span<const EpisodeRecord> records) {
	if (path.has_parent_path()) {
		std::filesystem::create_directories(path.parent_path());
	}
	std::ofstream out(path);
	if (!out) {
		fail(ErrorCode::IoError, "cannot write " + path.string());
	}
	out << "episode,seed,return,mean_speed,mean_abs_accel,episode_len\n";
	for (const auto& r : records) {
		out << fmt::format("{},{},{},{},{},{}\n", r.episode, r.seed, r.stats.ret, r.stats.mean_speed,
			r.stats.mean_abs_accel, r.stats.length);
	}
}

} // namespace cavg::rl
