#include <cavg/eval/decentralization.hpp>

#include <cavg/common/error.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace cavg::eval {

int receptive_hops(const nn::NetworkConfig& config) noexcept {
	// Local observation (neighbour CAVs within SC), graph conv, attention.
	return 2 + (config.heads > 0 ? 1 : 0);
}

std::vector<int> receptive_field(const Matrix& neighbours, int agent, int hops) {
	const auto n = static_cast<int>(neighbours.rows());
	std::vector<int> depth(static_cast<std::size_t>(n), -1);
	std::vector<int> frontier{agent};
	depth[static_cast<std::size_t>(agent)] = 0;
	for (int h = 1; h <= hops; ++h) {
		std::vector<int> next;
		for (int i : frontier) {
			for (int j = 0; j < n; ++j) {
				if (neighbours(i, j) != 0.0 && depth[static_cast<std::size_t>(j)] < 0) {
					depth[static_cast<std::size_t>(j)] = h;
					next.push_back(j);
				}
			}
		}
		frontier = std::move(next);
	}
	std::vector<int> out;
	for (int j = 0; j < n; ++j) {
		if (depth[static_cast<std::size_t>(j)] >= 0) {
			out.push_back(j);
		}
	}
	return out;
}

void check_state(nn::ActorNetwork& actor, rl::Environment& env, const sim::SimState& state, int state_index, Rng& rng,
	double tolerance, DecentralizationReport& report) {
	env.set_state(state);
	const auto ids = env.agents();
	if (ids.empty()) {
		return;
	}
	const auto adj = env.adjacency();
	const Vector base = actor.mean_actions(env.observe(ids), nn::GraphInputs::from(adj));
	const int hops = receptive_hops(actor.config());
	const double vmax = 2.0 * env.config().target_speed;
	std::uniform_real_distribution<double> speed(0.0, vmax);
	++report.states;
	for (std::size_t i = 0; i < ids.size(); ++i) {
		++report.agents_checked;
		const auto field = receptive_field(adj.neighbours, static_cast<int>(i), hops);
		std::vector<int> inside_ids;
		for (int k : field) {
			inside_ids.push_back(ids[static_cast<std::size_t>(k)]);
		}
		sim::SimState perturbed = state;
		bool any = false;
		for (auto& v : perturbed.vehicles) {
			const bool inside = v.is_cav() && std::find(inside_ids.begin(), inside_ids.end(), v.id) != inside_ids.end();
			if (!inside) {
				v.speed = speed(rng);
				any = true;
			}
		}
		if (!any) {
			continue;
		}
		++report.perturbed_checks;
		env.set_state(perturbed);
		const Vector moved = actor.mean_actions(env.observe(ids), nn::GraphInputs::from(env.adjacency()));
		const double change = std::abs(moved(static_cast<Eigen::Index>(i)) - base(static_cast<Eigen::Index>(i)));
		report.max_change = std::max(report.max_change, change);
		if (!(change < tolerance)) {
			report.violations.push_back({state_index, ids[i], change});
		}
	}
	env.set_state(state);
}

DecentralizationReport decentralization_check(nn::ActorNetwork& actor, const rl::EnvConfig& env_config,
	std::uint64_t seed, int states, double tolerance) {
	if (states < 1) {
		fail(ErrorCode::InvalidSpec, "decentralization_check: states must be >= 1");
	}
	rl::Environment env(env_config);
	Rng rng = make_stream(seed, StreamPurpose::Perturbation);
	DecentralizationReport report;
	// Spread the sampled states over the horizon.
	const int stride = std::max(1, env_config.horizon / std::max(1, std::min(states, env_config.horizon)));
	int sampled = 0;
	for (int episode = 0; sampled < states; ++episode) {
		env.reset(derive_seed(seed, StreamPurpose::Perturbation, static_cast<std::uint64_t>(episode) + 1));
		while (!env.done() && sampled < states) {
			if (env.steps() % stride == 0 && !env.agents().empty()) {
				const sim::SimState snapshot = env.state();
				check_state(actor, env, snapshot, sampled++, rng, tolerance, report);
			}
			const auto ids = env.agents();
			Vector actions(static_cast<Eigen::Index>(ids.size()));
			if (!ids.empty()) {
				actions = actor.mean_actions(env.observe(ids), nn::GraphInputs::from(env.adjacency()));
			}
			env.step(actions);
		}
		if (episode > 10 * states) {
			break; // no agents ever present
		}
	}
	return report;
}

} // namespace cavg::eval
