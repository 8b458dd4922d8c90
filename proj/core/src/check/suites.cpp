#include <cavg/check/suites.hpp>

#include <cavg/graph/adjacency.hpp>
#include <cavg/nn/layers.hpp>
#include <cavg/nn/policy.hpp>
#include <cavg/rl/ppo.hpp>
#include <cavg/sim/idm.hpp>
#include <cavg/sim/observation.hpp>
#include <cavg/sim/simulator.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <memory>

namespace cavg::check {

using nn::Tape;
using nn::Var;

namespace {

	Matrix uniform(Eigen::Index r, Eigen::Index c, double lo, double hi, Rng& rng) {
		std::uniform_real_distribution<double> u(lo, hi);
		Matrix m(r, c);
		for (Eigen::Index i = 0; i < m.size(); ++i) {
			m.data()[i] = u(rng);
		}
		return m;
	}

	int uniform_int(int lo, int hi, Rng& rng) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

	/// Ring graph over random CAV positions; `scan` small enough that some
	/// pairs fall outside the field.
	nn::GraphInputs random_graph(int n, Rng& rng) {
		const auto state = random_ring_state(n, 0, 60.0, rng);
		graph::AdjacencyScheme scheme;
		return nn::GraphInputs::from(graph::build_adjacency(state, scheme, 15.0));
	}

	CheckResult gradient_result(std::string name, int instances, double worst, const Tolerances& tol) {
		CheckResult r;
		r.name = std::move(name);
		r.instances = instances;
		r.worst = worst;
		r.passed = worst < tol.fd_rel;
		r.detail = fmt::format("max relative error {:.3e} (limit {:.0e})", worst, tol.fd_rel);
		return r;
	}

	nn::NetworkConfig small_network(int heads) {
		nn::NetworkConfig c;
		c.obs_dim = static_cast<Eigen::Index>(sim::kObservationSize);
		c.hidden = 8;
		c.heads = heads;
		return c;
	}

	/// Two stacked decision steps with random observations and graphs.
	rl::StackedBatch random_batch(Rng& rng) {
		rl::StackedBatch b;
		const int n1 = uniform_int(1, 4, rng);
		const int n2 = uniform_int(1, 4, rng);
		b.graph = random_graph(n1, rng);
		b.graph.append(random_graph(n2, rng));
		const auto rows = static_cast<Eigen::Index>(n1 + n2);
		const auto d = static_cast<Eigen::Index>(sim::kObservationSize);
		b.obs = uniform(rows, d, -1.0, 1.0, rng);
		b.next_obs = uniform(rows, d, -1.0, 1.0, rng);
		b.actions = uniform(rows, 1, -2.5, 2.5, rng);
		b.advantages = uniform(rows, 1, -2.0, 2.0, rng);
		b.rewards = uniform(rows, 1, -3.0, 0.0, rng);
		b.continues = Vector::Ones(rows);
		b.td_targets = uniform(rows, 1, -5.0, 5.0, rng);
		return b;
	}

	/// Current log-densities of the batch actions under `actor`.
	Vector log_probs(nn::ActorNetwork& actor, const rl::StackedBatch& b) {
		Tape tape;
		const auto out = actor.forward(tape, b.obs, b.graph);
		return nn::gaussian_log_density(tape.constant(b.actions), out.mean, out.log_spread).value();
	}

} // namespace

sim::SimState random_ring_state(int n_cav, int n_human, double ring_length, Rng& rng) {
	auto scenario = std::make_shared<sim::Scenario>();
	scenario->network.ring_length = ring_length;
	sim::SimState s;
	s.scenario = scenario;
	std::uniform_real_distribution<double> pos(0.0, ring_length);
	std::uniform_real_distribution<double> speed(0.0, 15.0);
	const int total = n_cav + n_human;
	for (int k = 0; k < total; ++k) {
		sim::VehicleState v;
		v.id = k;
		v.kind = k < n_cav ? sim::VehicleKind::Cav : sim::VehicleKind::Human;
		v.route_pos = pos(rng);
		v.speed = speed(rng);
		s.vehicles.push_back(v);
	}
	s.next_id = total;
	return s;
}

double gradient_error(nn::ParameterSet& params, const std::function<Var(Tape&)>& loss, const Tolerances& tol) {
	params.zero_grad();
	{
		Tape tape;
		tape.backward(loss(tape));
	}
	const Vector analytic = params.flat_grads();
	Vector x = params.flat_values();
	double worst = 0.0;
	for (Eigen::Index k = 0; k < x.size(); ++k) {
		const double x0 = x[k];
		x[k] = x0 + tol.fd_step;
		params.set_flat_values(x);
		Tape tp;
		const double fp = loss(tp).scalar();
		x[k] = x0 - tol.fd_step;
		params.set_flat_values(x);
		Tape tm;
		const double fm = loss(tm).scalar();
		x[k] = x0;
		params.set_flat_values(x);
		const double numeric = (fp - fm) / (2.0 * tol.fd_step);
		const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), tol.fd_floor});
		worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
	}
	params.zero_grad();
	return worst;
}

CheckResult idm_equilibrium(int vehicles, double ring_length, int steps, const Tolerances& tol) {
	auto scenario = std::make_shared<sim::Scenario>();
	scenario->network.ring_length = ring_length;
	scenario->params.idm.noise_mag = 0.0;
	auto state = sim::build_network(scenario, vehicles, 0, 0);
	const double gap = ring_length / vehicles - scenario->network.vehicle_length;
	const double v_eq = sim::idm_equilibrium_speed(gap, scenario->params.idm);
	for (auto& v : state.vehicles) {
		v.speed = v_eq;
	}
	double worst = 0.0;
	for (int t = 0; t < steps; ++t) {
		state = sim::step(state, {}, scenario->params.dt).state;
		for (const auto& v : state.vehicles) {
			worst = std::max(worst, std::abs(v.speed - v_eq));
		}
	}
	CheckResult r;
	r.name = "idm equilibrium";
	r.instances = 1;
	r.worst = worst;
	r.passed = worst < tol.equilibrium && !state.collided;
	r.detail = fmt::format("{} vehicles, {} steps, v_eq {:.6f} m/s, max deviation {:.3e}", vehicles, steps, v_eq, worst);
	return r;
}

CheckResult gradient_dense(int instances, std::uint64_t seed, const Tolerances& tol) {
	Rng rng = make_stream(seed, StreamPurpose::Init, 1);
	double worst = 0.0;
	for (int k = 0; k < instances; ++k) {
		const int n = uniform_int(1, 5, rng);
		const int in = uniform_int(1, 5, rng);
		const int out = uniform_int(1, 5, rng);
		nn::ParameterSet params;
		nn::Dense layer(params, "dense", in, out, 1.0, rng);
		params[layer.bias_index()].value = uniform(1, out, -0.5, 0.5, rng);
		const Matrix x = uniform(n, in, -1.0, 1.0, rng);
		const Matrix w = uniform(n, out, -1.0, 1.0, rng);
		worst = std::max(worst, gradient_error(params, [&](Tape& t) {
			return nn::sum(nn::mul(nn::tanh(layer.forward(t, params, t.constant(x))), t.constant(w)));
		}, tol));
	}
	return gradient_result("gradient: dense", instances, worst, tol);
}

CheckResult gradient_graph_conv(int instances, std::uint64_t seed, const Tolerances& tol) {
	Rng rng = make_stream(seed, StreamPurpose::Init, 2);
	double worst = 0.0;
	for (int k = 0; k < instances; ++k) {
		const int blocks = uniform_int(1, 2, rng);
		nn::GraphInputs g = random_graph(uniform_int(1, 5, rng), rng);
		if (blocks == 2) {
			g.append(random_graph(uniform_int(1, 4, rng), rng));
		}
		const int d_in = uniform_int(1, 4, rng);
		const int d_out = uniform_int(1, 4, rng);
		nn::ParameterSet params;
		nn::GraphConvLayer layer(params, "conv", d_in, d_out, nn::Activation::Tanh, 1.0, rng);
		const Matrix h = uniform(g.rows(), d_in, -1.0, 1.0, rng);
		const Matrix w = uniform(g.rows(), d_out, -1.0, 1.0, rng);
		worst = std::max(worst, gradient_error(params, [&](Tape& t) {
			return nn::sum(nn::mul(layer.forward(t, params, t.constant(h), g.weights, g.normalized), t.constant(w)));
		}, tol));
	}
	return gradient_result("gradient: graph conv", instances, worst, tol);
}

CheckResult gradient_attention(int instances, std::uint64_t seed, const Tolerances& tol) {
	Rng rng = make_stream(seed, StreamPurpose::Init, 3);
	double worst = 0.0;
	for (int k = 0; k < instances; ++k) {
		nn::GraphInputs g = random_graph(uniform_int(1, 5, rng), rng);
		if (k % 2 == 1) {
			g.append(random_graph(uniform_int(1, 4, rng), rng));
		}
		const int heads = uniform_int(1, 2, rng);
		const int width = heads * uniform_int(1, 3, rng);
		nn::ParameterSet params;
		nn::AttentionLayer layer(params, "attn", width, heads, 1.0, rng);
		const Matrix h = uniform(g.rows(), width, -1.0, 1.0, rng);
		const Matrix w = uniform(g.rows(), width, -1.0, 1.0, rng);
		worst = std::max(worst, gradient_error(params, [&](Tape& t) {
			return nn::sum(nn::mul(layer.forward(t, params, t.constant(h), g.mask).features, t.constant(w)));
		}, tol));
	}
	return gradient_result("gradient: attention", instances, worst, tol);
}

CheckResult gradient_policy_head(int instances, std::uint64_t seed, const Tolerances& tol) {
	Rng rng = make_stream(seed, StreamPurpose::Init, 4);
	double worst = 0.0;
	for (int k = 0; k < instances; ++k) {
		const int n = uniform_int(1, 5, rng);
		const int width = uniform_int(1, 5, rng);
		nn::ParameterSet params;
		nn::GaussianPolicyHead head(params, "head", width, -3.0, 3.0, 1.0, rng);
		params[head.log_spread_index()].value(0, 0) = uniform(1, 1, -1.0, 0.5, rng)(0, 0);
		const Matrix trunk = uniform(n, width, -1.0, 1.0, rng);
		const Matrix actions = uniform(n, 1, -2.5, 2.5, rng);
		const Matrix w = uniform(n, 1, -1.0, 1.0, rng);
		worst = std::max(worst, gradient_error(params, [&](Tape& t) {
			const auto out = head.forward(t, params, t.constant(trunk));
			const Var logp = nn::gaussian_log_density(t.constant(actions), out.mean, out.log_spread);
			return nn::sum(nn::mul(logp, t.constant(w)));
		}, tol));
	}
	return gradient_result("gradient: gaussian head", instances, worst, tol);
}

CheckResult gradient_actor_loss(int instances, std::uint64_t seed, const Tolerances& tol) {
	Rng rng = make_stream(seed, StreamPurpose::Init, 5);
	double worst = 0.0;
	for (int k = 0; k < instances; ++k) {
		nn::ActorNetwork actor(small_network(k % 3 == 0 ? 0 : 2), rng);
		auto b = random_batch(rng);
		// Ratios inside (0.9, 1.11): every sample stays on the smooth branch of min/clip.
		b.old_log_prob = log_probs(actor, b) + uniform(b.rows(), 1, -0.1, 0.1, rng);
		worst = std::max(worst, gradient_error(actor.params(), [&](Tape& t) {
			return rl::actor_loss(t, actor, b, 0.2);
		}, tol));
	}
	return gradient_result("gradient: actor loss", instances, worst, tol);
}

CheckResult gradient_critic_loss(int instances, std::uint64_t seed, const Tolerances& tol) {
	Rng rng = make_stream(seed, StreamPurpose::Init, 6);
	double worst = 0.0;
	for (int k = 0; k < instances; ++k) {
		nn::CriticNetwork critic(small_network(0), rng);
		const auto b = random_batch(rng);
		worst = std::max(worst, gradient_error(critic.params(), [&](Tape& t) {
			return rl::critic_loss(t, critic, b);
		}, tol));
	}
	return gradient_result("gradient: critic loss", instances, worst, tol);
}

CheckResult attention_normalization(int instances, std::uint64_t seed, const Tolerances& tol) {
	Rng rng = make_stream(seed, StreamPurpose::Init, 7);
	double worst = 0.0;
	bool outside_zero = true;
	for (int k = 0; k < instances; ++k) {
		const int n = uniform_int(1, 8, rng);
		const int heads = 1 << uniform_int(0, 3, rng);
		const auto g = random_graph(n, rng);
		const Matrix& mask = g.mask[0];
		nn::ParameterSet params;
		nn::AttentionLayer layer(params, "attn", 2 * heads, heads, 1.0, rng);
		Tape tape;
		const auto out = layer.forward(tape, params, tape.constant(uniform(n, 2 * heads, -3.0, 3.0, rng)), mask);
		for (const Matrix& phi : out.scores) {
			for (Eigen::Index i = 0; i < n; ++i) {
				worst = std::max(worst, std::abs(phi.row(i).sum() - 1.0));
				for (Eigen::Index j = 0; j < n; ++j) {
					if (mask(i, j) == 0.0 && phi(i, j) != 0.0) {
						outside_zero = false;
					}
				}
			}
		}
	}
	CheckResult r;
	r.name = "attention normalization";
	r.instances = instances;
	r.worst = worst;
	r.passed = worst < tol.attention_sum && outside_zero;
	r.detail = fmt::format("max |row sum - 1| {:.3e}; outside-neighbourhood weights {}", worst,
		outside_zero ? "all exactly 0" : "NON-ZERO");
	return r;
}

CheckResult adjacency_properties(int instances, std::uint64_t seed, const Tolerances& tol) {
	Rng rng = make_stream(seed, StreamPurpose::Init, 8);
	double worst = 0.0;
	std::string broken;
	for (int k = 0; k < instances; ++k) {
		const double ring = std::uniform_real_distribution<double>(50.0, 300.0)(rng);
		const int n_cav = uniform_int(1, 10, rng);
		const auto state = random_ring_state(n_cav, uniform_int(0, 5, rng), ring, rng);
		graph::AdjacencyScheme scheme;
		scheme.kernel.length_scale = std::uniform_real_distribution<double>(1.0, 10.0)(rng);
		scheme.kernel.amplitude = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
		const double scan = std::uniform_real_distribution<double>(5.0, 60.0)(rng);
		const auto adj = graph::build_adjacency(state, scheme, scan);
		const double sigma = scheme.kernel.length_scale;
		for (int a = 0; a < n_cav; ++a) {
			const auto& vi = state.vehicles[a];
			for (int b = 0; b < n_cav; ++b) {
				const auto& vj = state.vehicles[b];
				if (a == b) {
					worst = std::max(worst, std::abs(adj.weights(a, b) - 1.0));
					continue;
				}
				const double raw = std::abs(vi.route_pos - vj.route_pos);
				const double d = std::min(raw, ring - raw);
				const double kij = graph::gaussian_kernel(vi.route_pos, vj.route_pos, scheme.kernel, ring);
				const double kji = graph::gaussian_kernel(vj.route_pos, vi.route_pos, scheme.kernel, ring);
				worst = std::max(worst, std::abs(kij - kji));
				if (d > scan) {
					if (adj.weights(a, b) != 0.0 || adj.neighbours(a, b) != 0.0) {
						broken = "edge beyond scan scale";
					}
					continue;
				}
				const double expected = std::exp(-d * d / (2.0 * sigma * sigma)) * (vj.speed - vi.speed);
				worst = std::max(worst, std::abs(adj.weights(a, b) - expected));
				worst = std::max(worst, std::abs(adj.weights(a, b) + adj.weights(b, a)));
			}
		}
	}
	CheckResult r;
	r.name = "adjacency correctness";
	r.instances = instances;
	r.worst = worst;
	r.passed = broken.empty() && worst <= tol.adjacency;
	r.detail = broken.empty() ? fmt::format("max entry/symmetry error {:.3e}", worst) : broken;
	return r;
}

CheckResult clip_semantics(int instances, std::uint64_t seed, const Tolerances& tol) {
	Rng rng = make_stream(seed, StreamPurpose::Init, 9);
	constexpr double clip = 0.2;
	double value_err = 0.0;
	double zero_grad = 0.0;
	double fd_err = 0.0;
	for (int k = 0; k < instances; ++k) {
		// (a) in-band ratios: clipped surrogate equals the plain one, value and gradient.
		const int n = uniform_int(1, 16, rng);
		const Vector ratio = uniform(n, 1, 1.0 - clip + 1e-6, 1.0 + clip - 1e-6, rng);
		const Vector adv = uniform(n, 1, -3.0, 3.0, rng);
		{
			Tape tape;
			nn::ParameterSet holder;
			holder.add("ratio", ratio);
			const Var r = tape.param(holder[0]);
			const Var clipped = rl::clipped_surrogate(r, adv, clip);
			const double plain = ratio.cwiseProduct(adv).mean();
			value_err = std::max(value_err, std::abs(clipped.scalar() - plain));
			tape.backward(clipped);
			value_err = std::max(value_err, (holder[0].grad - adv / n).cwiseAbs().maxCoeff());
		}

		// (b) out-of-band disadvantageous samples: zero gradient through the actor.
		nn::ActorNetwork actor(small_network(2), rng);
		auto b = random_batch(rng);
		const Vector logp = log_probs(actor, b);
		b.old_log_prob.resize(b.rows());
		std::vector<bool> flat(static_cast<std::size_t>(b.rows()));
		for (Eigen::Index i = 0; i < b.rows(); ++i) {
			const bool out = (i + k) % 2 == 0;
			flat[static_cast<std::size_t>(i)] = out;
			double target = std::uniform_real_distribution<double>(0.9, 1.1)(rng);
			if (out) {
				// A > 0 with rho > 1 + eps, or A < 0 with rho < 1 - eps.
				target = b.advantages[i] > 0.0 ? std::uniform_real_distribution<double>(1.35, 2.0)(rng)
											   : std::uniform_real_distribution<double>(0.3, 0.65)(rng);
			}
			b.old_log_prob[i] = logp[i] - std::log(target);
		}
		std::vector<std::size_t> all_out;
		for (std::size_t i = 0; i < flat.size(); ++i) {
			if (flat[i]) {
				all_out.push_back(i);
			}
		}
		if (!all_out.empty()) {
			rl::StackedBatch only = b;
			// Zero the advantages of in-band samples: the remaining objective is
			// made of clipped terms only, so every gradient must vanish.
			for (std::size_t i = 0; i < flat.size(); ++i) {
				if (!flat[i]) {
					only.advantages[static_cast<Eigen::Index>(i)] = 0.0;
				}
			}
			auto& params = actor.params();
			params.zero_grad();
			Tape tape;
			tape.backward(rl::actor_loss(tape, actor, only, clip));
			zero_grad = std::max(zero_grad, params.flat_grads().cwiseAbs().maxCoeff());
			params.zero_grad();
		}
		// The full mixed batch still matches finite differences.
		fd_err = std::max(fd_err, gradient_error(actor.params(), [&](Tape& t) {
			return rl::actor_loss(t, actor, b, clip);
		}, tol));
	}
	CheckResult r;
	r.name = "ppo clip semantics";
	r.instances = instances;
	r.worst = std::max({value_err, zero_grad, fd_err});
	r.passed = value_err < tol.clip_value && zero_grad <= tol.clip_zero_grad && fd_err < tol.fd_rel;
	r.detail = fmt::format("in-band |clipped - plain| {:.3e}; out-of-band max |grad| {:.3e}; fd error {:.3e}",
		value_err, zero_grad, fd_err);
	return r;
}

std::vector<CheckResult> run_all(int instances, std::uint64_t seed) {
	return {
		idm_equilibrium(),
		gradient_dense(instances, seed),
		gradient_graph_conv(instances, seed),
		gradient_attention(instances, seed),
		gradient_policy_head(instances, seed),
		gradient_actor_loss(instances, seed),
		gradient_critic_loss(instances, seed),
		attention_normalization(instances, seed),
		adjacency_properties(instances, seed),
		clip_semantics(instances, seed),
	};
}

} // namespace cavg::check
