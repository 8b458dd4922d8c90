#pragma once

#include <cavg/common/rng.hpp>
#include <cavg/nn/tape.hpp>
#include <cavg/sim/types.hpp>

#include <functional>
#include <string>
#include <vector>

// Invariant and gradient suites, runnable from the command line (`cavg check`)
// and from the acceptance binary. Every tolerance lives here.
namespace cavg::check {

struct Tolerances {
	double equilibrium = 1e-9;
	double fd_step = 1e-5;
	/// |analytic - numeric| / max(|analytic|, |numeric|, fd_floor) must stay below fd_rel.
	double fd_rel = 1e-4;
	double fd_floor = 1e-5;
	double attention_sum = 1e-9;
	double adjacency = 1e-12;
	double clip_value = 1e-12;
	/// Largest |gradient| admitted for samples whose clipped term is flat.
	double clip_zero_grad = 1e-12;
};

struct CheckResult {
	std::string name;
	bool passed = false;
	int instances = 0;
	/// Largest violation seen (error, deviation, ...), for the report line.
	double worst = 0.0;
	std::string detail;
};

/// Worst relative finite-difference error over every scalar of `params`.
double gradient_error(nn::ParameterSet& params, const std::function<nn::Var(nn::Tape&)>& loss, const Tolerances& tol);

/// Ring with `n` vehicles evenly spaced at the IDM equilibrium speed, no noise;
/// every speed must stay at the equilibrium speed.
CheckResult idm_equilibrium(int vehicles = 22, double ring_length = 230.0, int steps = 1000, const Tolerances& tol = {});

CheckResult gradient_dense(int instances, std::uint64_t seed, const Tolerances& tol = {});
CheckResult gradient_graph_conv(int instances, std::uint64_t seed, const Tolerances& tol = {});
CheckResult gradient_attention(int instances, std::uint64_t seed, const Tolerances& tol = {});
CheckResult gradient_policy_head(int instances, std::uint64_t seed, const Tolerances& tol = {});
CheckResult gradient_actor_loss(int instances, std::uint64_t seed, const Tolerances& tol = {});
CheckResult gradient_critic_loss(int instances, std::uint64_t seed, const Tolerances& tol = {});

/// Rows of phi sum to one per head and vanish outside the neighbour set.
CheckResult attention_normalization(int instances, std::uint64_t seed, const Tolerances& tol = {});

/// Mask soundness, kernel symmetry, antisymmetry and an independent
/// recomputation of every entry for the Gaussian speed-field scheme.
CheckResult adjacency_properties(int instances, std::uint64_t seed, const Tolerances& tol = {});

/// In-band ratios: clipped == unclipped surrogate. Out-of-band samples whose
/// advantage sign would push the ratio further out contribute no gradient.
CheckResult clip_semantics(int instances, std::uint64_t seed, const Tolerances& tol = {});

/// Every suite above with `instances` random cases each.
std::vector<CheckResult> run_all(int instances = 20, std::uint64_t seed = 7);

/// Random ring state: CAVs and humans at random positions and speeds.
sim::SimState random_ring_state(int n_cav, int n_human, double ring_length, Rng& rng);

} // namespace cavg::check
