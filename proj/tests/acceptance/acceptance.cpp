// End-to-end acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
// Usage: cavg_acceptance [--work-dir DIR]
#include <cavg/check/suites.hpp>
#include <cavg/common/error.hpp>
#include <cavg/config/run_config.hpp>
#include <cavg/eval/decentralization.hpp>
#include <cavg/eval/evaluate.hpp>
#include <cavg/nn/checkpoint.hpp>
#include <cavg/rl/ppo.hpp>
#include <cavg/sim/simulator.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

using namespace cavg;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr double kIdmTargetVelocity = 2.754;
constexpr double kIdmVelocityBand = 1.5;
constexpr double kIdmMinWaveStd = 0.5;
constexpr int kIdmWaveWindow = 500;
constexpr double kIdmMaxSeconds = 10.0;
constexpr double kEquilibriumTol = 1e-9;
constexpr int kGradientInstances = 20;
constexpr double kGradientMaxSeconds = 60.0;
constexpr double kSmokeSpeedRatio = 1.1;
constexpr double kSmokeMaxSeconds = 600.0;
constexpr int kSmokeEvalEpisodes = 5;
constexpr int kDecentralizationStates = 100;
constexpr double kDecentralizationTol = 1e-9;
constexpr int kMergeSteps = 600;
constexpr double kMergeUpstreamWindow = 50.0;
constexpr double kMergeEntryWindow = 100.0;
constexpr std::uint64_t kCheckSeed = 7;
const std::vector<std::uint64_t> kSeeds{0, 1, 2};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
	return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool passed, const std::string& detail) {
	fmt::print("{} {:>2} {}: {}\n", passed ? "PASS" : "FAIL", id, name, detail);
	std::fflush(stdout);
	failures += passed ? 0 : 1;
}

// Runs `body`; an exception is a failure of that criterion, not of the binary.
void criterion(int id, const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
	try {
		const auto [ok, detail] = body();
		report(id, name, ok, detail);
	} catch (const std::exception& e) {
		report(id, name, false, fmt::format("exception: {}", e.what()));
	}
}

double median(std::vector<double> v) {
	std::sort(v.begin(), v.end());
	const auto n = v.size();
	return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double window_mean(const std::vector<rl::EpisodeRecord>& curve, std::size_t first, std::size_t count,
	double rl::EpisodeStats::*field) {
	double sum = 0.0;
	for (std::size_t i = first; i < first + count; ++i) {
		sum += curve[i].stats.*field;
	}
	return sum / static_cast<double>(count);
}

std::string slurp(const fs::path& path) {
	std::ifstream in(path, std::ios::binary);
	return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string join(const std::vector<double>& v, const char* spec = "{:.1f}") {
	std::string out;
	for (std::size_t i = 0; i < v.size(); ++i) {
		out += (i ? "/" : "") + fmt::format(fmt::runtime(spec), v[i]);
	}
	return out;
}

// 6-vehicle ring with 4 CAVs, horizon 500, 50 episodes.
config::RunConfig smoke_config(int heads) {
	auto c = config::parse_config_text(fmt::format(R"({{
		"scenario": {{"network": "ring", "n_human": 2, "n_cav": 4, "horizon": 500}},
		"nn": {{"hidden": 64, "heads": {}}},
		"ppo": {{"batch_size": 500, "minibatch_size": 64, "epochs": 10, "episodes": 50}}
	}})",
		heads));
	return c;
}

struct SmokeRun {
	std::uint64_t seed = 0;
	rl::TrainResult result;
	double seconds = 0.0;
};

std::vector<SmokeRun> train_smoke(int heads) {
	std::vector<SmokeRun> runs;
	for (auto seed : kSeeds) {
		const auto t0 = Clock::now();
		SmokeRun run{seed, rl::train(config::to_train_config(smoke_config(heads), seed)), 0.0};
		run.seconds = seconds_since(t0);
		runs.push_back(std::move(run));
	}
	return runs;
}

nn::ActorNetwork untrained_actor(const config::RunConfig& c, std::uint64_t seed) {
	Rng init = make_stream(seed, StreamPurpose::Init);
	return nn::ActorNetwork(c.network, init);
}

} // namespace

int main(int argc, char** argv) {
	fs::path work = fs::temp_directory_path() / "cavg_acceptance";
	for (int i = 1; i < argc; ++i) {
		const std::string arg = argv[i];
		if (arg == "--work-dir" && i + 1 < argc) {
			work = argv[++i];
		} else {
			fmt::print(stderr, "usage: cavg_acceptance [--work-dir DIR]\n");
			return 2;
		}
	}
	fs::remove_all(work);
	fs::create_directories(work);

	criterion(1, "idm_ring_baseline", [] {
		const auto c = config::parse_config_text(
			R"({"scenario": {"network": "ring", "n_human": 22, "n_cav": 0, "horizon": 3000}})");
		const std::vector<std::uint64_t> seeds{0};
		const auto t0 = Clock::now();
		eval::EvalOptions opts;
		opts.episodes = 1;
		const auto r = eval::evaluate(nullptr, config::to_env_config(c), seeds, opts);
		const double secs = seconds_since(t0);
		const auto& rows = r.seeds.front().space_time;
		const long last = rows.back().step;
		double sum = 0.0, sq = 0.0;
		long n = 0;
		for (const auto& row : rows) {
			if (row.step > last - kIdmWaveWindow) {
				sum += row.speed;
				sq += row.speed * row.speed;
				++n;
			}
		}
		const double mean = sum / static_cast<double>(n);
		const double std = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
		const bool ok = std::abs(r.mean_velocity - kIdmTargetVelocity) <= kIdmVelocityBand && std > kIdmMinWaveStd &&
			secs < kIdmMaxSeconds;
		return std::pair{ok, fmt::format("mean velocity {:.3f} m/s (target {} +- {}), final-{} std {:.3f} (> {}), {:.2f}s",
								 r.mean_velocity, kIdmTargetVelocity, kIdmVelocityBand, kIdmWaveWindow, std, kIdmMinWaveStd, secs)};
	});

	criterion(2, "idm_equilibrium", [] {
		check::Tolerances tol;
		tol.equilibrium = kEquilibriumTol;
		const auto r = check::idm_equilibrium(22, 230.0, 1000, tol);
		return std::pair{r.passed, fmt::format("max speed deviation {:.3g} over 1000 steps (< {})", r.worst, kEquilibriumTol)};
	});

	criterion(3, "gradient_suite", [] {
		const auto t0 = Clock::now();
		const std::vector<check::CheckResult> suites{check::gradient_dense(kGradientInstances, kCheckSeed),
			check::gradient_graph_conv(kGradientInstances, kCheckSeed),
			check::gradient_attention(kGradientInstances, kCheckSeed),
			check::gradient_policy_head(kGradientInstances, kCheckSeed),
			check::gradient_actor_loss(kGradientInstances, kCheckSeed),
			check::gradient_critic_loss(kGradientInstances, kCheckSeed)};
		const double secs = seconds_since(t0);
		bool ok = secs < kGradientMaxSeconds;
		std::string detail;
		for (const auto& s : suites) {
			ok = ok && s.passed && s.instances >= kGradientInstances;
			detail += fmt::format("{}={}x{:.1e} ", s.name, s.instances, s.worst);
		}
		return std::pair{ok, fmt::format("{}(rel < {}), {:.1f}s", detail, check::Tolerances{}.fd_rel, secs)};
	});

	criterion(4, "attention_normalization", [] {
		const auto r = check::attention_normalization(100, kCheckSeed);
		return std::pair{r.passed, fmt::format("{} states, worst |sum-1| {:.3g}; {}", r.instances, r.worst, r.detail)};
	});

	criterion(5, "adjacency_correctness", [] {
		const auto r = check::adjacency_properties(100, kCheckSeed);
		return std::pair{r.passed, fmt::format("{} states, worst entry error {:.3g}; {}", r.instances, r.worst, r.detail)};
	});

	criterion(6, "ppo_clip_semantics", [] {
		const auto r = check::clip_semantics(50, kCheckSeed);
		return std::pair{r.passed, fmt::format("{} batches, worst {:.3g}; {}", r.instances, r.worst, r.detail)};
	});

	// Training runs shared by criteria 7-11.
	std::vector<SmokeRun> attn;
	std::string train_error;
	double attn_seconds = 0.0;
	try {
		const auto t0 = Clock::now();
		attn = train_smoke(8);
		attn_seconds = seconds_since(t0);
	} catch (const std::exception& e) {
		train_error = e.what();
	}

	criterion(7, "reward_replay", [&] {
		if (attn.empty()) {
			return std::pair{false, "training failed: " + train_error};
		}
		std::string detail;
		bool ok = true;
		auto check_log = [&](const char* label, const config::RunConfig& c, nn::ActorNetwork* actor) {
			const auto dir = work / "replay" / label;
			const std::vector<std::uint64_t> seeds{3};
			eval::EvalOptions opts;
			opts.episodes = 1;
			opts.trajectory_dir = dir;
			eval::evaluate(actor, config::to_env_config(c), seeds, opts);
			const auto stored = eval::read_rewards(dir / "rewards_seed3.csv");
			const auto replayed = eval::replay_rewards(dir / "trajectory_seed3.csv", dir / "routes_seed3.csv",
				std::make_shared<sim::Scenario>(c.scenario), c.reward);
			long mismatches = 0;
			for (std::size_t i = 0; i < std::min(stored.size(), replayed.size()); ++i) {
				mismatches += stored[i] != replayed[i];
			}
			const bool same = !stored.empty() && stored.size() == replayed.size() && mismatches == 0;
			ok = ok && same;
			detail += fmt::format("{}: {} steps, {} mismatches; ", label, stored.size(), mismatches);
		};
		auto ring = smoke_config(8);
		check_log("ring", ring, &attn.front().result.actor);
		auto merge = config::parse_config_text(R"({"scenario": {"network": "merge"}})");
		merge.network.heads = 8;
		check_log("merge", merge, nullptr);
		return std::pair{ok, detail + "exact equality"};
	});

	criterion(8, "training_smoke", [&] {
		if (attn.empty()) {
			return std::pair{false, "training failed: " + train_error};
		}
		const auto c = smoke_config(8);
		std::vector<double> first, last, v_untrained, v_trained;
		for (auto& run : attn) {
			first.push_back(window_mean(run.result.curve, 0, 10, &rl::EpisodeStats::ret));
			last.push_back(window_mean(run.result.curve, 40, 10, &rl::EpisodeStats::ret));
			const std::vector<std::uint64_t> seeds{run.seed};
			eval::EvalOptions opts;
			opts.episodes = kSmokeEvalEpisodes;
			auto a0 = untrained_actor(c, run.seed);
			v_untrained.push_back(eval::evaluate(&a0, config::to_env_config(c), seeds, opts).mean_velocity);
			v_trained.push_back(eval::evaluate(&run.result.actor, config::to_env_config(c), seeds, opts).mean_velocity);
		}
		const double ratio = median(v_trained) / median(v_untrained);
		const bool ok = median(last) > median(first) && ratio >= kSmokeSpeedRatio && attn_seconds < kSmokeMaxSeconds;
		return std::pair{ok,
			fmt::format("median return first-10 {:.1f} -> final-10 {:.1f} ({} -> {}); eval mean speed untrained {} -> "
						"trained {} m/s, median ratio {:.2f} (>= {}); {:.0f}s for 3 seeds",
				median(first), median(last), join(first), join(last), join(v_untrained, "{:.3f}"),
				join(v_trained, "{:.3f}"), ratio, kSmokeSpeedRatio, attn_seconds)};
	});

	criterion(9, "attention_ablation", [&] {
		if (attn.empty()) {
			return std::pair{false, "training failed: " + train_error};
		}
		const auto plain = train_smoke(0);
		std::vector<double> with, without;
		for (std::size_t i = 0; i < attn.size(); ++i) {
			with.push_back(window_mean(attn[i].result.curve, 40, 10, &rl::EpisodeStats::ret));
			without.push_back(window_mean(plain[i].result.curve, 40, 10, &rl::EpisodeStats::ret));
		}
		return std::pair{median(with) >= median(without),
			fmt::format("median final-10 return heads=8 {:.1f} ({}) vs heads=0 {:.1f} ({})", median(with), join(with),
				median(without), join(without))};
	});

	criterion(10, "determinism", [&] {
		if (attn.empty()) {
			return std::pair{false, "training failed: " + train_error};
		}
		const auto c = smoke_config(8);
		const auto& first = attn.front();
		const auto again = rl::train(config::to_train_config(c, first.seed));
		const auto a = work / "determinism" / "curve_a.csv";
		const auto b = work / "determinism" / "curve_b.csv";
		fs::create_directories(a.parent_path());
		rl::write_learning_curve(a, first.result.curve);
		rl::write_learning_curve(b, again.curve);
		const bool curves = slurp(a) == slurp(b) && !slurp(a).empty();

		const auto env = config::to_env_config(c);
		const std::vector<std::uint64_t> seeds{0, 1};
		eval::EvalOptions opts;
		opts.episodes = 2;
		auto actor_a = first.result.actor;
		auto actor_b = again.actor;
		const bool reports = eval::evaluate(&actor_a, env, seeds, opts) == eval::evaluate(&actor_b, env, seeds, opts);
		return std::pair{curves && reports,
			fmt::format("learning curves {} ({} bytes), eval reports {}", curves ? "identical" : "differ", slurp(a).size(),
				reports ? "identical" : "differ")};
	});

	criterion(11, "decentralized_execution", [&] {
		if (attn.empty()) {
			return std::pair{false, "training failed: " + train_error};
		}
		const auto c = smoke_config(8);
		const auto path = work / "decentralization" / "checkpoint.json";
		fs::create_directories(path.parent_path());
		nn::save_checkpoint(path, attn.front().result.actor, attn.front().result.critic);
		auto ckpt = nn::load_checkpoint(path, &c.network);

		// The training ring, and a long ring where most vehicles lie outside each field.
		auto wide = c;
		wide.scenario.network.ring_length = 1000.0;
		wide.n_human = 20;
		wide.n_cav = 12;
		bool ok = true;
		std::string detail;
		for (const auto& [label, cfg] : {std::pair{"smoke ring", c}, std::pair{"1000 m ring", wide}}) {
			const auto r = eval::decentralization_check(ckpt.actor, config::to_env_config(cfg), attn.front().seed,
				kDecentralizationStates, kDecentralizationTol);
			ok = ok && r.passed() && r.states == kDecentralizationStates;
			detail += fmt::format("{}: {} states, {} agent checks ({} with out-of-field vehicles), max change {:.3g}; ",
				label, r.states, r.agents_checked, r.perturbed_checks, r.max_change);
			if (label == std::string("1000 m ring")) {
				ok = ok && r.perturbed_checks > 0;
			}
		}
		return std::pair{ok, detail + fmt::format("tolerance {}", kDecentralizationTol)};
	});

	criterion(12, "merge_liveness", [] {
		const auto c = config::parse_config_text(R"({"scenario": {"network": "merge"}})");
		auto scenario = std::make_shared<sim::Scenario>(c.scenario);
		const auto& net = scenario->network;
		bool ok = true;
		std::string detail;
		for (auto seed : kSeeds) {
			auto s = sim::warm_up(sim::build_network(scenario, 0, 0, seed), c.warmup_steps);
			int spawned = 0, exited = 0;
			double up = 0.0, entry = 0.0;
			long n_up = 0, n_entry = 0;
			const double dt = scenario->params.dt;
			for (int t = 0; t < kMergeSteps && !s.collided; ++t) {
				auto r = sim::step(s, sim::idm_cav_actions(s, &s.rng), dt);
				spawned += static_cast<int>(r.info.spawned_ids.size());
				exited += static_cast<int>(r.info.exited_ids.size());
				s = std::move(r.state);
				if (3 * t < 2 * kMergeSteps) {
					continue;
				}
				for (const auto& v : s.vehicles) {
					if (v.route_id == 1 && v.route_pos < net.ramp_length) {
						continue; // still on the ramp
					}
					const double x = net.highway_coordinate(v.route_id, v.route_pos);
					if (x >= net.merge_point - kMergeUpstreamWindow && x < net.merge_point) {
						up += v.speed;
						++n_up;
					}
					if (x < kMergeEntryWindow) {
						entry += v.speed;
						++n_entry;
					}
				}
			}
			const double v_up = n_up ? up / static_cast<double>(n_up) : NAN;
			const double v_entry = n_entry ? entry / static_cast<double>(n_entry) : NAN;
			const bool seed_ok = !s.collided && spawned > 0 && exited > 0 && v_up < v_entry;
			ok = ok && seed_ok;
			detail += fmt::format("seed {}: {} spawned, {} exited, upstream {:.2f} vs entry {:.2f} m/s; ", seed, spawned,
				exited, v_up, v_entry);
		}
		return std::pair{ok, detail};
	});

	fmt::print("{} of 12 criteria passed\n", 12 - failures);
	return failures == 0 ? 0 : 1;
}
