#include "cli.hpp"

#include <cavg/check/suites.hpp>
#include <cavg/common/error.hpp>
#include <cavg/config/run_config.hpp>
#include <cavg/eval/evaluate.hpp>
#include <cavg/eval/sweep.hpp>
#include <cavg/nn/checkpoint.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

namespace cavg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

	struct Args {
		std::string config;
		std::optional<std::uint64_t> seed;
		std::string out;
		bool dump_adjacency = false;
		std::string checkpoint;
		std::string variable;
		std::vector<std::string> values;
	};

	std::string escape(std::string s) {
		std::string r;
		for (char c : s) {
			if (c == '"' || c == '\\') {
				r += '\\';
			}
			r += c == '\n' ? ' ' : c;
		}
		return r;
	}

	void print_error(std::ostream& err, ErrorCode code, const std::string& message) {
		fmt::print(err, "error: code={} message=\"{}\"\n", to_string(code), escape(message));
	}

	config::RunConfig load(const Args& a) {
		auto c = config::parse_config(a.config);
		if (a.seed) {
			c.seeds = {*a.seed};
		}
		if (!a.out.empty()) {
			c.output_dir = a.out;
		}
		c.validate();
		return c;
	}

	void write_json(const json& j, const fs::path& path) {
		fs::create_directories(path.parent_path());
		std::ofstream f(path);
		if (!f) {
			fail(ErrorCode::IoError, "cannot write " + path.string());
		}
		f << j.dump(2) << "\n";
	}

	json summary_base(const config::RunConfig& c, std::string_view command) {
		return {{"command", command}, {"config_hash", config::config_hash(c)}, {"seeds", c.seeds}};
	}

	json report_metrics(const eval::EvalReport& r) {
		return {{"return", r.ret}, {"return_std", r.std_ret}, {"mean_velocity", r.mean_velocity},
			{"mean_velocity_std", r.std_velocity}, {"mean_abs_accel", r.mean_abs_accel},
			{"mean_abs_accel_std", r.std_abs_accel}, {"collision_rate", r.collision_rate}};
	}

	int run_train(const Args& a, std::ostream& out) {
		const auto c = load(a);
		const fs::path dir = c.output_dir;
		config::write_config(c, dir / "config.json");
		std::vector<rl::EpisodeRecord> curve;
		json per_seed = json::array();
		for (const auto seed : c.seeds) {
			rl::TrainOptions opts;
			opts.checkpoint_dir = dir / "checkpoints" / fmt::format("seed_{}", seed);
			opts.on_episode = [&](const rl::EpisodeRecord& r) {
				fmt::print(out, "seed {} episode {} return {:.3f} mean_speed {:.3f} len {}{}\n", seed, r.episode,
					r.stats.ret, r.stats.mean_speed, r.stats.length, r.stats.collided ? " collided" : "");
			};
			auto result = rl::train(config::to_train_config(c, seed), opts);
			const auto& rc = result.curve;
			const std::size_t tail = std::min<std::size_t>(10, rc.size());
			double last = 0.0;
			for (std::size_t i = rc.size() - tail; i < rc.size(); ++i) {
				last += rc[i].stats.ret / static_cast<double>(tail);
			}
			per_seed.push_back({{"seed", seed}, {"final10_return", last},
				{"checkpoint", (opts.checkpoint_dir / "final.json").string()}});
			curve.insert(curve.end(), rc.begin(), rc.end());
			rl::write_learning_curve(dir / "learning_curve.csv", curve);
		}
		auto summary = summary_base(c, "train");
		summary["runs"] = per_seed;
		write_json(summary, dir / "summary.json");
		fmt::print(out, "wrote {}\n", dir.string());
		return kExitOk;
	}

	int run_eval(const Args& a, nn::ActorNetwork* actor, const config::RunConfig& c, std::string_view command,
		std::ostream& out) {
		const fs::path dir = c.output_dir;
		config::write_config(c, dir / "config.json");
		eval::EvalOptions opts;
		opts.episodes = c.eval_episodes;
		opts.trajectory_dir = dir / "eval";
		if (a.dump_adjacency) {
			opts.adjacency_dir = dir / "adjacency";
		}
		const auto report = eval::evaluate(actor, config::to_env_config(c), c.seeds, opts);
		eval::write_report_json(report, dir / "eval" / "report.json");
		eval::write_seed_csv(report, dir / "eval" / "seeds.csv");
		for (const auto& s : report.seeds) {
			eval::space_time_export(s.space_time, dir / "spacetime" / fmt::format("spacetime_seed{}.csv", s.seed));
			eval::mean_speed_export(s.space_time, dir / "spacetime" / fmt::format("mean_speed_seed{}.csv", s.seed));
		}
		auto summary = summary_base(c, command);
		summary["metrics"] = report_metrics(report);
		if (!a.checkpoint.empty()) {
			summary["checkpoint"] = a.checkpoint;
		}
		write_json(summary, dir / "summary.json");
		fmt::print(out, "mean_velocity {:.4f} +- {:.4f} m/s, mean_abs_accel {:.4f} m/s^2, return {:.3f} +- {:.3f}, collisions {:.2f}\n",
			report.mean_velocity, report.std_velocity, report.mean_abs_accel, report.ret, report.std_ret,
			report.collision_rate);
		return kExitOk;
	}

	int run_sweep(const Args& a, std::ostream& out, std::ostream& err) {
		const auto c = load(a);
		eval::SweepSpec spec;
		try {
			spec.variable = eval::sweep_variable_from_string(a.variable);
		} catch (const Error& e) {
			print_error(err, ErrorCode::UsageError, e.what());
			return kExitUsage;
		}
		spec.values = a.values;
		spec.episodes = c.eval_episodes;
		spec.seeds = c.seeds;
		const fs::path dir = c.output_dir;
		config::write_config(c, dir / "config.json");
		eval::SweepOptions opts;
		opts.output_dir = dir;
		const auto rows = eval::run_sweep(spec, config::to_train_config(c, c.seeds.front()), opts);
		eval::write_sweep_csv(rows, dir / "sweep.csv");
		eval::write_sweep_errors(rows, dir / "sweep_errors.csv");
		if (spec.variable == eval::SweepVariable::TargetSpeed) {
			eval::write_sweep_percentages(rows, dir / "sweep_pct.csv");
		}
		const auto failed = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.failed; });
		auto summary = summary_base(c, "sweep");
		summary["variable"] = a.variable;
		summary["values"] = a.values;
		summary["cells"] = rows.size();
		summary["failed_cells"] = failed;
		write_json(summary, dir / "summary.json");
		for (const auto& r : rows) {
			fmt::print(out, "{}={} seed {}: {}\n", r.variable, r.value, r.seed,
				r.failed ? "FAILED " + r.error : fmt::format("return {:.3f} mean_velocity {:.3f}", r.ret, r.mean_velocity));
		}
		if (failed == static_cast<std::ptrdiff_t>(rows.size())) {
			print_error(err, ErrorCode::InvalidSpec, "every sweep cell failed, see sweep_errors.csv");
			return kExitFailure;
		}
		return kExitOk;
	}

	int run_check(std::ostream& out) {
		bool ok = true;
		for (const auto& r : check::run_all()) {
			ok = ok && r.passed;
			fmt::print(out, "{} {} ({} instances): {}\n", r.passed ? "PASS" : "FAIL", r.name, r.instances, r.detail);
		}
		return ok ? kExitOk : kExitFailure;
	}

} // namespace

std::string synopsis() {
	return "usage: cavg <command> [options]\n"
		   "  train <config>                                   train one policy per seed\n"
		   "  eval <config> --checkpoint <path>                deterministic evaluation\n"
		   "  sweep <config> --variable <name> --values <a,b>  train + evaluate per value\n"
		   "  baseline <config>                                all-IDM evaluation\n"
		   "  check                                            invariant and gradient suites\n"
		   "global options: --seed <n>  --out <dir>  --dump-adjacency\n"
		   "sweep variables: penetration_rate target_speed scan_scale adjacency_scheme attention_heads\n";
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
	CLI::App app{"Graph-attention multi-agent PPO for mixed-autonomy traffic", "cavg"};
	app.set_help_flag();
	app.require_subcommand(1);
	Args a;
	auto add_globals = [&](CLI::App* sub) {
		sub->add_option("--seed", a.seed, "override the seed list with one master seed");
		sub->add_option("--out", a.out, "output directory (overrides output_dir)");
		sub->add_flag("--dump-adjacency", a.dump_adjacency, "write adjacency matrices of the first episode");
	};
	auto* train = app.add_subcommand("train");
	train->add_option("config", a.config)->required();
	add_globals(train);
	auto* eval = app.add_subcommand("eval");
	eval->add_option("config", a.config)->required();
	eval->add_option("--checkpoint", a.checkpoint)->required();
	add_globals(eval);
	auto* sweep = app.add_subcommand("sweep");
	sweep->add_option("config", a.config)->required();
	sweep->add_option("--variable", a.variable)->required();
	sweep->add_option("--values", a.values)->required()->delimiter(',');
	add_globals(sweep);
	auto* baseline = app.add_subcommand("baseline");
	baseline->add_option("config", a.config)->required();
	add_globals(baseline);
	auto* check = app.add_subcommand("check");
	add_globals(check);

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		fmt::print(err, "{}", synopsis());
		print_error(err, ErrorCode::UsageError, e.what());
		return kExitUsage;
	}

	try {
		if (*train) {
			return run_train(a, out);
		}
		if (*eval) {
			const auto c = load(a);
			auto ckpt = nn::load_checkpoint(a.checkpoint, &c.network);
			return run_eval(a, &ckpt.actor, c, "eval", out);
		}
		if (*sweep) {
			return run_sweep(a, out, err);
		}
		if (*baseline) {
			return run_eval(a, nullptr, load(a), "baseline", out);
		}
		return run_check(out);
	} catch (const Error& e) {
		print_error(err, e.code(), e.what());
	} catch (const std::exception& e) {
		print_error(err, ErrorCode::IoError, e.what());
	}
	return kExitFailure;
}

} // namespace cavg::cli
