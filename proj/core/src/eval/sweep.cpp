#include <cavg/eval/sweep.hpp>

#include <cavg/common/error.hpp>
#include <cavg/eval/evaluate.hpp>

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>

namespace cavg::eval {

namespace {

	double parse_number(const std::string& value) {
		std::size_t used = 0;
		double x = 0.0;
		try {
			x = std::stod(value, &used);
		} catch (const std::exception&) {
			used = 0;
		}
		if (used != value.size() || !std::isfinite(x)) {
			fail(ErrorCode::InvalidSpec, "sweep value '" + value + "' is not a number");
		}
		return x;
	}

	std::ofstream open_out(const std::filesystem::path& path) {
		if (path.has_parent_path()) {
			std::filesystem::create_directories(path.parent_path());
		}
		std::ofstream out(path);
		if (!out) {
			fail(ErrorCode::IoError, "cannot write " + path.string());
		}
		return out;
	}

	rl::TrainConfig with_target_speed(const rl::TrainConfig& base, double kmh) {
		if (!(kmh > 0.0)) {
			fail(ErrorCode::InvalidSpec, "target speed must be > 0");
		}
		rl::TrainConfig c = base;
		const double v = kmh / 3.6;
		auto scenario = std::make_shared<sim::Scenario>(*base.env.scenario);
		scenario->params.idm.v0 = v;
		c.env.scenario = scenario;
		c.env.target_speed = v;
		c.env.reward.target_speed = v;
		c.env.scheme.target_speed = v;
		return c;
	}

	SweepRow metrics_row(const SweepSpec& spec, const std::string& value, std::uint64_t seed, const EvalReport& r) {
		SweepRow row;
		row.variable = std::string(to_string(spec.variable));
		row.value = value;
		row.seed = seed;
		row.ret = r.ret;
		row.mean_velocity = r.mean_velocity;
		row.mean_abs_accel = r.mean_abs_accel;
		return row;
	}

	SweepRow failed_row(const SweepSpec& spec, const std::string& value, std::uint64_t seed, const std::string& error) {
		SweepRow row;
		row.variable = std::string(to_string(spec.variable));
		row.value = value;
		row.seed = seed;
		const double nan = std::numeric_limits<double>::quiet_NaN();
		row.ret = row.mean_velocity = row.mean_abs_accel = nan;
		row.failed = true;
		row.error = error;
		return row;
	}

	std::string cell_name(const SweepSpec& spec, const std::string& value, std::uint64_t seed) {
		return fmt::format("{}_{}_seed{}", to_string(spec.variable), value, seed);
	}

	void write_curve(const SweepOptions& options, const std::string& name, const rl::TrainResult& result) {
		if (!options.output_dir.empty()) {
			rl::write_learning_curve(options.output_dir / "cells" / (name + "_learning_curve.csv"), result.curve);
		}
	}

} // namespace

std::string_view to_string(SweepVariable v) noexcept {
	switch (v) {
	case SweepVariable::PenetrationRate:
		return "penetration_rate";
	case SweepVariable::TargetSpeed:
		return "target_speed";
	case SweepVariable::ScanScale:
		return "scan_scale";
	case SweepVariable::AdjacencyScheme:
		return "adjacency_scheme";
	case SweepVariable::AttentionHeads:
		return "attention_heads";
	}
	return "?";
}

SweepVariable sweep_variable_from_string(std::string_view name) {
	for (auto v : {SweepVariable::PenetrationRate, SweepVariable::TargetSpeed, SweepVariable::ScanScale,
			 SweepVariable::AdjacencyScheme, SweepVariable::AttentionHeads}) {
		if (name == to_string(v)) {
			return v;
		}
	}
	fail(ErrorCode::InvalidSpec, "unknown sweep variable '" + std::string(name) + "'");
}

void SweepSpec::validate() const {
	if (values.empty()) {
		fail(ErrorCode::InvalidSpec, "sweep needs at least one value");
	}
	if (seeds.empty()) {
		fail(ErrorCode::InvalidSpec, "sweep needs at least one seed");
	}
	if (episodes < 1) {
		fail(ErrorCode::InvalidSpec, "sweep episodes must be >= 1");
	}
}

rl::TrainConfig apply_sweep_value(const rl::TrainConfig& base, SweepVariable variable, const std::string& value) {
	rl::TrainConfig c = base;
	switch (variable) {
	case SweepVariable::PenetrationRate: {
		const double rate = parse_number(value);
		if (rate < 0.0 || rate > 1.0) {
			fail(ErrorCode::InvalidSpec, "penetration rate must lie in [0, 1]");
		}
		if (base.env.scenario->network.kind == sim::NetworkKind::Merge) {
			auto scenario = std::make_shared<sim::Scenario>(*base.env.scenario);
			scenario->network.cav_share = rate;
			c.env.scenario = scenario;
		} else {
			const int total = base.env.n_human + base.env.n_cav;
			c.env.n_cav = static_cast<int>(std::lround(rate * total));
			c.env.n_human = total - c.env.n_cav;
		}
		break;
	}
	case SweepVariable::TargetSpeed:
		c = with_target_speed(base, parse_number(value));
		break;
	case SweepVariable::ScanScale:
		c.env.scan_scale = parse_number(value);
		break;
	case SweepVariable::AdjacencyScheme:
		if (value == "position") {
			c.env.scheme.kind = graph::SchemeKind::PositionOnly;
		} else if (value == "velocity") {
			c.env.scheme.kind = graph::SchemeKind::VelocityOnly;
		} else if (value == "both") {
			c.env.scheme.kind = graph::SchemeKind::GaussianSpeedField;
		} else {
			fail(ErrorCode::InvalidSpec, "adjacency scheme must be position, velocity or both");
		}
		break;
	case SweepVariable::AttentionHeads: {
		const double heads = parse_number(value);
		if (heads < 0.0 || heads != std::floor(heads)) {
			fail(ErrorCode::InvalidSpec, "attention heads must be a non-negative integer");
		}
		c.network.heads = static_cast<int>(heads);
		break;
	}
	}
	c.env.validate();
	c.network.validate();
	return c;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, const rl::TrainConfig& base, const SweepOptions& options) {
	spec.validate();
	EvalOptions eval_options;
	eval_options.episodes = spec.episodes;
	std::vector<SweepRow> rows;

	if (spec.variable == SweepVariable::TargetSpeed) {
		for (auto seed : spec.seeds) {
			std::optional<rl::TrainResult> trained;
			std::string train_error;
			std::optional<double> baseline_return;
			try {
				rl::TrainConfig c = with_target_speed(base, kTargetSpeedBaselineKmh);
				c.seed = seed;
				trained = rl::train(c);
				write_curve(options, cell_name(spec, "train20", seed), *trained);
				const std::uint64_t s[] = {seed};
				baseline_return = evaluate(&trained->actor, c.env, s, eval_options).ret;
			} catch (const std::exception& e) {
				train_error = e.what();
			}
			for (const auto& value : spec.values) {
				if (!trained) {
					rows.push_back(failed_row(spec, value, seed, train_error));
					continue;
				}
				try {
					const auto c = apply_sweep_value(base, spec.variable, value);
					const std::uint64_t s[] = {seed};
					auto row = metrics_row(spec, value, seed, evaluate(&trained->actor, c.env, s, eval_options));
					if (baseline_return && *baseline_return != 0.0) {
						row.pct_vs_baseline = 100.0 * (row.ret - *baseline_return) / std::abs(*baseline_return);
					}
					rows.push_back(std::move(row));
				} catch (const std::exception& e) {
					rows.push_back(failed_row(spec, value, seed, e.what()));
				}
			}
		}
		return rows;
	}

	for (const auto& value : spec.values) {
		for (auto seed : spec.seeds) {
			try {
				auto c = apply_sweep_value(base, spec.variable, value);
				c.seed = seed;
				auto trained = rl::train(c);
				write_curve(options, cell_name(spec, value, seed), trained);
				const std::uint64_t s[] = {seed};
				rows.push_back(metrics_row(spec, value, seed, evaluate(&trained.actor, c.env, s, eval_options)));
			} catch (const std::exception& e) {
				rows.push_back(failed_row(spec, value, seed, e.what()));
			}
		}
	}
	return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
	auto out = open_out(path);
	out << "variable,value,seed,return,mean_velocity,mean_abs_accel\n";
	for (const auto& r : rows) {
		out << fmt::format("{},{},{},{},{},{}\n", r.variable, r.value, r.seed, r.ret, r.mean_velocity, r.mean_abs_accel);
	}
}

void write_sweep_errors(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
	auto out = open_out(path);
	out << "variable,value,seed,error\n";
	for (const auto& r : rows) {
		if (r.failed) {
			std::string msg = r.error;
			for (auto& ch : msg) {
				if (ch == ',' || ch == '\n') {
					ch = ';';
				}
			}
			out << fmt::format("{},{},{},{}\n", r.variable, r.value, r.seed, msg);
		}
	}
}

void write_sweep_percentages(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
	auto out = open_out(path);
	out << "value,seed,return,pct_change\n";
	for (const auto& r : rows) {
		if (r.pct_vs_baseline) {
			out << fmt::format("{},{},{},{}\n", r.value, r.seed, r.ret, *r.pct_vs_baseline);
		}
	}
}

} // namespace cavg::eval
