#pragma once

#include <cavg/rl/ppo.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cavg::eval {

enum class SweepVariable { PenetrationRate, TargetSpeed, ScanScale, AdjacencyScheme, AttentionHeads };

std::string_view to_string(SweepVariable v) noexcept;
/// Accepts the names printed by to_string (`penetration_rate`, `target_speed`,
/// `scan_scale`, `adjacency_scheme`, `attention_heads`).
SweepVariable sweep_variable_from_string(std::string_view name);

/// Values are kept as text: numbers for the numeric variables (target speed in
/// km/h), `position` / `velocity` / `both` for the adjacency scheme.
struct SweepSpec {
	SweepVariable variable = SweepVariable::AttentionHeads;
	std::vector<std::string> values;
	int episodes = 10; // evaluation episodes per cell
	std::vector<std::uint64_t> seeds;

	void validate() const;
};

struct SweepRow {
	std::string variable;
	std::string value;
	std::uint64_t seed = 0;
	double ret = 0.0;
	double mean_velocity = 0.0;
	double mean_abs_accel = 0.0;
	bool failed = false;
	std::string error;
	/// TargetSpeed only: percentage change of return vs the 20 km/h evaluation.
	std::optional<double> pct_vs_baseline;
};

/// Training target speed of the TargetSpeed protocol, km/h.
inline constexpr double kTargetSpeedBaselineKmh = 20.0;

/// Applies one sweep value to a copy of `base`. TargetSpeed updates the reward
/// target, the observation scale, the IDM desired speed and the velocity-only
/// scheme's v_T together.
rl::TrainConfig apply_sweep_value(const rl::TrainConfig& base, SweepVariable variable, const std::string& value);

struct SweepOptions {
	/// Cell outputs (learning curves) go under this directory when set.
	std::filesystem::path output_dir;
};

/// Trains and evaluates every (value, seed) cell. TargetSpeed trains once per
/// seed at 20 km/h and evaluates that policy at each value. A failing cell is
/// recorded with `failed = true` and the sweep continues.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, const rl::TrainConfig& base, const SweepOptions& options = {});

/// CSV `variable,value,seed,return,mean_velocity,mean_abs_accel` (failed cells hold `nan`).
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
/// CSV `variable,value,seed,error` for failed cells.
void write_sweep_errors(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
/// CSV `value,seed,return,pct_change` for the TargetSpeed protocol.
void write_sweep_percentages(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

} // namespace cavg::eval
