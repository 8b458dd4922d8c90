#pragma once

#include <cavg/common/matrix.hpp>
#include <cavg/sim/types.hpp>

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace cavg::graph {

struct KernelSpec {
	double amplitude = 1.0;
	double length_scale = 4.0; // meters

	void validate() const;
	bool operator==(const KernelSpec&) const = default;
};

/// A * exp(-d^2 / (2 sigma^2)) for a route distance d.
double gaussian_kernel(double distance, const KernelSpec& spec) noexcept;

/// Kernel between two positions; on a loop of `loop_length` the shortest cyclic
/// distance is used.
double gaussian_kernel(double xi, double xj, const KernelSpec& spec, std::optional<double> loop_length = std::nullopt) noexcept;

enum class SchemeKind { GaussianSpeedField, PositionOnly, VelocityOnly };

std::string_view to_string(SchemeKind kind) noexcept;

struct AdjacencyScheme {
	SchemeKind kind = SchemeKind::GaussianSpeedField;
	KernelSpec kernel;
	double epsilon = 1e-3;          // VelocityOnly
	double target_speed = 30.0 / 3.6; // VelocityOnly numerator v_T

	void validate() const;
	bool operator==(const AdjacencyScheme&) const = default;
};

struct AdjacencyMatrix {
	/// M_t; off-diagonal entries beyond the scan scale are exactly 0, diagonal 1.
	Matrix weights;
	/// Binary neighbour indicator including self: 1 iff route distance <= SC.
	Matrix neighbours;
	Vector degree;
	double scan_scale = 0.0;
	std::vector<int> agent_ids;

	std::size_t size() const noexcept { return agent_ids.size(); }
	/// Neighbour set N_i (agent indices, self included).
	std::vector<int> neighbour_set(std::size_t i) const;
};

/// Builds M_t over the CAVs of `state` in vehicle order. Throws NoAgents when
/// no CAV is present.
///
/// GaussianSpeedField: M(i,j) = K(x_i,x_j) K(x_j,x_j)^-1 (v_j - v_i), i.e. the
/// one-point posterior mean of the relative speed at the ego position.
/// PositionOnly: M(i,j) = signed route offset x_i - x_j.
/// VelocityOnly: M(i,j) = v_T / (v_i |v_j - v_i| + eps).
AdjacencyMatrix build_adjacency(const sim::SimState& state, const AdjacencyScheme& scheme, double scan_scale);

/// D^-1 M_t with D = diag(degree).
Matrix degree_normalize(const AdjacencyMatrix& adj);

/// Row-major CSV, header line = agent ids.
void write_adjacency_csv(const std::filesystem::path& path, const AdjacencyMatrix& adj);

} // namespace cavg::graph
