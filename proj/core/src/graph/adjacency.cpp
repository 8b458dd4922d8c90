#include <cavg/graph/adjacency.hpp>

#include <cavg/common/error.hpp>
#include <cavg/sim/geometry.hpp>

#include <fmt/format.h>

#include <cmath>
#include <fstream>

namespace cavg::graph {

void KernelSpec::validate() const {
	if (!(amplitude > 0.0) || !(length_scale > 0.0)) {
		fail(ErrorCode::InvalidSpec, "kernel amplitude and length scale must be > 0");
	}
}

void AdjacencyScheme::validate() const {
	kernel.validate();
	if (kind == SchemeKind::VelocityOnly && !(epsilon > 0.0)) {
		fail(ErrorCode::InvalidSpec, "velocity-only scheme needs epsilon > 0");
	}
}

std::string_view to_string(SchemeKind kind) noexcept {
	switch (kind) {
		case SchemeKind::GaussianSpeedField: return "both";
		case SchemeKind::PositionOnly: return "position";
		case SchemeKind::VelocityOnly: return "velocity";
	}
	return "unknown";
}

double gaussian_kernel(double distance, const KernelSpec& spec) noexcept {
	const double s = spec.length_scale;
	return spec.amplitude * std::exp(-(distance * distance) / (2.0 * s * s));
}

double gaussian_kernel(double xi, double xj, const KernelSpec& spec, std::optional<double> loop_length) noexcept {
	double d = std::abs(xi - xj);
	if (loop_length) {
		const double m = sim::wrap(xi - xj, *loop_length);
		d = std::min(m, *loop_length - m);
	}
	return gaussian_kernel(d, spec);
}

std::vector<int> AdjacencyMatrix::neighbour_set(std::size_t i) const {
	std::vector<int> out;
	for (Eigen::Index j = 0; j < neighbours.cols(); ++j) {
		if (neighbours(static_cast<Eigen::Index>(i), j) != 0.0) {
			out.push_back(static_cast<int>(j));
		}
	}
	return out;
}

AdjacencyMatrix build_adjacency(const sim::SimState& state, const AdjacencyScheme& scheme, double scan_scale) {
	std::vector<int> idx;
	for (int i = 0; i < static_cast<int>(state.vehicles.size()); ++i) {
		if (state.vehicles[i].is_cav()) {
			idx.push_back(i);
		}
	}
	if (idx.empty()) {
		fail(ErrorCode::NoAgents, "adjacency requested with zero CAVs");
	}
	const auto& net = state.network();
	const auto n = static_cast<Eigen::Index>(idx.size());

	AdjacencyMatrix adj;
	adj.scan_scale = scan_scale;
	adj.weights = Matrix::Identity(n, n);
	adj.neighbours = Matrix::Identity(n, n);
	for (const int i : idx) {
		adj.agent_ids.push_back(state.vehicles[i].id);
	}

	const double self_kernel = scheme.kernel.amplitude;
	for (Eigen::Index a = 0; a < n; ++a) {
		const auto& vi = state.vehicles[idx[a]];
		for (Eigen::Index b = 0; b < n; ++b) {
			if (a == b) {
				continue;
			}
			const auto& vj = state.vehicles[idx[b]];
			const double d = sim::route_distance(net, vi, vj);
			if (d > scan_scale) {
				continue;
			}
			adj.neighbours(a, b) = 1.0;
			switch (scheme.kind) {
				case SchemeKind::GaussianSpeedField:
					adj.weights(a, b) = gaussian_kernel(d, scheme.kernel) / self_kernel * (vj.speed - vi.speed);
					break;
				case SchemeKind::PositionOnly:
					adj.weights(a, b) = sim::signed_route_offset(net, vi, vj);
					break;
				case SchemeKind::VelocityOnly:
					adj.weights(a, b) = scheme.target_speed / (vi.speed * std::abs(vj.speed - vi.speed) + scheme.epsilon);
					break;
			}
		}
	}
	adj.degree = adj.neighbours.rowwise().sum();
	return adj;
}

Matrix degree_normalize(const AdjacencyMatrix& adj) {
	return adj.degree.cwiseInverse().asDiagonal() * adj.weights;
}

void write_adjacency_csv(const std::filesystem::path& path, const AdjacencyMatrix& adj) {
	std::ofstream out(path);
	if (!out) {
		fail(ErrorCode::IoError, "cannot open " + path.string());
	}
	for (std::size_t j = 0; j < adj.agent_ids.size(); ++j) {
		out << (j ? "," : "") << adj.agent_ids[j];
	}
	out << '\n';
	for (Eigen::Index i = 0; i < adj.weights.rows(); ++i) {
		for (Eigen::Index j = 0; j < adj.weights.cols(); ++j) {
			out << (j ? "," : "") << fmt::format("{}", adj.weights(i, j));
		}
		out << '\n';
	}
}

} // namespace cavg::graph
