#include <cavg/common/error.hpp>
#include <cavg/graph/adjacency.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

using namespace cavg;

namespace {

sim::SimState cavs(std::vector<std::pair<double, double>> pos_speed, double ring_length = 230.0) {
	auto sc = std::make_shared<sim::Scenario>();
	sc->network.ring_length = ring_length;
	sim::SimState s;
	s.scenario = sc;
	int id = 0;
	for (auto [x, v] : pos_speed) {
		s.vehicles.push_back({id++, sim::VehicleKind::Cav, x, v, 0.0, 0});
	}
	return s;
}

} // namespace

TEST(Kernel, GaussianValueAtOneLengthScale) {
	// exp(-4^2 / (2 * 4^2)) = exp(-0.5)
	EXPECT_NEAR(graph::gaussian_kernel(4.0, graph::KernelSpec{}), 0.6065306597, 1e-10);
	EXPECT_DOUBLE_EQ(graph::gaussian_kernel(0.0, graph::KernelSpec{}), 1.0);
}

TEST(Kernel, UsesShortestCyclicDistance) {
	const graph::KernelSpec k;
	EXPECT_DOUBLE_EQ(graph::gaussian_kernel(1.0, 227.0, k, 230.0), graph::gaussian_kernel(4.0, k));
	EXPECT_DOUBLE_EQ(graph::gaussian_kernel(1.0, 227.0, k), graph::gaussian_kernel(226.0, k));
}

TEST(Adjacency, GaussianSpeedFieldEntry) {
	// 4 m apart, speed difference 2 m/s: exp(-0.5) * 2 = 1.21306...
	const auto adj = graph::build_adjacency(cavs({{10.0, 5.0}, {14.0, 7.0}}), {}, 30.0);
	EXPECT_NEAR(adj.weights(0, 1), 1.2130613195, 1e-9);
	EXPECT_NEAR(adj.weights(1, 0), -1.2130613195, 1e-9);
	EXPECT_EQ(adj.weights(0, 0), 1.0);
	EXPECT_EQ(adj.weights(1, 1), 1.0);
	EXPECT_EQ(adj.degree(0), 2.0);
}

TEST(Adjacency, EdgesBeyondScanScaleAreMasked) {
	const auto adj = graph::build_adjacency(cavs({{0.0, 5.0}, {20.0, 9.0}, {100.0, 1.0}}), {}, 30.0);
	EXPECT_EQ(adj.neighbours(0, 2), 0.0);
	EXPECT_EQ(adj.weights(0, 2), 0.0);
	EXPECT_EQ(adj.weights(2, 1), 0.0);
	EXPECT_EQ(adj.neighbours(0, 1), 1.0);
	EXPECT_EQ(adj.neighbour_set(2), std::vector<int>{2});
	EXPECT_EQ(adj.degree(2), 1.0);
}

TEST(Adjacency, ScanScaleIsInclusive) {
	const auto adj = graph::build_adjacency(cavs({{0.0, 5.0}, {30.0, 5.0}}), {}, 30.0);
	EXPECT_EQ(adj.neighbours(0, 1), 1.0);
}

TEST(Adjacency, EdgesWrapAroundTheRing) {
	const auto adj = graph::build_adjacency(cavs({{2.0, 5.0}, {225.0, 6.0}}), {}, 30.0);
	EXPECT_NEAR(adj.weights(0, 1), std::exp(-49.0 / 32.0) * 1.0, 1e-12);
}

TEST(Adjacency, PositionOnlyIsSignedOffset) {
	graph::AdjacencyScheme scheme;
	scheme.kind = graph::SchemeKind::PositionOnly;
	const auto adj = graph::build_adjacency(cavs({{10.0, 5.0}, {25.0, 7.0}}), scheme, 30.0);
	EXPECT_DOUBLE_EQ(adj.weights(0, 1), -15.0);
	EXPECT_DOUBLE_EQ(adj.weights(1, 0), 15.0);
}

TEST(Adjacency, VelocityOnlyFormula) {
	graph::AdjacencyScheme scheme;
	scheme.kind = graph::SchemeKind::VelocityOnly;
	scheme.target_speed = 8.0;
	scheme.epsilon = 1e-3;
	const auto adj = graph::build_adjacency(cavs({{10.0, 5.0}, {25.0, 7.0}}), scheme, 30.0);
	EXPECT_DOUBLE_EQ(adj.weights(0, 1), 8.0 / (5.0 * 2.0 + 1e-3));
	EXPECT_DOUBLE_EQ(adj.weights(1, 0), 8.0 / (7.0 * 2.0 + 1e-3));
}

TEST(Adjacency, DegreeNormalisationDividesRows) {
	const auto adj = graph::build_adjacency(cavs({{0.0, 5.0}, {10.0, 9.0}, {20.0, 1.0}}), {}, 30.0);
	const Matrix n = graph::degree_normalize(adj);
	for (int i = 0; i < 3; ++i) {
		for (int j = 0; j < 3; ++j) {
			EXPECT_DOUBLE_EQ(n(i, j), adj.weights(i, j) / 3.0);
		}
	}
}

TEST(Adjacency, NoCavsIsAnError) {
	auto s = cavs({{0.0, 1.0}});
	s.vehicles[0].kind = sim::VehicleKind::Human;
	try {
		graph::build_adjacency(s, {}, 30.0);
		FAIL();
	} catch (const Error& e) {
		EXPECT_EQ(e.code(), ErrorCode::NoAgents);
	}
}

TEST(Adjacency, CsvHasHeaderAndRows) {
	const auto adj = graph::build_adjacency(cavs({{0.0, 5.0}, {10.0, 9.0}}), {}, 30.0);
	const auto path = std::filesystem::temp_directory_path() / "cavg_adj_test.csv";
	graph::write_adjacency_csv(path, adj);
	std::ifstream in(path);
	std::string line;
	int lines = 0;
	std::getline(in, line);
	EXPECT_EQ(line, "0,1");
	while (std::getline(in, line)) {
		++lines;
	}
	EXPECT_EQ(lines, 2);
}
