#include <cavg/check/suites.hpp>
#include <cavg/graph/adjacency.hpp>
#include <cavg/nn/ops.hpp>
#include <cavg/nn/policy.hpp>
#include <cavg/rl/environment.hpp>
#include <cavg/sim/simulator.hpp>

#include <benchmark/benchmark.h>

using namespace cavg;

namespace {

// Ring of 230 m per 22 vehicles, scaled with the vehicle count.
sim::SimState ring_state(int vehicles, int cavs) {
	auto sc = std::make_shared<sim::Scenario>();
	sc->network.ring_length = 230.0 * vehicles / 22.0;
	return sim::warm_up(sim::build_network(sc, vehicles - cavs, cavs, 1), 100);
}

void BM_SimStep(benchmark::State& state) {
	const int n = static_cast<int>(state.range(0));
	auto s = ring_state(n, n / 4);
	for (auto _ : state) {
		auto r = sim::step(s, sim::idm_cav_actions(s, &s.rng), 0.1);
		s = std::move(r.state);
	}
	state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SimStep)->Arg(22)->Arg(88)->Arg(352);

void BM_Adjacency(benchmark::State& state) {
	const int cavs = static_cast<int>(state.range(0));
	const auto s = ring_state(2 * cavs, cavs);
	const graph::AdjacencyScheme scheme;
	for (auto _ : state) {
		benchmark::DoNotOptimize(graph::build_adjacency(s, scheme, 30.0));
	}
}
BENCHMARK(BM_Adjacency)->Arg(4)->Arg(16)->Arg(64);

struct ActorFixture {
	nn::ActorNetwork actor;
	Matrix obs;
	nn::GraphInputs graph;

	ActorFixture(int cavs, int heads) {
		rl::EnvConfig env;
		env.scenario = std::make_shared<sim::Scenario>();
		env.n_human = 6;
		env.n_cav = cavs;
		rl::Environment e(env);
		e.reset(3);
		obs = e.observe();
		graph = nn::GraphInputs::from(e.adjacency());
		nn::NetworkConfig config;
		config.heads = heads;
		Rng rng(5);
		actor = nn::ActorNetwork(config, rng);
	}
};

void BM_ActorForward(benchmark::State& state) {
	ActorFixture f(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
	for (auto _ : state) {
		benchmark::DoNotOptimize(f.actor.mean_actions(f.obs, f.graph));
	}
}
BENCHMARK(BM_ActorForward)->Args({16, 8})->Args({16, 0})->Args({4, 8});

void BM_ActorForwardBackward(benchmark::State& state) {
	ActorFixture f(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
	for (auto _ : state) {
		f.actor.params().zero_grad();
		nn::Tape tape;
		const auto out = f.actor.forward(tape, f.obs, f.graph);
		benchmark::DoNotOptimize(tape.backward(nn::mean(out.mean)));
	}
}
BENCHMARK(BM_ActorForwardBackward)->Args({16, 8})->Args({16, 0})->Args({4, 8});

void BM_GradientSuite(benchmark::State& state) {
	for (auto _ : state) {
		benchmark::DoNotOptimize(check::gradient_attention(1, 7));
	}
}
BENCHMARK(BM_GradientSuite)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
