#pragma once

#include <cstdint>
#include <random>

namespace cavg {

using Rng = std::mt19937_64;

// Counter-based stream splitting: a master seed plus (purpose, index) yields an
// independent generator. Streams never share state, so episodes and workers can
// be replayed in isolation.
enum class StreamPurpose : std::uint64_t {
	Init = 1,
	Episode = 2,
	Environment = 3,
	Policy = 4,
	Minibatch = 5,
	Evaluation = 6,
	Perturbation = 7,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
	x += 0x9e3779b97f4a7c15ULL;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, StreamPurpose purpose, std::uint64_t index = 0) noexcept {
	return splitmix64(splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(purpose))) + index);
}

inline Rng make_stream(std::uint64_t master, StreamPurpose purpose, std::uint64_t index = 0) {
	return Rng(derive_seed(master, purpose, index));
}

} // namespace cavg
