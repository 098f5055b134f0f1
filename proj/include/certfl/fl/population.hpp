#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace certfl::fl {

// Clients own disjoint random shards of the client pool. Shard sizes differ
// by at most one and together cover every pool index.
struct ClientPopulation {
  std::size_t num_clients = 0;
  std::size_t num_malicious = 0;
  std::vector<std::vector<std::size_t>> shards;  // pool indices per client
  std::vector<bool> malicious;                    // per client, fixed at setup
  std::uint64_t rng_seed = 0;

  static ClientPopulation make(std::size_t pool_size, std::size_t num_clients, std::size_t num_malicious,
                               std::uint64_t seed);

  std::vector<std::size_t> malicious_ids() const;
};

// Uniform sample of `size` distinct client ids (ascending), a pure function
// of round_seed.
std::vector<std::size_t> sample_quorum(const ClientPopulation& pop, std::size_t size, std::uint64_t round_seed);

std::size_t count_malicious(const ClientPopulation& pop, const std::vector<std::size_t>& quorum);

// P(X >= k) for X ~ Hypergeometric(population, successes, draws).
double hypergeometric_tail(std::size_t population, std::size_t successes, std::size_t draws, std::size_t k);

}  // namespace certfl::fl
