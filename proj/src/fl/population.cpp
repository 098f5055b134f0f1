#include "certfl/fl/population.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "certfl/error.hpp"
#include "certfl/random.hpp"

namespace certfl::fl {

ClientPopulation ClientPopulation::make(std::size_t pool_size, std::size_t num_clients, std::size_t num_malicious,
                                        std::uint64_t seed) {
  if (num_clients == 0) throw ConfigError("population needs at least one client");
  if (num_malicious > num_clients) throw ConfigError("more malicious clients than clients");
  if (pool_size < num_clients) {
    throw ConfigError("client pool of " + std::to_string(pool_size) + " points cannot give each of " +
                      std::to_string(num_clients) + " clients a shard");
  }
  ClientPopulation pop;
  pop.num_clients = num_clients;
  pop.num_malicious = num_malicious;
  pop.rng_seed = seed;

  std::vector<std::size_t> order(pool_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shard_rng(derive_seed(seed, {0x5348415244}));
  std::shuffle(order.begin(), order.end(), shard_rng);
  pop.shards.resize(num_clients);
  const std::size_t base = pool_size / num_clients;
  const std::size_t extra = pool_size % num_clients;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < num_clients; ++c) {
    const std::size_t len = base + (c < extra ? 1 : 0);
    pop.shards[c].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                         order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    std::sort(pop.shards[c].begin(), pop.shards[c].end());
    pos += len;
  }

  std::vector<std::size_t> ids(num_clients);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Rng mal_rng(derive_seed(seed, {0x4d414c}));
  std::shuffle(ids.begin(), ids.end(), mal_rng);
  pop.malicious.assign(num_clients, false);
  for (std::size_t k = 0; k < num_malicious; ++k) pop.malicious[ids[k]] = true;
  return pop;
}

std::vector<std::size_t> ClientPopulation::malicious_ids() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < num_clients; ++c) {
    if (malicious[c]) out.push_back(c);
  }
  return out;
}

std::vector<std::size_t> sample_quorum(const ClientPopulation& pop, std::size_t size, std::uint64_t round_seed) {
  if (size > pop.num_clients) {
    throw ConfigError("quorum of " + std::to_string(size) + " exceeds the population of " +
                      std::to_string(pop.num_clients));
  }
  std::vector<std::size_t> ids(pop.num_clients);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Rng rng(round_seed);
  // Partial Fisher-Yates: the first `size` slots are a uniform sample.
  for (std::size_t k = 0; k < size; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pop.num_clients - 1);
    std::swap(ids[k], ids[pick(rng)]);
  }
  ids.resize(size);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::size_t count_malicious(const ClientPopulation& pop, const std::vector<std::size_t>& quorum) {
  std::size_t n = 0;
  for (std::size_t id : quorum) n += pop.malicious.at(id) ? 1 : 0;
  return n;
}

namespace {
double log_choose(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}
}  // namespace

double hypergeometric_tail(std::size_t population, std::size_t successes, std::size_t draws, std::size_t k) {
  if (successes > population || draws > population) throw InputError("hypergeometric parameters out of range");
  double total = 0.0;
  const double denom = log_choose(population, draws);
  for (std::size_t i = k; i <= std::min(successes, draws); ++i) {
    if (draws - i > population - successes) continue;
    total += std::exp(log_choose(successes, i) + log_choose(population - successes, draws - i) - denom);
  }
  return total;
}

}  // namespace certfl::fl
