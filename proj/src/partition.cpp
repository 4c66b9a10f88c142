#include "fedprompt/partition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace fedprompt {

namespace {

// Split n items into k integer counts proportional to w (sum 1), assigning
// leftovers by largest remainder.
std::vector<long> proportional_counts(long n, const std::vector<Scalar>& w) {
  const std::size_t k = w.size();
  std::vector<long> counts(k, 0);
  std::vector<std::pair<Scalar, std::size_t>> remainders;
  long assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const Scalar exact = w[i] * static_cast<Scalar>(n);
    counts[i] = static_cast<long>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (long r = 0; r < n - assigned; ++r) {
    counts[remainders[static_cast<std::size_t>(r) % k].second] += 1;
  }
  return counts;
}

void repair_empty_shards(std::vector<ClientShard>& shards) {
  for (;;) {
    auto empty = std::find_if(shards.begin(), shards.end(),
                              [](const ClientShard& s) { return s.samples.empty(); });
    if (empty == shards.end()) return;
    auto largest = std::max_element(shards.begin(), shards.end(),
                                    [](const ClientShard& a, const ClientShard& b) {
                                      return a.samples.size() < b.samples.size();
                                    });
    if (largest->samples.size() <= 1) {
      throw PartitionError("partition: not enough samples to populate every client");
    }
    empty->samples.push_back(largest->samples.back());
    largest->samples.pop_back();
  }
}

}  // namespace

std::vector<ClientShard> dirichlet_partition(std::span<const long> sample_ids,
                                             const Dataset& data, int clients, Scalar beta,
                                             RngStream& rng) {
  if (clients < 1) throw ContractError("dirichlet_partition: clients must be >= 1");
  if (beta <= 0.0) throw ContractError("dirichlet_partition: beta must be > 0");
  if (static_cast<long>(sample_ids.size()) < clients) {
    throw PartitionError("dirichlet_partition: fewer samples than clients");
  }

  std::map<int, std::vector<long>> by_class;
  for (long id : sample_ids) {
    by_class[data.samples[static_cast<std::size_t>(id)].class_id].push_back(id);
  }

  std::vector<ClientShard> shards(static_cast<std::size_t>(clients));
  for (int k = 0; k < clients; ++k) shards[static_cast<std::size_t>(k)].client = k;

  for (auto& [class_id, ids] : by_class) {
    std::sort(ids.begin(), ids.end());
    rng.shuffle(ids);
    const std::vector<Scalar> w = rng.dirichlet(beta, clients);
    const std::vector<long> counts = proportional_counts(static_cast<long>(ids.size()), w);
    std::size_t cursor = 0;
    for (int k = 0; k < clients; ++k) {
      for (long i = 0; i < counts[static_cast<std::size_t>(k)]; ++i) {
        shards[static_cast<std::size_t>(k)].samples.push_back(ids[cursor++]);
      }
    }
  }
  repair_empty_shards(shards);
  for (auto& shard : shards) std::sort(shard.samples.begin(), shard.samples.end());
  return shards;
}

ClassSplit base_novel_split(int classes, Scalar fraction) {
  if (classes < 2) throw ContractError("base_novel_split: need at least two classes");
  if (fraction <= 0.0 || fraction >= 1.0) {
    throw ContractError("base_novel_split: fraction must be in (0, 1)");
  }
  const int base = static_cast<int>(std::ceil(fraction * static_cast<Scalar>(classes)));
  if (base <= 0 || base >= classes) {
    throw ContractError("base_novel_split: degenerate split");
  }
  ClassSplit split;
  for (int c = 0; c < base; ++c) split.base.push_back(c);
  for (int c = base; c < classes; ++c) split.novel.push_back(c);
  return split;
}

LodoSplit leave_one_domain_out(int domains, int held_out) {
  if (domains < 2) throw ContractError("leave_one_domain_out: need at least two domains");
  if (held_out < 0 || held_out >= domains) {
    throw ContractError("leave_one_domain_out: unknown domain " + std::to_string(held_out));
  }
  LodoSplit split;
  split.test_domain = held_out;
  for (int d = 0; d < domains; ++d) {
    if (d != held_out) split.train_domains.push_back(d);
  }
  return split;
}

std::vector<ClientShard> split_per_domain(std::span<const long> sample_ids,
                                          const Dataset& data,
                                          std::span<const int> train_domains,
                                          int clients_per_domain, RngStream& rng) {
  if (clients_per_domain < 1) {
    throw ContractError("split_per_domain: clients_per_domain must be >= 1");
  }
  std::vector<ClientShard> shards;
  int next_client = 0;
  for (int d : train_domains) {
    std::vector<long> ids;
    for (long id : sample_ids) {
      if (data.samples[static_cast<std::size_t>(id)].domain == d) ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    rng.shuffle(ids);
    std::vector<ClientShard> domain_shards(static_cast<std::size_t>(clients_per_domain));
    for (int k = 0; k < clients_per_domain; ++k) {
      domain_shards[static_cast<std::size_t>(k)].client = next_client + k;
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      domain_shards[i % static_cast<std::size_t>(clients_per_domain)].samples.push_back(ids[i]);
    }
    for (auto& shard : domain_shards) {
      if (shard.samples.empty()) {
        throw PartitionError("split_per_domain: domain " + std::to_string(d) +
                             " has too few samples for " +
                             std::to_string(clients_per_domain) + " clients");
      }
      std::sort(shard.samples.begin(), shard.samples.end());
      shards.push_back(std::move(shard));
    }
    next_client += clients_per_domain;
  }
  return shards;
}

}  // namespace fedprompt
