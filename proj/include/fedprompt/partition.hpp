#pragma once

#include "fedprompt/task.hpp"

#include <span>

namespace fedprompt {

class PartitionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClientShard {
  int client = 0;
  std::vector<long> samples;  // sample ids into the dataset
  long size() const { return static_cast<long>(samples.size()); }
};

// Disjoint class partition; novel classes never appear in a training shard.
struct ClassSplit {
  std::vector<int> base;
  std::vector<int> novel;
};

// Per class, proportions ~ Dirichlet(beta * 1_K) decide how that class's
// samples spread over clients. Empty shards are repaired by moving one
// sample from the largest shard.
std::vector<ClientShard> dirichlet_partition(std::span<const long> sample_ids,
                                             const Dataset& data, int clients, Scalar beta,
                                             RngStream& rng);

// First ceil(fraction * classes) ids are base, the rest novel.
ClassSplit base_novel_split(int classes, Scalar fraction);

struct LodoSplit {
  std::vector<int> train_domains;
  int test_domain = 0;
};

LodoSplit leave_one_domain_out(int domains, int held_out);

// Uniform random split of each training domain's samples across a fixed
// number of clients per domain.
std::vector<ClientShard> split_per_domain(std::span<const long> sample_ids,
                                          const Dataset& data,
                                          std::span<const int> train_domains,
                                          int clients_per_domain, RngStream& rng);

}  // namespace fedprompt
