#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedcanon/dataset.hpp"

namespace fedcanon {

// How to split a dataset across clients. Dirichlet mode draws per-class client
// proportions from Dir(eta * 1_N); smaller eta means stronger label skew.
struct PartitionSpec {
    enum class Mode { Iid, Dirichlet };
    Mode mode = Mode::Iid;
    double eta = 1.0;
    int n_clients = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

// Disjoint, exhaustive shards; every client receives at least one sample
// (Dirichlet proportions are redrawn up to 100 times to satisfy this).
std::vector<Shard> partition(const Dataset& ds, const PartitionSpec& spec);

struct HeterogeneityReport {
    std::vector<std::vector<int>> label_hist;  // per client, per class
    std::vector<double> tv;                    // total variation to the global label law
    double mean_tv = 0.0;
};

HeterogeneityReport heterogeneity_report(const std::vector<Shard>& shards, const Dataset& ds);

// Order-sensitive digest of shard contents; equal partitions hash equal.
std::uint64_t shard_hash(const std::vector<Shard>& shards);

}  // namespace fedcanon
