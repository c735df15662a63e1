#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "fedcanon/errors.hpp"
#include "fedcanon/partitioning.hpp"
#include "fedcanon/problems.hpp"

using namespace fedcanon;

namespace {

Dataset balanced_dataset(int samples, int classes, std::uint64_t seed = 0) {
    BlobsSpec spec;
    spec.features = 3;
    spec.classes = classes;
    spec.train_samples = samples;
    spec.test_samples = 0;
    spec.seed = seed;
    return synth_blobs(spec);
}

void check_exhaustive_disjoint(const std::vector<Shard>& shards, int total) {
    std::vector<int> seen;
    for (const auto& s : shards) seen.insert(seen.end(), s.indices.begin(), s.indices.end());
    CHECK(static_cast<int>(seen.size()) == total);
    std::sort(seen.begin(), seen.end());
    CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
    CHECK(seen.front() == 0);
    CHECK(seen.back() == total - 1);
}

}  // namespace

TEST_CASE("single client gets the whole dataset in any mode") {
    const auto ds = balanced_dataset(20, 4);
    for (auto mode : {PartitionSpec::Mode::Iid, PartitionSpec::Mode::Dirichlet}) {
        PartitionSpec spec{mode, 0.5, 1, 3};
        const auto shards = partition(ds, spec);
        REQUIRE(shards.size() == 1);
        CHECK(shards[0].size() == 20);
    }
}

TEST_CASE("iid split of 10 samples over 2 clients is 5/5") {
    const auto ds = balanced_dataset(10, 2);
    const auto shards = partition(ds, {PartitionSpec::Mode::Iid, 1.0, 2, 7});
    CHECK(shards[0].size() == 5);
    CHECK(shards[1].size() == 5);
    check_exhaustive_disjoint(shards, 10);
}

TEST_CASE("shards are disjoint and exhaustive across modes and seeds") {
    const auto ds = balanced_dataset(103, 5);
    for (auto mode : {PartitionSpec::Mode::Iid, PartitionSpec::Mode::Dirichlet})
        for (std::uint64_t seed = 0; seed < 8; ++seed)
            for (int n : {2, 7}) {
                const auto shards = partition(ds, {mode, 0.3, n, seed});
                check_exhaustive_disjoint(shards, ds.size());
                for (const auto& s : shards) CHECK(s.size() >= 1);
            }
}

TEST_CASE("identical spec yields identical shards") {
    const auto ds = balanced_dataset(60, 3);
    const PartitionSpec spec{PartitionSpec::Mode::Dirichlet, 0.2, 5, 11};
    const auto a = partition(ds, spec);
    const auto b = partition(ds, spec);
    CHECK(shard_hash(a) == shard_hash(b));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].indices == b[i].indices);
}

TEST_CASE("strong skew concentrates labels within clients") {
    const auto ds = balanced_dataset(1000, 10);
    double total_max_frac = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto shards = partition(ds, {PartitionSpec::Mode::Dirichlet, 0.05, 10, seed});
        const auto rep = heterogeneity_report(shards, ds);
        double mean_max = 0.0;
        for (std::size_t i = 0; i < shards.size(); ++i) {
            const int biggest = *std::max_element(rep.label_hist[i].begin(),
                                                  rep.label_hist[i].end());
            mean_max += static_cast<double>(biggest) / shards[i].size();
        }
        total_max_frac += mean_max / shards.size();
    }
    CHECK(total_max_frac / 20.0 >= 0.5);
}

TEST_CASE("heterogeneity decreases with eta") {
    const auto ds = balanced_dataset(1000, 10);
    auto mean_tv = [&](double eta) {
        double s = 0.0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto shards = partition(ds, {PartitionSpec::Mode::Dirichlet, eta, 10, seed});
            s += heterogeneity_report(shards, ds).mean_tv;
        }
        return s / 20.0;
    };
    const double strong = mean_tv(0.05), mid = mean_tv(1.0), weak = mean_tv(100.0);
    CHECK(strong > mid);
    CHECK(mid > weak);
}

TEST_CASE("iid splits stay close to the global label law") {
    const auto ds = balanced_dataset(2000, 10);
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto shards = partition(ds, {PartitionSpec::Mode::Iid, 1.0, 10, seed});
        total += heterogeneity_report(shards, ds).mean_tv;
    }
    CHECK(total / 10.0 <= 0.1);
}

TEST_CASE("total variation edge cases") {
    // single-class data: every split has zero distance
    Dataset ds;
    ds.dim = 1;
    ds.num_classes = 2;
    for (int i = 0; i < 12; ++i) {
        ds.rows.push_back({{0, 1.0}});
        ds.labels.push_back(1);
    }
    const auto shards = partition(ds, {PartitionSpec::Mode::Iid, 1.0, 3, 0});
    for (double tv : heterogeneity_report(shards, ds).tv) CHECK(tv == doctest::Approx(0.0));

    // one client per class over 10 balanced classes: tv = 0.9
    const auto ten = balanced_dataset(100, 10);
    std::vector<Shard> manual(10);
    for (int i = 0; i < 10; ++i) manual[i].owner = i;
    for (int j = 0; j < ten.size(); ++j) manual[ten.labels[j]].indices.push_back(j);
    const auto rep = heterogeneity_report(manual, ten);
    for (double tv : rep.tv) CHECK(tv == doctest::Approx(0.9));
}

TEST_CASE("impossible min-one-sample constraints raise after retries") {
    // 10 ultra-skewed clients fighting over 10 single-class samples
    Dataset ds;
    ds.dim = 1;
    ds.num_classes = 2;
    for (int i = 0; i < 10; ++i) {
        ds.rows.push_back({{0, 1.0}});
        ds.labels.push_back(0);
    }
    CHECK_THROWS_AS(partition(ds, {PartitionSpec::Mode::Dirichlet, 0.001, 10, 5}), ConfigError);
}

TEST_CASE("preconditions") {
    const auto ds = balanced_dataset(4, 2);
    CHECK_THROWS_AS(partition(ds, {PartitionSpec::Mode::Iid, 1.0, 5, 0}), ConfigError);
    CHECK_THROWS_AS(partition(ds, {PartitionSpec::Mode::Dirichlet, 0.0, 2, 0}), ConfigError);
    CHECK_THROWS_AS(partition(ds, {PartitionSpec::Mode::Iid, 1.0, 0, 0}), ConfigError);
}
