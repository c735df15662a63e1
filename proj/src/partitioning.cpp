#include "fedcanon/partitioning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedcanon/errors.hpp"
#include "fedcanon/rng.hpp"

namespace fedcanon {

namespace {

// Integer counts from proportions by largest remainder; ties break toward the
// lower client id so the split is deterministic.
std::vector<int> largest_remainder(const std::vector<double>& p, int total) {
    const int n = static_cast<int>(p.size());
    std::vector<int> counts(n);
    std::vector<std::pair<double, int>> frac(n);
    int assigned = 0;
    for (int i = 0; i < n; ++i) {
        const double exact = p[i] * total;
        counts[i] = static_cast<int>(std::floor(exact));
        assigned += counts[i];
        frac[i] = {exact - counts[i], i};
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int r = 0; r < total - assigned; ++r) ++counts[frac[r].second];
    return counts;
}

}  // namespace

void PartitionSpec::validate() const {
    if (n_clients < 1) throw ConfigError("partition needs n_clients >= 1");
    if (mode == Mode::Dirichlet && !(eta > 0.0)) throw ConfigError("dirichlet eta must be > 0");
}

std::vector<Shard> partition(const Dataset& ds, const PartitionSpec& spec) {
    spec.validate();
    const int n = spec.n_clients;
    if (ds.size() < n) throw ConfigError("fewer samples than clients");

    std::vector<Shard> shards(n);
    for (int i = 0; i < n; ++i) shards[i].owner = i;

    Rng rng(derive_seed(spec.seed, StreamKind::Partition));

    if (spec.mode == PartitionSpec::Mode::Iid) {
        std::vector<int> order(ds.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng.engine());
        const int base = ds.size() / n, extra = ds.size() % n;
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            const int take = base + (i < extra ? 1 : 0);
            shards[i].indices.assign(order.begin() + pos, order.begin() + pos + take);
            pos += take;
        }
        return shards;
    }

    // Dirichlet label skew: per class, draw client proportions and deal that
    // class's (shuffled) samples out by largest remainder.
    std::vector<std::vector<int>> by_class(ds.num_classes);
    for (int j = 0; j < ds.size(); ++j) by_class[ds.labels[j]].push_back(j);
    for (auto& cls : by_class) std::shuffle(cls.begin(), cls.end(), rng.engine());

    for (int attempt = 0; attempt < 100; ++attempt) {
        for (auto& s : shards) s.indices.clear();
        for (const auto& cls : by_class) {
            if (cls.empty()) continue;
            const auto p = rng.dirichlet(spec.eta, n);
            const auto counts = largest_remainder(p, static_cast<int>(cls.size()));
            int pos = 0;
            for (int i = 0; i < n; ++i) {
                shards[i].indices.insert(shards[i].indices.end(), cls.begin() + pos,
                                         cls.begin() + pos + counts[i]);
                pos += counts[i];
            }
        }
        const bool ok = std::all_of(shards.begin(), shards.end(),
                                    [](const Shard& s) { return !s.indices.empty(); });
        if (ok) {
            for (auto& s : shards) std::sort(s.indices.begin(), s.indices.end());
            return shards;
        }
    }
    throw ConfigError("could not give every client a sample after 100 Dirichlet redraws");
}

HeterogeneityReport heterogeneity_report(const std::vector<Shard>& shards, const Dataset& ds) {
    HeterogeneityReport rep;
    const int c = ds.num_classes;
    std::vector<double> global(c, 0.0);
    for (int lbl : ds.labels) global[lbl] += 1.0;
    for (auto& g : global) g /= static_cast<double>(ds.size());

    for (const auto& s : shards) {
        std::vector<int> hist(c, 0);
        for (int j : s.indices) ++hist[ds.labels[j]];
        double tv = 0.0;
        for (int k = 0; k < c; ++k) {
            const double p = s.indices.empty()
                                 ? 0.0
                                 : static_cast<double>(hist[k]) / static_cast<double>(s.size());
            tv += std::fabs(p - global[k]);
        }
        rep.tv.push_back(tv / 2.0);
        rep.label_hist.push_back(std::move(hist));
    }
    rep.mean_tv = std::accumulate(rep.tv.begin(), rep.tv.end(), 0.0) /
                  std::max<std::size_t>(rep.tv.size(), 1);
    return rep;
}

std::uint64_t shard_hash(const std::vector<Shard>& shards) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    auto mix = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& s : shards) {
        mix(static_cast<std::uint64_t>(s.indices.size()));
        for (int j : s.indices) mix(static_cast<std::uint64_t>(j));
    }
    return h;
}

}  // namespace fedcanon
