#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace fedcanon {

struct Feature {
    int index;  // 0-based
    double value;
    bool operator==(const Feature&) const = default;
};

using SparseRow = std::vector<Feature>;

struct Dataset {
    std::vector<SparseRow> rows;
    std::vector<int> labels;  // in [0, num_classes)
    int dim = 0;
    int num_classes = 2;

    int size() const { return static_cast<int>(rows.size()); }
    bool operator==(const Dataset&) const = default;
};

// Indices into a parent Dataset owned by one client.
struct Shard {
    int owner = 0;
    std::vector<int> indices;

    int size() const { return static_cast<int>(indices.size()); }
};

// LIBSVM text: one sample per line, "<label> <idx>:<val> ...", 1-based strictly
// increasing indices. Labels {-1,+1} are remapped to {0,1}. dim defaults to the
// maximum index seen unless overridden (so train/test files can share one).
Dataset parse_libsvm(std::istream& in, std::optional<int> dim_override = std::nullopt);
Dataset parse_libsvm(const std::string& text, std::optional<int> dim_override = std::nullopt);
Dataset parse_libsvm_file(const std::string& path, std::optional<int> dim_override = std::nullopt);

std::string serialize_libsvm(const Dataset& ds);

}  // namespace fedcanon
