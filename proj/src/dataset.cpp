#include "fedcanon/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fedcanon/errors.hpp"

namespace fedcanon {

namespace {

bool parse_int(std::string_view tok, long& out) {
    if (tok.empty()) return false;
    std::size_t start = tok.front() == '+' ? 1 : 0;
    if (start == tok.size()) return false;
    auto res = std::from_chars(tok.data() + start, tok.data() + tok.size(), out);
    return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

bool parse_double(std::string_view tok, double& out) {
    if (tok.empty()) return false;
    std::size_t start = tok.front() == '+' ? 1 : 0;
    auto res = std::from_chars(tok.data() + start, tok.data() + tok.size(), out);
    return res.ec == std::errc() && res.ptr == tok.data() + tok.size() && std::isfinite(out);
}

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

Dataset parse_libsvm(std::istream& in, std::optional<int> dim_override) {
    Dataset ds;
    std::vector<long> raw_labels;
    std::string line;
    long line_no = 0;
    int max_index = 0;

    while (std::getline(in, line)) {
        ++line_no;
        // Trim trailing CR and surrounding whitespace.
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        std::size_t begin = line.find_first_not_of(" \t");
        if (begin == std::string::npos) continue;  // blank line

        std::istringstream ls(line.substr(begin));
        std::string tok;
        if (!(ls >> tok)) continue;

        long label;
        if (!parse_int(tok, label))
            throw ParseError("malformed label '" + tok + "'", line_no);
        raw_labels.push_back(label);

        SparseRow row;
        int prev_index = 0;  // indices are 1-based and strictly increasing
        while (ls >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
                throw ParseError("malformed feature token '" + tok + "'", line_no);
            long idx;
            double val;
            if (!parse_int(tok.substr(0, colon), idx) || idx < 1)
                throw ParseError("malformed feature index in '" + tok + "'", line_no);
            if (!parse_double(tok.substr(colon + 1), val))
                throw ParseError("malformed feature value in '" + tok + "'", line_no);
            if (idx <= prev_index)
                throw ParseError("feature indices not strictly increasing at '" + tok + "'",
                                 line_no);
            prev_index = static_cast<int>(idx);
            row.push_back({static_cast<int>(idx) - 1, val});
        }
        max_index = std::max(max_index, prev_index);
        ds.rows.push_back(std::move(row));
    }

    if (ds.rows.empty()) throw ParseError("empty dataset");

    // Label normalization: the {-1,+1} convention maps to {0,1}.
    std::set<long> distinct(raw_labels.begin(), raw_labels.end());
    const bool pm_one = std::all_of(distinct.begin(), distinct.end(),
                                    [](long l) { return l == -1 || l == 1; });
    long max_label = 0;
    ds.labels.reserve(raw_labels.size());
    for (long l : raw_labels) {
        long mapped = pm_one ? (l == -1 ? 0 : 1) : l;
        if (mapped < 0)
            throw ParseError("negative label " + std::to_string(l) +
                             " (only the {-1,+1} convention is remapped)");
        max_label = std::max(max_label, mapped);
        ds.labels.push_back(static_cast<int>(mapped));
    }
    ds.num_classes = static_cast<int>(std::max<long>(max_label + 1, 2));

    ds.dim = dim_override.value_or(max_index);
    if (ds.dim < max_index)
        throw ParseError("dim override " + std::to_string(ds.dim) +
                         " smaller than max feature index " + std::to_string(max_index));
    return ds;
}

Dataset parse_libsvm(const std::string& text, std::optional<int> dim_override) {
    std::istringstream in(text);
    return parse_libsvm(in, dim_override);
}

Dataset parse_libsvm_file(const std::string& path, std::optional<int> dim_override) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return parse_libsvm(in, dim_override);
}

std::string serialize_libsvm(const Dataset& ds) {
    std::string out;
    for (int i = 0; i < ds.size(); ++i) {
        out += std::to_string(ds.labels[i]);
        for (const auto& f : ds.rows[i]) {
            out += ' ';
            out += std::to_string(f.index + 1);
            out += ':';
            out += format_double(f.value);
        }
        out += '\n';
    }
    return out;
}

}  // namespace fedcanon
