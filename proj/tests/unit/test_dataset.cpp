#include <doctest.h>

#include "fedcanon/dataset.hpp"
#include "fedcanon/errors.hpp"
#include "fedcanon/rng.hpp"

using namespace fedcanon;

TEST_CASE("parses a basic line with 1-based indices") {
    const auto ds = parse_libsvm(std::string("1 1:0.5 3:-2.0\n"));
    REQUIRE(ds.size() == 1);
    CHECK(ds.rows[0] == SparseRow{{0, 0.5}, {2, -2.0}});
    CHECK(ds.labels[0] == 1);
    CHECK(ds.dim == 3);
    CHECK(ds.num_classes == 2);
}

TEST_CASE("blank input is an empty dataset error") {
    CHECK_THROWS_WITH_AS(parse_libsvm(std::string("")), doctest::Contains("empty dataset"),
                         ParseError);
    CHECK_THROWS_AS(parse_libsvm(std::string("\n  \n\t\n")), ParseError);
}

TEST_CASE("the -1/+1 convention maps to 0/1") {
    const auto ds = parse_libsvm(std::string("-1 2:1.0\n"));
    REQUIRE(ds.size() == 1);
    CHECK(ds.rows[0] == SparseRow{{1, 1.0}});
    CHECK(ds.labels[0] == 0);

    const auto both = parse_libsvm(std::string("+1 1:2.0\n-1 1:3.0\n"));
    CHECK(both.labels == std::vector<int>{1, 0});
}

TEST_CASE("malformed tokens report the offending line") {
    CHECK_THROWS_WITH_AS(parse_libsvm(std::string("1 1:0.5\nx 1:1.0\n")),
                         doctest::Contains("line 2"), ParseError);
    CHECK_THROWS_WITH_AS(parse_libsvm(std::string("1 a:b\n")), doctest::Contains("line 1"),
                         ParseError);
    CHECK_THROWS_AS(parse_libsvm(std::string("1 1:\n")), ParseError);
    CHECK_THROWS_AS(parse_libsvm(std::string("1 0:1.0\n")), ParseError);  // indices are 1-based
    CHECK_THROWS_AS(parse_libsvm(std::string("1 1:inf\n")), ParseError);
}

TEST_CASE("non-increasing indices are rejected") {
    CHECK_THROWS_WITH_AS(parse_libsvm(std::string("1 2:1.0 2:3.0\n")),
                         doctest::Contains("strictly increasing"), ParseError);
    CHECK_THROWS_AS(parse_libsvm(std::string("1 3:1.0 2:1.0\n")), ParseError);
}

TEST_CASE("dim override, as used when train/test share a dimension") {
    const auto ds = parse_libsvm(std::string("1 5:1.0\n"), 123);
    CHECK(ds.dim == 123);
    CHECK_THROWS_AS(parse_libsvm(std::string("1 5:1.0\n"), 3), ParseError);
}

TEST_CASE("labels outside the +-1 convention must be nonnegative") {
    const auto ds = parse_libsvm(std::string("0 1:1.0\n2 1:1.0\n"));
    CHECK(ds.num_classes == 3);
    CHECK_THROWS_AS(parse_libsvm(std::string("-1 1:1.0\n0 1:1.0\n1 1:1.0\n")), ParseError);
}

TEST_CASE("serialize/parse round trip reproduces the dataset") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        Dataset ds;
        ds.dim = rng.uniform_int(3, 12);
        const int classes = rng.uniform_int(2, 5);
        const int rows = rng.uniform_int(1, 20);
        for (int r = 0; r < rows; ++r) {
            SparseRow row;
            for (int j = 0; j < ds.dim; ++j)
                if (rng.uniform() < 0.4) row.push_back({j, rng.normal(0.0, 2.0)});
            ds.rows.push_back(row);
            ds.labels.push_back(rng.uniform_int(0, classes - 1));
        }
        ds.labels[0] = classes - 1;  // pin num_classes
        ds.num_classes = classes;

        const auto back = parse_libsvm(serialize_libsvm(ds), ds.dim);
        CHECK(back == ds);
    }
}

TEST_CASE("rows without features are allowed") {
    const auto ds = parse_libsvm(std::string("1\n0 1:2.0\n"));
    CHECK(ds.rows[0].empty());
    CHECK(ds.size() == 2);
}
