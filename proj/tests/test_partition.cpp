#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "fedmua/fedmua.hpp"
#include "oracles.hpp"

using namespace fedmua;

TEST_CASE("iid partitioning deals equal shares round-robin") {
    const Dataset ds = make_blobs(100, 4, 2.0, 3);
    const Partition part = partition(ds, 4, PartitionScheme::iid(), 42);
    for (const auto& [client, idxs] : part.assignments) REQUIRE(idxs.size() == 25);
    part.validate(ds.size());
}

TEST_CASE("partitioning is deterministic in (dataset, K, scheme, seed)") {
    const Dataset ds = make_digits(120, 9, 16, 4);
    const Partition a = partition(ds, 5, PartitionScheme::dirichlet(0.5), 7);
    const Partition b = partition(ds, 5, PartitionScheme::dirichlet(0.5), 7);
    REQUIRE(a.assignments == b.assignments);
    const Partition c = partition(ds, 5, PartitionScheme::dirichlet(0.5), 8);
    REQUIRE(a.assignments != c.assignments);
}

TEST_CASE("dirichlet class histograms match the reference sampler") {
    const Dataset ds = make_blobs(300, 3, 2.0, 11);  // 2-class fixture
    const Partition part = partition(ds, 10, PartitionScheme::dirichlet(0.5), 123);
    const auto reference = oracle::dirichlet_oracle(ds, 10, 0.5, 123);

    for (int c = 0; c < 10; ++c) {
        std::map<int, std::size_t> got, want;
        for (auto i : part.assignments.at(c)) got[ds.examples[i].label]++;
        for (auto i : reference.at(c)) want[ds.examples[i].label]++;
        REQUIRE(got == want);
    }
}

TEST_CASE("disjointness and coverage hold across schemes and seeds") {
    const Dataset ds = make_digits(200, 21, 25, 5);
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        for (const auto scheme : {PartitionScheme::iid(), PartitionScheme::dirichlet(0.5)}) {
            const Partition part = partition(ds, 2 + static_cast<int>(seed % 7), scheme, seed);
            part.validate(ds.size());  // throws on overlap, gap, or empty client
        }
    }
}

TEST_CASE("dirichlet with a tiny beta still leaves no client empty") {
    const Dataset ds = make_blobs(60, 3, 2.0, 5);
    const Partition part = partition(ds, 12, PartitionScheme::dirichlet(0.05), 2);
    for (const auto& [_, idxs] : part.assignments) REQUIRE(!idxs.empty());
    part.validate(ds.size());
}

TEST_CASE("impossible partitions are rejected") {
    const Dataset ds = make_blobs(10, 3, 2.0, 5);
    REQUIRE_THROWS_AS(partition(ds, 1, PartitionScheme::iid(), 0), partition_error);
    REQUIRE_THROWS_AS(partition(ds, 11, PartitionScheme::iid(), 0), partition_error);
    // iid needs at least K examples of each class: 5 examples of each label here
    REQUIRE_THROWS_AS(partition(ds, 6, PartitionScheme::iid(), 0), partition_error);
}

TEST_CASE("partition JSON round-trips") {
    const Dataset ds = make_blobs(50, 3, 2.0, 5);
    const Partition part = partition(ds, 4, PartitionScheme::dirichlet(0.5), 33);
    const auto j = partition_to_json(part);
    const Partition back = partition_from_json(j);
    REQUIRE(back.assignments == part.assignments);
    REQUIRE(back.scheme.kind == PartitionScheme::Kind::dirichlet);
    REQUIRE_THAT(back.scheme.beta, Catch::Matchers::WithinAbs(0.5, 1e-9));
}
