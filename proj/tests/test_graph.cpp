#include "doctest.h"
#include "nsmc/graph.hpp"
#include "nsmc/models.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace nsmc;

namespace {

GraphModel chain3() {
    // a -> b -> c
    GraphModel m;
    Node a;
    a.id = {"a", -1};
    a.dist = constant_dist(Family::Gaussian, {0.0, 1.0});
    m.add_node(std::move(a));
    Node b;
    b.id = {"b", -1};
    b.parents = {{"a", -1}};
    b.dist.family = Family::Gaussian;
    b.dist.transform = [](std::span<const double> p) {
        return std::vector<double>{p[0], 1.0};
    };
    m.add_node(std::move(b));
    Node c;
    c.id = {"c", -1};
    c.role = Role::Observed;
    c.parents = {{"b", -1}};
    c.dist.family = Family::Gaussian;
    c.dist.transform = [](std::span<const double> p) {
        return std::vector<double>{p[0], 1.0};
    };
    m.add_node(std::move(c));
    return m;
}

}  // namespace

TEST_CASE("node declaration errors") {
    GraphModel m;
    Node a;
    a.id = {"a", -1};
    a.dist = constant_dist(Family::Gaussian, {0.0, 1.0});
    m.add_node(a);
    CHECK_THROWS(m.add_node(a));  // duplicate
    Node b;
    b.id = {"b", -1};
    b.parents = {{"nope", -1}};
    b.dist = constant_dist(Family::Gaussian, {0.0, 1.0});
    CHECK_THROWS_AS(m.add_node(b), UnknownVariable);
    CHECK_THROWS_AS(m.index_of({"nope", -1}), UnknownVariable);
}

TEST_CASE("topological sort and log joint on a chain") {
    GraphModel m = chain3();
    const auto order = topological_sort(m);
    CHECK(order == std::vector<int>{0, 1, 2});

    Assignment a{0.5, 1.0, 1.5};
    const double expect = log_pdf(Family::Gaussian, std::vector<double>{0.0, 1.0}, 0.5) +
                          log_pdf(Family::Gaussian, std::vector<double>{0.5, 1.0}, 1.0) +
                          log_pdf(Family::Gaussian, std::vector<double>{1.0, 1.0}, 1.5);
    CHECK(log_joint(m, a) == doctest::Approx(expect).epsilon(1e-12));

    Assignment missing = m.blank();
    CHECK_THROWS_AS(log_joint(m, missing), MissingVariable);
}

TEST_CASE("markov blankets of the example models") {
    // regression: mb(w0) = {w1, w2} + all z_n, t_n
    const BuiltModel reg = build_regression(RegressionConfig{3});
    const auto mb = markov_blanket(reg.model, reg.model.index_of({"w0", -1}));
    std::set<int> got(mb.begin(), mb.end());
    std::set<int> want;
    want.insert(reg.model.index_of({"w1", -1}));
    want.insert(reg.model.index_of({"w2", -1}));
    for (int n = 0; n < 3; ++n) {
        want.insert(reg.model.index_of({"z", n}));
        want.insert(reg.model.index_of({"t", n}));
    }
    CHECK(got == want);

    // pump: mb(theta_n) = {alpha, beta, t_n, y_n}
    const BuiltModel pump = build_pump(PumpConfig{4});
    const auto mbt = markov_blanket(pump.model, pump.model.index_of({"theta", 1}));
    std::set<int> gott(mbt.begin(), mbt.end());
    CHECK(gott == std::set<int>{pump.model.index_of({"alpha", -1}),
                                pump.model.index_of({"beta", -1}),
                                pump.model.index_of({"t", 1}),
                                pump.model.index_of({"y", 1})});
}

TEST_CASE("ancestral sampling respects supports") {
    const BuiltModel pump = build_pump(PumpConfig{3});
    Rng rng = derive_rng(5);
    for (int i = 0; i < 500; ++i) {
        const Assignment a = ancestral_sample(pump.model, rng);
        for (int n = 0; n < 3; ++n) {
            CHECK(a[pump.model.index_of({"theta", n})] > 0.0);
            const double y = a[pump.model.index_of({"y", n})];
            CHECK(y >= 0.0);
            CHECK(y == std::floor(y));
        }
        CHECK(std::isfinite(log_joint(pump.model, a)));
    }
}

TEST_CASE("d-separation") {
    // collider: a -> c <- b
    Digraph g = Digraph::from_parents({{}, {}, {0, 1}});
    const int A[] = {0}, B[] = {1}, C[] = {2};
    CHECK(d_separated(g, A, B, std::span<const int>{}));
    CHECK_FALSE(d_separated(g, A, B, C));

    // chain: a -> c -> b
    Digraph h = Digraph::from_parents({{}, {2}, {0}});
    CHECK_FALSE(d_separated(h, A, B, std::span<const int>{}));
    CHECK(d_separated(h, A, B, C));

    // fork: c -> a, c -> b
    Digraph f = Digraph::from_parents({{2}, {2}, {}});
    CHECK_FALSE(d_separated(f, A, B, std::span<const int>{}));
    CHECK(d_separated(f, A, B, C));

    // descendant of a collider opens the path: a -> c <- b, c -> d
    Digraph k = Digraph::from_parents({{}, {}, {0, 1}, {2}});
    const int D[] = {3};
    CHECK_FALSE(d_separated(k, A, B, D));
}

TEST_CASE("moral separation") {
    // a -> c <- b: moralization marries a and b, so they are never separated
    Digraph g = Digraph::from_parents({{}, {}, {0, 1}});
    const int A[] = {0}, B[] = {1}, C[] = {2};
    CHECK_FALSE(moral_separated(g, A, B, C));
    // chain: separating node blocks
    Digraph h = Digraph::from_parents({{}, {2}, {0}});
    CHECK(moral_separated(h, A, B, C));
}

TEST_CASE("cycle detection") {
    // Build a cyclic Digraph directly through a self-made GraphModel is not
    // possible (parents must pre-exist), so check the sort on a forged model
    // is unnecessary; instead verify declaration order prevents cycles.
    GraphModel m = chain3();
    CHECK_NOTHROW(topological_sort(m));
}
