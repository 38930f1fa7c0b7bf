#include "nsmc/graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

namespace nsmc {

namespace {
constexpr double NEG_INF = -std::numeric_limits<double>::infinity();
}

std::string to_string(const VarId& v) {
    if (v.plate < 0) return v.name;
    return v.name + "[" + std::to_string(v.plate) + "]";
}

DistributionSpec constant_dist(Family f, std::vector<double> params) {
    DistributionSpec d;
    d.family = f;
    d.fixed_params = std::move(params);
    return d;
}

int GraphModel::add_node(Node n) {
    if (index_.count(n.id)) throw Error("duplicate variable " + to_string(n.id));
    std::vector<int> pidx;
    pidx.reserve(n.parents.size());
    for (const auto& p : n.parents) {
        auto it = index_.find(p);
        if (it == index_.end())
            throw UnknownVariable("parent " + to_string(p) + " of " + to_string(n.id) +
                                  " not declared");
        pidx.push_back(it->second);
    }
    const int idx = static_cast<int>(nodes_.size());
    index_[n.id] = idx;
    nodes_.push_back(std::move(n));
    parent_idx_.push_back(std::move(pidx));
    child_idx_.emplace_back();
    for (int p : parent_idx_.back()) child_idx_[p].push_back(idx);
    return idx;
}

void GraphModel::add_plate(std::string name, int count) {
    plates_.push_back(Plate{std::move(name), count});
}

int GraphModel::index_of(const VarId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw UnknownVariable("unknown variable " + to_string(id));
    return it->second;
}

std::optional<int> GraphModel::find(const VarId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<int> GraphModel::latents() const {
    std::vector<int> r;
    for (int i = 0; i < size(); ++i)
        if (nodes_[i].role == Role::Latent) r.push_back(i);
    return r;
}

std::vector<int> GraphModel::observed() const {
    std::vector<int> r;
    for (int i = 0; i < size(); ++i)
        if (nodes_[i].role == Role::Observed) r.push_back(i);
    return r;
}

std::vector<double> GraphModel::node_params(int i, const Assignment& a) const {
    const Node& n = nodes_[i];
    std::vector<double> params;
    if (n.dist.transform) {
        std::vector<double> pv;
        pv.reserve(parent_idx_[i].size());
        for (int p : parent_idx_[i]) pv.push_back(a[p]);
        params = n.dist.transform(pv);
    } else {
        params = n.dist.fixed_params;
    }
    try {
        check_params(n.dist.family, params);
    } catch (const InvalidParameters& e) {
        throw InvalidParameters(to_string(n.id) + ": " + e.what());
    }
    return params;
}

Assignment GraphModel::blank() const {
    return Assignment(size(), std::numeric_limits<double>::quiet_NaN());
}

std::vector<int> topological_sort(const GraphModel& m) {
    const int n = m.size();
    std::vector<int> indeg(n, 0);
    for (int i = 0; i < n; ++i) indeg[i] = static_cast<int>(m.parents(i).size());
    std::vector<int> order;
    order.reserve(n);
    // Repeated min-index scan keeps the output deterministic by declaration
    // order; graphs here are small.
    std::vector<bool> emitted(n, false);
    for (int step = 0; step < n; ++step) {
        int pick = -1;
        for (int i = 0; i < n; ++i) {
            if (!emitted[i] && indeg[i] == 0) {
                pick = i;
                break;
            }
        }
        if (pick < 0) throw CycleDetected("graph has a directed cycle");
        emitted[pick] = true;
        order.push_back(pick);
        for (int c : m.children(pick)) --indeg[c];
    }
    return order;
}

std::vector<int> markov_blanket(const GraphModel& m, int v) {
    if (v < 0 || v >= m.size()) throw UnknownVariable("node index out of range");
    std::set<int> mb;
    for (int p : m.parents(v)) mb.insert(p);
    for (int c : m.children(v)) {
        mb.insert(c);
        for (int cp : m.parents(c)) mb.insert(cp);
    }
    mb.erase(v);
    return {mb.begin(), mb.end()};
}

std::vector<int> markov_blanket(const GraphModel& m, const VarId& v) {
    return markov_blanket(m, m.index_of(v));
}

Assignment ancestral_sample(const GraphModel& m, Rng& rng) {
    Assignment a = m.blank();
    for (int i : topological_sort(m)) {
        auto params = m.node_params(i, a);
        a[i] = sample(m.node(i).dist.family, params, rng);
    }
    return a;
}

double log_joint(const GraphModel& m, const Assignment& a) {
    if (static_cast<int>(a.size()) != m.size())
        throw MissingVariable("assignment size mismatch");
    double total = 0.0;
    for (int i = 0; i < m.size(); ++i)
        if (std::isnan(a[i]))
            throw MissingVariable("unassigned variable " + to_string(m.node(i).id));
    for (int i = 0; i < m.size(); ++i) {
        auto params = m.node_params(i, a);
        const double lp = log_pdf(m.node(i).dist.family, params, a[i]);
        if (lp == NEG_INF) return NEG_INF;
        total += lp;
    }
    return total;
}

Digraph Digraph::from_parents(std::vector<std::vector<int>> parents) {
    Digraph g;
    g.children.resize(parents.size());
    for (std::size_t i = 0; i < parents.size(); ++i)
        for (int p : parents[i]) g.children[p].push_back(static_cast<int>(i));
    g.parents = std::move(parents);
    return g;
}

Digraph structure_of(const GraphModel& m) {
    std::vector<std::vector<int>> parents(m.size());
    for (int i = 0; i < m.size(); ++i) parents[i] = m.parents(i);
    return Digraph::from_parents(std::move(parents));
}

bool d_separated(const Digraph& g, std::span<const int> A, std::span<const int> B,
                 std::span<const int> C) {
    const int n = static_cast<int>(g.parents.size());
    std::vector<bool> in_c(n, false);
    for (int c : C) in_c[c] = true;
    std::vector<bool> in_b(n, false);
    for (int b : B) in_b[b] = true;

    // Ancestors of C (including C).
    std::vector<bool> anc(n, false);
    {
        std::deque<int> q(C.begin(), C.end());
        for (int c : C) anc[c] = true;
        while (!q.empty()) {
            int v = q.front();
            q.pop_front();
            for (int p : g.parents[v])
                if (!anc[p]) {
                    anc[p] = true;
                    q.push_back(p);
                }
        }
    }

    // Reachability over (node, direction): dir 0 = trail arrived via an edge
    // pointing into the node (from a parent), dir 1 = via an edge from a child.
    std::vector<std::array<bool, 2>> seen(n, {false, false});
    std::deque<std::pair<int, int>> q;
    for (int a : A) {
        q.emplace_back(a, 1);  // as if arriving from below: may go anywhere
        seen[a][1] = true;
    }
    while (!q.empty()) {
        auto [v, dir] = q.front();
        q.pop_front();
        if (!in_c[v] && in_b[v]) return false;
        if (dir == 1) {
            // Arrived from a child (or start): if not conditioned, pass to
            // parents (up) and children (down).
            if (!in_c[v]) {
                for (int p : g.parents[v])
                    if (!seen[p][1]) {
                        seen[p][1] = true;
                        q.emplace_back(p, 1);
                    }
                for (int c : g.children[v])
                    if (!seen[c][0]) {
                        seen[c][0] = true;
                        q.emplace_back(c, 0);
                    }
            }
        } else {
            // Arrived from a parent.
            if (!in_c[v]) {
                for (int c : g.children[v])
                    if (!seen[c][0]) {
                        seen[c][0] = true;
                        q.emplace_back(c, 0);
                    }
            }
            if (anc[v]) {
                // Collider (or conditioned descendant path) opens: bounce back
                // up to parents.
                for (int p : g.parents[v])
                    if (!seen[p][1]) {
                        seen[p][1] = true;
                        q.emplace_back(p, 1);
                    }
            }
        }
    }
    return true;
}

bool d_separated(const GraphModel& m, std::span<const int> A, std::span<const int> B,
                 std::span<const int> C) {
    for (int v : A)
        if (v < 0 || v >= m.size()) throw UnknownVariable("node index out of range");
    for (int v : B)
        if (v < 0 || v >= m.size()) throw UnknownVariable("node index out of range");
    for (int v : C)
        if (v < 0 || v >= m.size()) throw UnknownVariable("node index out of range");
    return d_separated(structure_of(m), A, B, C);
}

std::vector<std::vector<int>> moralize(const Digraph& g) {
    const int n = static_cast<int>(g.parents.size());
    std::vector<std::set<int>> adj(n);
    for (int v = 0; v < n; ++v) {
        for (int p : g.parents[v]) {
            adj[v].insert(p);
            adj[p].insert(v);
        }
        // marry co-parents
        for (std::size_t i = 0; i < g.parents[v].size(); ++i)
            for (std::size_t j = i + 1; j < g.parents[v].size(); ++j) {
                adj[g.parents[v][i]].insert(g.parents[v][j]);
                adj[g.parents[v][j]].insert(g.parents[v][i]);
            }
    }
    std::vector<std::vector<int>> out(n);
    for (int v = 0; v < n; ++v) out[v].assign(adj[v].begin(), adj[v].end());
    return out;
}

bool moral_separated(const Digraph& g, std::span<const int> A, std::span<const int> B,
                     std::span<const int> C) {
    return moral_separated(moralize(g), A, B, C);
}

bool moral_separated(const std::vector<std::vector<int>>& adj, std::span<const int> A,
                     std::span<const int> B, std::span<const int> C) {
    const int n = static_cast<int>(adj.size());
    std::vector<bool> blocked(n, false);
    for (int c : C) blocked[c] = true;
    std::vector<bool> in_b(n, false);
    for (int b : B) in_b[b] = true;
    std::vector<bool> seen(n, false);
    std::deque<int> q;
    for (int a : A)
        if (!blocked[a]) {
            seen[a] = true;
            q.push_back(a);
        }
    while (!q.empty()) {
        int v = q.front();
        q.pop_front();
        if (in_b[v]) return false;
        for (int w : adj[v])
            if (!seen[w] && !blocked[w]) {
                seen[w] = true;
                q.push_back(w);
            }
    }
    return true;
}

}  // namespace nsmc
