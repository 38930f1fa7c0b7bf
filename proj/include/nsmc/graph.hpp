#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsmc/dist.hpp"
#include "nsmc/error.hpp"
#include "nsmc/rng.hpp"

namespace nsmc {

// Variable identity: base name plus optional plate instance index.
struct VarId {
    std::string name;
    int plate = -1;  // -1: not a plate member

    bool operator==(const VarId&) const = default;
    auto operator<=>(const VarId&) const = default;
};

std::string to_string(const VarId& v);

enum class Role { Latent, Observed };

// Maps an assignment of parent values to the family's parameter vector.
// Must be deterministic and total on valid parent assignments.
using ParamTransform = std::function<std::vector<double>(std::span<const double>)>;

struct DistributionSpec {
    Family family;
    ParamTransform transform;  // empty: constant parameters
    std::vector<double> fixed_params;
};

DistributionSpec constant_dist(Family f, std::vector<double> params);

struct Node {
    VarId id;
    Role role = Role::Latent;
    std::vector<VarId> parents;
    DistributionSpec dist;
    std::string plate;  // owning plate name, "" if none
};

struct Plate {
    std::string name;
    int count = 0;
};

// Values indexed by node declaration index; NaN marks "unassigned".
using Assignment = std::vector<double>;

class GraphModel {
  public:
    int add_node(Node n);  // throws on duplicate id or unresolved parent
    void add_plate(std::string name, int count);

    int size() const { return static_cast<int>(nodes_.size()); }
    const Node& node(int i) const { return nodes_[i]; }
    int index_of(const VarId& id) const;      // throws UnknownVariable
    std::optional<int> find(const VarId& id) const;
    const std::vector<int>& parents(int i) const { return parent_idx_[i]; }
    const std::vector<int>& children(int i) const { return child_idx_[i]; }
    const std::vector<Plate>& plates() const { return plates_; }

    std::vector<int> latents() const;
    std::vector<int> observed() const;

    // Evaluates node i's parameters at an assignment (parents must be set).
    std::vector<double> node_params(int i, const Assignment& a) const;

    Assignment blank() const;

  private:
    std::vector<Node> nodes_;
    std::vector<std::vector<int>> parent_idx_;
    std::vector<std::vector<int>> child_idx_;
    std::map<VarId, int> index_;
    std::vector<Plate> plates_;
};

// Deterministic topological order (ties broken by declaration order).
// Throws CycleDetected.
std::vector<int> topological_sort(const GraphModel& m);

// parents ∪ children ∪ parents-of-children, minus v.
std::vector<int> markov_blanket(const GraphModel& m, int v);
std::vector<int> markov_blanket(const GraphModel& m, const VarId& v);

// Full joint draw, observed nodes included.
Assignment ancestral_sample(const GraphModel& m, Rng& rng);

// Sum of per-node log densities; -inf for zero-density assignments.
// Throws MissingVariable if any node is unassigned.
double log_joint(const GraphModel& m, const Assignment& a);

// Bare DAG structure for d-separation on derived graphs (e.g. inverses).
struct Digraph {
    std::vector<std::vector<int>> parents;
    std::vector<std::vector<int>> children;

    static Digraph from_parents(std::vector<std::vector<int>> parents);
};

Digraph structure_of(const GraphModel& m);

// Standard Bayes-ball d-separation: true iff every path between A and B is
// blocked given C. A, B, C must be disjoint.
bool d_separated(const Digraph& g, std::span<const int> A, std::span<const int> B,
                 std::span<const int> C);
bool d_separated(const GraphModel& m, std::span<const int> A, std::span<const int> B,
                 std::span<const int> C);

// Moral graph adjacency (marry co-parents, drop directions).
std::vector<std::vector<int>> moralize(const Digraph& g);

// Undirected separation in the moral graph: are A and B disconnected after
// deleting C? The adjacency overload lets callers moralize once.
bool moral_separated(const Digraph& g, std::span<const int> A, std::span<const int> B,
                     std::span<const int> C);
bool moral_separated(const std::vector<std::vector<int>>& moral_adj, std::span<const int> A,
                     std::span<const int> B, std::span<const int> C);

}  // namespace nsmc
