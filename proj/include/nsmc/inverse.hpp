#pragma once

#include <string>
#include <vector>

#include "nsmc/graph.hpp"

namespace nsmc {

// A block of the inverse conditional factorization: targets sampled jointly
// (autoregressively, in the stored order) given the conditioners.
struct InverseFactor {
    std::vector<int> targets;       // latent node indices
    std::vector<int> conditioners;  // node indices (observed or earlier targets)
    std::string share_group;        // "" if not weight-shared
    bool summarize_conditioners = false;  // fixed-size summary instead of raw values
};

struct InverseModel {
    // Factors in inverse ancestral (sampling) order.
    std::vector<InverseFactor> factors;
    // The latent ordering x_1..x_N the inversion was built from.
    std::vector<int> source_order;
    // Inverse parent sets of observed nodes (diagnostics only, never modeled),
    // parallel to the observed node list in declaration order.
    std::vector<std::vector<int>> observed_parents;
    std::vector<int> observed_nodes;
};

// Reversed-graph construction: processing latents in reversed order, the
// inverse parents of x_i are mb(x_i) ∩ ({x_{i+1},...,x_N} ∪ observations).
// Factors start out singleton. Throws InvalidOrder if latent_order is not a
// topologically consistent ordering of all latents.
InverseModel build_inverse(const GraphModel& m, const std::vector<int>& latent_order);

// Merges consecutive factors into a joint block when each later target lists
// all earlier block members among its conditioners and the residual
// conditioner sets are identical. Idempotent.
InverseModel group_joint_blocks(InverseModel inv);

// Tags factors whose targets/conditioners are plate instances with identical
// local structure with a common share_group; structurally unique factors get
// none. Detection is by signature equality (names, families, plate offsets).
InverseModel assign_share_groups(InverseModel inv, const GraphModel& m);

// The full inverse digraph (latent inverse parents plus observed inverse
// parents), indexed like the model.
Digraph inverse_graph(const GraphModel& m, const InverseModel& inv);

struct PropositionReport {
    bool ok = true;
    long triples_checked = 0;
    // First violating triple, if any.
    std::vector<int> A, B, C;
    std::string message;
};

// Verifies that independencies licensed by the inverse factorization
// (undirected separation in the moralized inverse graph) are true
// independencies of the original model (d-separation in the original DAG).
// Enumerates all pairs with sampled conditioning sets; `trials` bounds the
// number of conditioning sets tried per pair (all subsets when feasible).
PropositionReport check_proposition_1(const GraphModel& m, const InverseModel& inv,
                                      int trials, unsigned seed = 0);

// Human-readable factor listing (CLI `inspect`).
std::string describe(const InverseModel& inv, const GraphModel& m);

}  // namespace nsmc
