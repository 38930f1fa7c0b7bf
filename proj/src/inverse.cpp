#include "nsmc/inverse.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace nsmc {

InverseModel build_inverse(const GraphModel& m, const std::vector<int>& latent_order) {
    const auto latents = m.latents();
    if (latent_order.size() != latents.size())
        throw InvalidOrder("latent_order must list every latent exactly once");
    std::vector<int> pos(m.size(), -1);
    for (std::size_t i = 0; i < latent_order.size(); ++i) {
        const int v = latent_order[i];
        if (v < 0 || v >= m.size() || m.node(v).role != Role::Latent || pos[v] >= 0)
            throw InvalidOrder("latent_order must list every latent exactly once");
        pos[v] = static_cast<int>(i);
    }
    // Topological consistency on the latent-latent edges.
    for (int v : latents)
        for (int p : m.parents(v))
            if (m.node(p).role == Role::Latent && pos[p] > pos[v])
                throw InvalidOrder("latent_order violates edge " + to_string(m.node(p).id) +
                                   " -> " + to_string(m.node(v).id));

    InverseModel inv;
    inv.source_order = latent_order;
    const int n_lat = static_cast<int>(latent_order.size());
    for (int i = n_lat - 1; i >= 0; --i) {
        const int x = latent_order[i];
        const auto mb = markov_blanket(m, x);
        std::vector<int> later_lat, obs;
        for (int v : mb) {
            if (m.node(v).role == Role::Observed)
                obs.push_back(v);
            else if (pos[v] > i)
                later_lat.push_back(v);
        }
        std::sort(later_lat.begin(), later_lat.end(),
                  [&](int a, int b) { return pos[a] < pos[b]; });
        std::sort(obs.begin(), obs.end());  // declaration order
        InverseFactor f;
        f.targets = {x};
        f.conditioners = std::move(later_lat);
        f.conditioners.insert(f.conditioners.end(), obs.begin(), obs.end());
        inv.factors.push_back(std::move(f));
    }

    inv.observed_nodes = m.observed();
    std::vector<int> obs_pos(m.size(), -1);
    for (std::size_t j = 0; j < inv.observed_nodes.size(); ++j)
        obs_pos[inv.observed_nodes[j]] = static_cast<int>(j);
    for (int y : inv.observed_nodes) {
        std::vector<int> pa;
        for (int v : markov_blanket(m, y))
            if (m.node(v).role == Role::Observed && obs_pos[v] > obs_pos[y]) pa.push_back(v);
        std::sort(pa.begin(), pa.end());
        inv.observed_parents.push_back(std::move(pa));
    }
    return inv;
}

InverseModel group_joint_blocks(InverseModel inv) {
    std::vector<InverseFactor> merged;
    for (auto& f : inv.factors) {
        if (!merged.empty()) {
            InverseFactor& blk = merged.back();
            const std::set<int> block_targets(blk.targets.begin(), blk.targets.end());
            const std::set<int> fc(f.conditioners.begin(), f.conditioners.end());
            const bool covers = std::all_of(block_targets.begin(), block_targets.end(),
                                            [&](int t) { return fc.count(t) > 0; });
            if (covers) {
                std::set<int> residual;
                for (int c : f.conditioners)
                    if (!block_targets.count(c)) residual.insert(c);
                const std::set<int> blk_cond(blk.conditioners.begin(), blk.conditioners.end());
                if (residual == blk_cond) {
                    blk.targets.insert(blk.targets.end(), f.targets.begin(), f.targets.end());
                    continue;
                }
            }
        }
        merged.push_back(std::move(f));
    }
    inv.factors = std::move(merged);
    return inv;
}

namespace {

// Structural signature for weight-sharing detection: plate name, target
// templates, and conditioner templates with plate-relative offsets.
std::string factor_signature(const InverseFactor& f, const GraphModel& m) {
    std::string plate;
    int inst = -1;
    for (int t : f.targets) {
        const Node& n = m.node(t);
        if (n.plate.empty() || n.id.plate < 0) return "";
        if (plate.empty()) {
            plate = n.plate;
            inst = n.id.plate;
        } else if (n.plate != plate || n.id.plate != inst) {
            return "";
        }
    }
    if (plate.empty()) return "";
    std::ostringstream sig;
    sig << "plate=" << plate << ";targets=";
    for (int t : f.targets)
        sig << m.node(t).id.name << ":" << family_name(m.node(t).dist.family) << ",";
    std::vector<std::string> conds;
    for (int c : f.conditioners) {
        const Node& n = m.node(c);
        std::ostringstream cs;
        cs << n.id.name << ":" << family_name(n.dist.family) << ":"
           << (n.role == Role::Observed ? "obs" : "lat") << ":";
        if (n.plate == plate && n.id.plate >= 0)
            cs << "off" << (n.id.plate - inst);
        else if (n.id.plate >= 0)
            cs << n.plate << "[" << n.id.plate << "]";
        else
            cs << "global";
        conds.push_back(cs.str());
    }
    std::sort(conds.begin(), conds.end());
    sig << ";cond=";
    for (const auto& c : conds) sig << c << ",";
    return sig.str();
}

}  // namespace

InverseModel assign_share_groups(InverseModel inv, const GraphModel& m) {
    std::map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::string> sigs(inv.factors.size());
    for (std::size_t i = 0; i < inv.factors.size(); ++i) {
        sigs[i] = factor_signature(inv.factors[i], m);
        if (!sigs[i].empty()) groups[sigs[i]].push_back(i);
    }
    for (auto& f : inv.factors) f.share_group.clear();
    for (const auto& [sig, members] : groups) {
        if (members.size() < 2) continue;
        const InverseFactor& first = inv.factors[members.front()];
        std::string name = m.node(first.targets.front()).plate;
        for (int t : first.targets) name += ":" + m.node(t).id.name;
        for (std::size_t i : members) inv.factors[i].share_group = name;
    }
    return inv;
}

Digraph inverse_graph(const GraphModel& m, const InverseModel& inv) {
    std::vector<std::vector<int>> parents(m.size());
    for (const auto& f : inv.factors) {
        for (std::size_t j = 0; j < f.targets.size(); ++j) {
            auto& pa = parents[f.targets[j]];
            pa = f.conditioners;
            // within-block autoregressive edges
            for (std::size_t k = 0; k < j; ++k) pa.push_back(f.targets[k]);
        }
    }
    for (std::size_t j = 0; j < inv.observed_nodes.size(); ++j)
        parents[inv.observed_nodes[j]] = inv.observed_parents[j];
    return Digraph::from_parents(std::move(parents));
}

PropositionReport check_proposition_1(const GraphModel& m, const InverseModel& inv,
                                      int trials, unsigned seed) {
    PropositionReport rep;
    const Digraph orig = structure_of(m);
    const std::vector<std::vector<int>> inv_moral = moralize(inverse_graph(m, inv));
    const int n = m.size();

    Rng rng = derive_rng(seed, 0x9e11ULL);
    std::uniform_int_distribution<int> coin(0, 1);

    for (int a = 0; a < n && rep.ok; ++a) {
        for (int b = a + 1; b < n && rep.ok; ++b) {
            std::vector<int> rest;
            for (int v = 0; v < n; ++v)
                if (v != a && v != b) rest.push_back(v);
            const int r = static_cast<int>(rest.size());
            const bool exhaustive = r <= 20 && (1L << r) <= trials;
            const long n_sets = exhaustive ? (1L << r) : trials;
            for (long s = 0; s < n_sets && rep.ok; ++s) {
                std::vector<int> C;
                if (exhaustive) {
                    for (int k = 0; k < r; ++k)
                        if (s & (1L << k)) C.push_back(rest[k]);
                } else {
                    for (int k = 0; k < r; ++k)
                        if (coin(rng)) C.push_back(rest[k]);
                }
                ++rep.triples_checked;
                const int A[1] = {a}, B[1] = {b};
                if (moral_separated(inv_moral, A, B, C) && !d_separated(orig, A, B, C)) {
                    rep.ok = false;
                    rep.A = {a};
                    rep.B = {b};
                    rep.C = C;
                    std::ostringstream os;
                    os << "inverse claims " << to_string(m.node(a).id) << " _||_ "
                       << to_string(m.node(b).id) << " given {";
                    for (int c : C) os << to_string(m.node(c).id) << " ";
                    os << "} but the original model does not d-separate them";
                    rep.message = os.str();
                }
            }
        }
    }
    return rep;
}

std::string describe(const InverseModel& inv, const GraphModel& m) {
    std::ostringstream os;
    os << "inverse factorization (" << inv.factors.size() << " factors)\n";
    int i = 0;
    for (const auto& f : inv.factors) {
        os << "  factor " << ++i << ": targets=(";
        for (std::size_t j = 0; j < f.targets.size(); ++j)
            os << (j ? "," : "") << to_string(m.node(f.targets[j]).id);
        os << ") conditioners=(";
        for (std::size_t j = 0; j < f.conditioners.size(); ++j)
            os << (j ? "," : "") << to_string(m.node(f.conditioners[j]).id);
        os << ")";
        if (!f.share_group.empty()) os << " share_group=" << f.share_group;
        if (f.summarize_conditioners) os << " conditioners-summarized";
        os << "\n";
    }
    return os.str();
}

}  // namespace nsmc
