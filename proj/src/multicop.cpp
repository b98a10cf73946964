// SPDX-License-Identifier: Apache-2.0
#include "copaug/multicop.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include "json.hpp"
#include <numeric>
#include <set>

#include "copaug/error.hpp"
#include "copaug/kernels.hpp"
#include "copaug/special.hpp"

namespace copaug {

using Idx = std::uint32_t;

// Gaussian copula ------------------------------------------------------------

namespace {

Eigen::MatrixXd regularize(Eigen::MatrixXd R) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(R);
  require(eig.info() == Eigen::Success, ErrorCategory::fit,
          "eigen decomposition of the correlation matrix failed");
  if (eig.eigenvalues().minCoeff() >= kMinEigenvalue) return R;
  Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(kMinEigenvalue);
  R = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::VectorXd inv_sd = R.diagonal().cwiseSqrt().cwiseInverse();
  R = inv_sd.asDiagonal() * R * inv_sd.asDiagonal();
  R = 0.5 * (R + R.transpose());
  R.diagonal().setOnes();
  return R;
}

GaussianCopulaModel factorize(Eigen::MatrixXd R) {
  GaussianCopulaModel m;
  m.d = static_cast<std::size_t>(R.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  require(llt.info() == Eigen::Success, ErrorCategory::fit,
          "correlation matrix is not positive definite");
  m.L = llt.matrixL();
  m.R = std::move(R);
  return m;
}

}  // namespace

GaussianCopulaModel gaussian_from_correlation(const Eigen::MatrixXd& R) {
  require(R.rows() == R.cols() && R.rows() >= 1, ErrorCategory::domain,
          "correlation matrix must be square");
  return factorize(regularize(R));
}

GaussianCopulaModel fit_gaussian(const UMatrix& u) {
  const auto n = u.rows();
  const auto d = u.cols();
  require(n >= 10, ErrorCategory::fit, "gaussian copula fit needs at least 10 rows");
  require(d >= 1, ErrorCategory::fit, "gaussian copula fit needs at least one column");
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double x = u(r, c);
      require(x > 0.0 && x < 1.0, ErrorCategory::fit,
              "pseudo-observations must lie in (0, 1)");
      z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = norm_quantile(x);
    }
  const Eigen::RowVectorXd mean = z.colwise().mean();
  z.rowwise() -= mean;
  Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(n - 1);
  for (Eigen::Index c = 0; c < cov.rows(); ++c)
    require(cov(c, c) > 0.0, ErrorCategory::fit,
            "constant column " + std::to_string(c) + " has undefined correlation");
  const Eigen::VectorXd inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd R = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  R = 0.5 * (R + R.transpose());
  R.diagonal().setOnes();
  return gaussian_from_correlation(R);
}

UMatrix simulate_gaussian(const GaussianCopulaModel& m, std::size_t n, std::uint64_t seed) {
  return kernels::parallel::gaussian_rows(m.L, n, seed);
}

// Vine structure -------------------------------------------------------------

std::size_t VineStructure::edge_count() const {
  std::size_t c = 0;
  for (const auto& t : trees) c += t.size();
  return c;
}

std::size_t VineModel::parameter_count() const {
  std::size_t c = 0;
  for (const auto& t : copulas)
    for (const auto& p : t) c += static_cast<std::size_t>(p.n_params());
  return c;
}

std::string_view to_string(CopulaKind k) noexcept {
  return k == CopulaKind::gaussian ? "gaussian" : "vine";
}

std::optional<CopulaKind> copula_kind_from_string(std::string_view s) noexcept {
  if (s == "gaussian") return CopulaKind::gaussian;
  if (s == "vine") return CopulaKind::vine;
  return std::nullopt;
}

std::size_t effective_truncation(const CopulaSpec& spec, std::size_t d) {
  const std::size_t full = d > 0 ? d - 1 : 0;
  if (spec.truncation) return std::min(*spec.truncation, full);
  return d <= kAutoTruncationDims ? full : std::min(kDefaultTruncation, full);
}

namespace {

std::vector<Idx> constraint_set(const VineEdge& e) {
  std::vector<Idx> s = e.cond;
  s.push_back(e.a);
  s.push_back(e.b);
  std::sort(s.begin(), s.end());
  return s;
}

struct Candidate {
  Idx i, j;  // node indices, i < j
  double weight = 0.0;
};

// Proximity-admissible node pairs of tree t (1-based). Tree 1 is complete.
std::vector<Candidate> candidates(std::size_t t, std::size_t d,
                                  const std::vector<VineEdge>* prev) {
  std::vector<Candidate> out;
  if (t == 1) {
    for (Idx i = 0; i < d; ++i)
      for (Idx j = i + 1; j < d; ++j) out.push_back({i, j});
    return out;
  }
  const auto& p = *prev;
  const std::size_t prev_nodes = p.size() + 1;
  std::vector<std::vector<Idx>> incident(prev_nodes);
  for (Idx e = 0; e < p.size(); ++e) {
    incident[p[e].left].push_back(e);
    incident[p[e].right].push_back(e);
  }
  for (const auto& inc : incident)
    for (std::size_t x = 0; x < inc.size(); ++x)
      for (std::size_t y = x + 1; y < inc.size(); ++y)
        out.push_back({std::min(inc[x], inc[y]), std::max(inc[x], inc[y])});
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    return a.i < b.i || (a.i == b.i && a.j < b.j);
  });
  return out;
}

// Maximum spanning tree; ties go to the lexicographically smallest pair.
std::vector<Candidate> max_spanning_tree(std::size_t nodes, std::vector<Candidate> cands) {
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.i < b.i || (a.i == b.i && a.j < b.j);
  });
  std::vector<Idx> parent(nodes);
  std::iota(parent.begin(), parent.end(), Idx{0});
  auto find = [&](Idx x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  std::vector<Candidate> chosen;
  for (const auto& c : cands) {
    const Idx ri = find(c.i), rj = find(c.j);
    if (ri == rj) continue;
    parent[std::max(ri, rj)] = std::min(ri, rj);
    chosen.push_back(c);
    if (chosen.size() + 1 == nodes) break;
  }
  require(chosen.size() + 1 == nodes, ErrorCategory::fit,
          "vine tree is disconnected; proximity graph has no spanning tree");
  std::sort(chosen.begin(), chosen.end(), [](const Candidate& a, const Candidate& b) {
    return a.i < b.i || (a.i == b.i && a.j < b.j);
  });
  return chosen;
}

VineEdge make_edge(std::size_t t, const Candidate& c, const std::vector<VineEdge>* prev) {
  VineEdge e;
  e.left = c.i;
  e.right = c.j;
  if (t == 1) {
    e.a = c.i;
    e.b = c.j;
    return e;
  }
  const auto si = constraint_set((*prev)[c.i]);
  const auto sj = constraint_set((*prev)[c.j]);
  std::vector<Idx> inter, only_i, only_j;
  std::set_intersection(si.begin(), si.end(), sj.begin(), sj.end(), std::back_inserter(inter));
  std::set_difference(si.begin(), si.end(), sj.begin(), sj.end(), std::back_inserter(only_i));
  std::set_difference(sj.begin(), sj.end(), si.begin(), si.end(), std::back_inserter(only_j));
  require(only_i.size() == 1 && only_j.size() == 1 && inter.size() == t - 1,
          ErrorCategory::fit, "proximity condition violated in tree " + std::to_string(t));
  e.a = std::min(only_i[0], only_j[0]);
  e.b = std::max(only_i[0], only_j[0]);
  e.cond = std::move(inter);
  return e;
}

std::vector<VineEdge> build_tree(std::size_t t, std::size_t d, const std::vector<VineEdge>* prev,
                                 std::vector<Candidate> cands) {
  const std::size_t nodes = t == 1 ? d : prev->size();
  std::vector<VineEdge> edges;
  for (const auto& c : max_spanning_tree(nodes, std::move(cands)))
    edges.push_back(make_edge(t, c, prev));
  return edges;
}

// Pseudo-data of the nodes of the tree being built. For tree 1 node k is
// variable k; afterwards node k is edge k of the previous tree and carries
// F(a | b, cond) and F(b | a, cond).
bool degenerate(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double a) { return a == x[0]; });
}

struct NodeData {
  const std::vector<VineEdge>* prev = nullptr;
  std::vector<std::vector<double>> ha, hb;

  const std::vector<double>& of(Idx node, Idx var) const {
    if (!prev) return ha[node];
    return (*prev)[node].a == var ? ha[node] : hb[node];
  }
};

// Variable of node `node` that the new edge conditions on, i.e. the one not
// shared with the other node.
Idx own_variable(const NodeData& nd, Idx node, const VineEdge& e) {
  if (!nd.prev) return node;
  const auto set = constraint_set((*nd.prev)[node]);
  return std::binary_search(set.begin(), set.end(), e.a) ? e.a : e.b;
}

std::string edge_name(std::size_t t, const VineEdge& e) {
  std::string s = "tree " + std::to_string(t) + " edge (" + std::to_string(e.a) + "," +
                  std::to_string(e.b);
  if (!e.cond.empty()) {
    s += "|";
    for (std::size_t k = 0; k < e.cond.size(); ++k) {
      if (k) s += ",";
      s += std::to_string(e.cond[k]);
    }
  }
  return s + ")";
}

}  // namespace

void complete_structure(VineStructure& s) {
  const std::size_t d = s.d;
  if (d < 2) return;
  for (std::size_t t = s.trees.size() + 1; t <= d - 1; ++t) {
    const std::vector<VineEdge>* prev = t == 1 ? nullptr : &s.trees[t - 2];
    s.trees.push_back(build_tree(t, d, prev, candidates(t, d, prev)));
  }
}

VineModel fit_vine(const UMatrix& u, const CopulaSpec& spec) {
  require(!spec.catalogue.empty(), ErrorCategory::fit, "empty family catalogue");
  const std::size_t d = u.cols();
  const std::size_t n = u.rows();
  for (double x : u.data())
    require(x > 0.0 && x < 1.0, ErrorCategory::fit, "pseudo-observations must lie in (0, 1)");
  VineModel m;
  m.structure.d = d;
  const std::size_t trunc = effective_truncation(spec, d);
  m.structure.truncation = trunc;
  if (d < 2) return m;

  FitOptions opts;
  opts.catalogue = spec.catalogue;

  NodeData nodes;
  if (trunc >= 1) {
    nodes.ha.resize(d);
    for (std::size_t c = 0; c < d; ++c) nodes.ha[c] = u.column(c);
  }

  for (std::size_t t = 1; t <= trunc; ++t) {
    const std::vector<VineEdge>* prev = t == 1 ? nullptr : &m.structure.trees[t - 2];
    auto cands = candidates(t, d, prev);
    if (t == 1) {
      const auto tau = kernels::parallel::kendall_tau_matrix(u);
      for (auto& c : cands) c.weight = std::abs(tau[c.i * d + c.j]);
    } else {
      // Weight of a candidate: |tau| of the pseudo-data it would couple.
      const auto nc = static_cast<std::int64_t>(cands.size());
#pragma omp parallel for schedule(dynamic, 8)
      for (std::int64_t k = 0; k < nc; ++k) {
        auto& c = cands[static_cast<std::size_t>(k)];
        const auto e = make_edge(t, c, prev);
        const Idx vi = own_variable(nodes, c.i, e);
        const Idx vj = vi == e.a ? e.b : e.a;
        c.weight = std::abs(kendall_tau(nodes.of(c.i, vi), nodes.of(c.j, vj)));
      }
    }
    auto edges = build_tree(t, d, prev, std::move(cands));

    const std::size_t ne = edges.size();
    std::vector<PairCopula> cops(ne);
    std::vector<double> taus(ne);
    NodeData next;
    next.prev = nullptr;  // set once the tree is stored
    const bool feed = t < trunc;
    if (feed) {
      next.ha.resize(ne);
      next.hb.resize(ne);
    }
    std::vector<std::string> errors(ne);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(ne); ++k) {
      const auto idx = static_cast<std::size_t>(k);
      const auto& e = edges[idx];
      const Idx vl = own_variable(nodes, e.left, e);
      const auto& xl = nodes.of(e.left, vl);
      const auto& xr = nodes.of(e.right, vl == e.a ? e.b : e.a);
      const auto& ua = vl == e.a ? xl : xr;
      const auto& ub = vl == e.a ? xr : xl;
      try {
        if (degenerate(ua) || degenerate(ub)) {
          // Conditional values collapsed onto one point: nothing left to model.
          taus[idx] = 0.0;
          cops[idx] = PairCopula{};
        } else {
          taus[idx] = kendall_tau(ua, ub);
          cops[idx] = fit_pair(ua, ub, opts);
        }
        if (feed) {
          auto& ha = next.ha[idx];
          auto& hb = next.hb[idx];
          ha.resize(n);
          hb.resize(n);
          for (std::size_t r = 0; r < n; ++r) {
            ha[r] = h_func(cops[idx], ua[r], ub[r], 2);
            hb[r] = h_func(cops[idx], ua[r], ub[r], 1);
          }
        }
      } catch (const std::exception& ex) {
        errors[idx] = edge_name(t, e) + ": " + ex.what();
      }
    }
    for (const auto& msg : errors)
      if (!msg.empty()) fail(ErrorCategory::fit, msg);

    m.structure.trees.push_back(std::move(edges));
    m.copulas.push_back(std::move(cops));
    m.tau_hat.push_back(std::move(taus));
    next.prev = &m.structure.trees.back();
    nodes = std::move(next);
  }

  complete_structure(m.structure);
  for (std::size_t t = m.copulas.size() + 1; t <= d - 1; ++t) {
    m.copulas.emplace_back(m.structure.trees[t - 1].size());
    m.tau_hat.emplace_back(m.structure.trees[t - 1].size(), 0.0);
  }
  return m;
}

VineStructure select_structure(const UMatrix& u, std::optional<std::size_t> truncation) {
  require(u.cols() >= 2, ErrorCategory::domain, "structure selection needs d >= 2");
  CopulaSpec spec;
  spec.kind = CopulaKind::vine;
  spec.truncation = truncation;
  return fit_vine(u, spec).structure;
}

// Simulation plan --------------------------------------------------------------

namespace {

struct PlanBuilder {
  const VineModel& m;
  SimulationPlan plan;
  std::size_t max_tree = 0;  // deepest tree with a non-independence copula
  std::map<std::pair<Idx, std::vector<Idx>>, Idx> memo;
  // (a, b, cond) -> (tree, edge), 1-based tree
  std::map<std::tuple<Idx, Idx, std::vector<Idx>>, std::pair<Idx, Idx>> edge_index;
  std::map<std::pair<Idx, Idx>, Idx> copula_slot;

  explicit PlanBuilder(const VineModel& model) : m(model) {
    plan.d = m.structure.d;
    plan.output.assign(plan.d, 0);
    for (std::size_t t = 1; t <= m.copulas.size(); ++t)
      for (const auto& c : m.copulas[t - 1])
        if (c.family != Family::independence) max_tree = t;
    for (std::size_t t = 1; t <= max_tree; ++t)
      for (std::size_t e = 0; e < m.structure.trees[t - 1].size(); ++e) {
        const auto& edge = m.structure.trees[t - 1][e];
        edge_index[{edge.a, edge.b, edge.cond}] = {static_cast<Idx>(t), static_cast<Idx>(e)};
      }
  }

  const PairCopula& copula(Idx t, Idx e) const { return m.copulas[t - 1][e]; }

  Idx copula_id(Idx t, Idx e) {
    auto [it, inserted] = copula_slot.try_emplace({t, e}, static_cast<Idx>(plan.copulas.size()));
    if (inserted) {
      plan.copulas.push_back(copula(t, e));
      plan.copula_edge.emplace_back(t, e);
    }
    return it->second;
  }

  Idx new_slot() { return static_cast<Idx>(plan.slots++); }

  void remember(Idx var, const std::vector<Idx>& cond, Idx slot) {
    if (cond.size() < max_tree) memo[{var, cond}] = slot;
  }

  // Slot holding F(var | cond), emitting h-function ops as needed.
  Idx get(Idx var, const std::vector<Idx>& cond) {
    if (auto it = memo.find({var, cond}); it != memo.end()) return it->second;
    require(!cond.empty(), ErrorCategory::fit, "vine plan: variable used before sampled");
    for (std::size_t k = 0; k < cond.size(); ++k) {
      const Idx other = cond[k];
      std::vector<Idx> rest = cond;
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
      auto it = edge_index.find({std::min(var, other), std::max(var, other), rest});
      if (it == edge_index.end()) continue;
      const auto [t, e] = it->second;
      const auto& edge = m.structure.trees[t - 1][e];
      Idx slot;
      if (copula(t, e).family == Family::independence) {
        slot = get(var, rest);
      } else {
        const Idx x = get(var, rest);
        const Idx y = get(other, rest);
        slot = new_slot();
        plan.ops.push_back({SimulationPlan::OpKind::h,
                            static_cast<std::uint8_t>(var == edge.a ? 2 : 1), copula_id(t, e),
                            slot, x, y});
      }
      memo[{var, cond}] = slot;
      return slot;
    }
    fail(ErrorCategory::fit, "vine plan: no edge yields F(" + std::to_string(var) + " | ...)");
  }
};

struct Peel {
  Idx var;
  // chain[k - 1] = (edge index in tree k, partner z_k)
  std::vector<std::pair<Idx, Idx>> chain;
};

// Orders variables so each one's edges reach only later variables: the
// top tree's edge names the first variable, and its constraint sets descend
// through one edge per tree.
std::vector<Peel> peel(const VineStructure& s, Idx& last) {
  const std::size_t d = s.d;
  std::vector<std::vector<bool>> removed(s.trees.size());
  std::vector<std::map<std::vector<Idx>, Idx>> by_union(s.trees.size());
  for (std::size_t t = 0; t < s.trees.size(); ++t) {
    removed[t].assign(s.trees[t].size(), false);
    for (Idx e = 0; e < s.trees[t].size(); ++e) by_union[t][constraint_set(s.trees[t][e])] = e;
  }
  std::vector<bool> gone(d, false);
  std::vector<Peel> out;
  for (std::size_t step = 0; step + 1 < d; ++step) {
    const std::size_t top = d - 1 - step;  // 1-based tree index
    Idx top_edge = 0;
    bool found = false;
    for (Idx e = 0; e < s.trees[top - 1].size(); ++e)
      if (!removed[top - 1][e]) {
        top_edge = e;
        found = true;
        break;
      }
    require(found, ErrorCategory::fit, "vine structure is not a regular vine");
    const auto& te = s.trees[top - 1][top_edge];
    Peel p;
    p.var = te.a;
    p.chain.resize(top);
    p.chain[top - 1] = {top_edge, te.b};
    removed[top - 1][top_edge] = true;
    std::vector<Idx> cond = te.cond;
    for (std::size_t k = top - 1; k >= 1; --k) {
      std::vector<Idx> key = cond;
      key.push_back(p.var);
      std::sort(key.begin(), key.end());
      auto it = by_union[k - 1].find(key);
      require(it != by_union[k - 1].end() && !removed[k - 1][it->second], ErrorCategory::fit,
              "vine structure is not a regular vine");
      const auto& f = s.trees[k - 1][it->second];
      require(f.a == p.var || f.b == p.var, ErrorCategory::fit,
              "vine structure is not a regular vine");
      p.chain[k - 1] = {it->second, f.a == p.var ? f.b : f.a};
      removed[k - 1][it->second] = true;
      cond = f.cond;
    }
    gone[p.var] = true;
    out.push_back(std::move(p));
  }
  last = 0;
  for (Idx v = 0; v < d; ++v)
    if (!gone[v]) last = v;
  return out;
}

}  // namespace

SimulationPlan compile_plan(const VineModel& m) {
  const std::size_t d = m.structure.d;
  PlanBuilder b(m);
  if (d == 0) return b.plan;
  if (d == 1) {
    const Idx s = b.new_slot();
    b.plan.ops.push_back({SimulationPlan::OpKind::uniform, 0, 0, s, 0, 0});
    b.plan.output[0] = s;
    return b.plan;
  }
  Idx last = 0;
  const auto order = peel(m.structure, last);

  const Idx s0 = b.new_slot();
  b.plan.ops.push_back({SimulationPlan::OpKind::uniform, 0, 0, s0, 0, 0});
  b.memo[{last, {}}] = s0;
  b.plan.output[last] = s0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto& p = *it;
    const std::size_t depth = p.chain.size();
    std::vector<Idx> partners;
    for (const auto& [e, z] : p.chain) partners.push_back(z);

    Idx cur = b.new_slot();
    b.plan.ops.push_back({SimulationPlan::OpKind::uniform, 0, 0, cur, 0, 0});
    {
      std::vector<Idx> all(partners.begin(), partners.end());
      std::sort(all.begin(), all.end());
      b.remember(p.var, all, cur);
    }
    for (std::size_t k = depth; k >= 1; --k) {
      std::vector<Idx> cond(partners.begin(), partners.begin() + static_cast<std::ptrdiff_t>(k - 1));
      std::sort(cond.begin(), cond.end());
      const Idx t = static_cast<Idx>(k);
      const Idx e = p.chain[k - 1].first;
      if (b.copula(t, e).family != Family::independence) {
        const Idx v = b.get(p.chain[k - 1].second, cond);
        const auto& edge = m.structure.trees[t - 1][e];
        const Idx dst = b.new_slot();
        b.plan.ops.push_back({SimulationPlan::OpKind::hinv,
                              static_cast<std::uint8_t>(p.var == edge.a ? 2 : 1),
                              b.copula_id(t, e), dst, cur, v});
        cur = dst;
      }
      b.remember(p.var, cond, cur);
    }
    b.memo[{p.var, {}}] = cur;
    b.plan.output[p.var] = cur;
  }
  return b.plan;
}

UMatrix simulate_vine(const VineModel& m, std::size_t n, std::uint64_t seed) {
  return kernels::parallel::run_plan(compile_plan(m), n, seed);
}

// Synthesis --------------------------------------------------------------------

SynthesisModel fit_synthesis(const ProfileSet& train, const CopulaSpec& spec) {
  require(train.size() >= 2, ErrorCategory::fit, "synthesis needs a nonempty training set");
  const DataMatrix x = flatten(train, Which::inputs);
  SynthesisModel m;
  m.kind = spec.kind;
  m.grid = train.grid;
  m.labels = x.labels;
  m.marginals.reserve(x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    m.marginals.emplace_back(x.column(c));
    if (!m.marginals.back().constant()) m.active.push_back(c);
  }
  const UMatrix u_all = pseudo_observations(x);
  UMatrix u(x.rows(), m.active.size());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t k = 0; k < m.active.size(); ++k) u(r, k) = u_all(r, m.active[k]);

  if (m.active.empty()) return m;
  if (spec.kind == CopulaKind::gaussian)
    m.gaussian = fit_gaussian(u);
  else
    m.vine = fit_vine(u, spec);
  return m;
}

DataMatrix sample_synthesis(const SynthesisModel& m, std::size_t n, std::uint64_t seed) {
  UMatrix u;
  if (!m.active.empty())
    u = m.kind == CopulaKind::gaussian ? simulate_gaussian(m.gaussian, n, seed)
                                       : simulate_vine(m.vine, n, seed);
  DataMatrix x(n, m.marginals.size());
  x.labels = m.labels;
  std::vector<bool> is_active(m.marginals.size(), false);
  for (auto c : m.active) is_active[c] = true;
  for (std::size_t c = 0; c < m.marginals.size(); ++c)
    if (!is_active[c])
      for (std::size_t r = 0; r < n; ++r) x(r, c) = m.marginals[c].sorted().front();
  for (std::size_t k = 0; k < m.active.size(); ++k) {
    const auto& marg = m.marginals[m.active[k]];
    for (std::size_t r = 0; r < n; ++r) x(r, m.active[k]) = marg.quantile(u(r, k));
  }
  return x;
}

ProfileSet to_profiles(const DataMatrix& x, const LevelGrid& grid, SynthesisDiagnostics* diag) {
  ProfileSet set = unflatten(x, grid);
  std::size_t resorted = 0;
  for (auto& prof : set.profiles) {
    bool monotone = true;
    for (std::size_t i = 1; i < prof.p.size(); ++i) monotone = monotone && prof.p[i] > prof.p[i - 1];
    if (monotone) continue;
    ++resorted;
    std::sort(prof.p.begin(), prof.p.end());
    for (std::size_t i = 1; i < prof.p.size(); ++i)
      if (prof.p[i] <= prof.p[i - 1]) prof.p[i] = std::nextafter(prof.p[i - 1], HUGE_VAL);
  }
  if (diag) diag->pressure_resorted = resorted;
  validate_set(set);
  return set;
}

ProfileSet synthesize(const ProfileSet& train, const CopulaSpec& spec, std::size_t factor,
                      std::uint64_t seed, SynthesisDiagnostics* diag) {
  require(factor >= 1, ErrorCategory::domain, "augmentation factor must be >= 1");
  const auto model = fit_synthesis(train, spec);
  return to_profiles(sample_synthesis(model, factor * train.size(), seed), train.grid, diag);
}

// Artifact ---------------------------------------------------------------------

void save_synthesis(const std::filesystem::path& path, const SynthesisModel& m) {
  using nlohmann::json;
  json j;
  j["format"] = "copaug-synthesis";
  j["version"] = kArtifactVersion;
  j["kind"] = std::string(to_string(m.kind));
  j["n_full"] = m.grid.n_full;
  j["d"] = m.marginals.size();
  json labels = json::array();
  for (const auto& l : m.labels) labels.push_back(l.str());
  j["labels"] = labels;
  json margs = json::array();
  for (const auto& mg : m.marginals) margs.push_back(mg.sorted());
  j["marginals"] = margs;
  j["active"] = m.active;
  if (m.kind == CopulaKind::gaussian) {
    std::vector<double> r;
    for (Eigen::Index a = 0; a < m.gaussian.R.rows(); ++a)
      for (Eigen::Index b = 0; b < m.gaussian.R.cols(); ++b) r.push_back(m.gaussian.R(a, b));
    j["gaussian"] = {{"d", m.gaussian.d}, {"R", r}};
  } else {
    const auto& s = m.vine.structure;
    json trees = json::array();
    for (std::size_t t = 1; t <= std::min(s.truncation, s.trees.size()); ++t) {
      json tree = json::array();
      for (std::size_t e = 0; e < s.trees[t - 1].size(); ++e) {
        const auto& edge = s.trees[t - 1][e];
        const auto& c = m.vine.copulas[t - 1][e];
        tree.push_back({{"a", edge.a},
                        {"b", edge.b},
                        {"cond", edge.cond},
                        {"left", edge.left},
                        {"right", edge.right},
                        {"family", std::string(to_string(c.family))},
                        {"rotation", c.rotation},
                        {"theta", c.theta},
                        {"nu", c.nu},
                        {"loglik", c.loglik},
                        {"tau_hat", m.vine.tau_hat[t - 1][e]}});
      }
      trees.push_back(tree);
    }
    j["vine"] = {{"d", s.d}, {"truncation", s.truncation}, {"trees", trees}};
  }
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCategory::io, "cannot write " + path.string());
  out << j.dump(1) << '\n';
  require(out.good(), ErrorCategory::io, "failed writing " + path.string());
}

SynthesisModel load_synthesis(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCategory::schema, path.string() + ": " + e.what());
  }
  try {
    require(j.at("format") == "copaug-synthesis", ErrorCategory::schema,
            "not a synthesis model artifact");
    require(j.at("version").get<int>() == kArtifactVersion, ErrorCategory::schema,
            "unsupported artifact version");
    SynthesisModel m;
    auto kind = copula_kind_from_string(j.at("kind").get<std::string>());
    require(kind.has_value(), ErrorCategory::schema, "unknown copula kind");
    m.kind = *kind;
    m.grid.n_full = j.at("n_full").get<std::size_t>();
    m.labels = input_labels(m.grid);
    for (const auto& mg : j.at("marginals"))
      m.marginals.push_back(EmpiricalMarginal::from_sorted(mg.get<std::vector<double>>()));
    require(m.marginals.size() == 3 * m.grid.n_full, ErrorCategory::schema,
            "marginal count does not match the level grid");
    m.active = j.at("active").get<std::vector<std::size_t>>();
    for (auto c : m.active)
      require(c < m.marginals.size(), ErrorCategory::schema, "active column out of range");
    if (m.kind == CopulaKind::gaussian) {
      if (m.active.empty()) return m;
      const auto d = j.at("gaussian").at("d").get<std::size_t>();
      require(d == m.active.size(), ErrorCategory::schema, "copula dimension mismatch");
      const auto r = j.at("gaussian").at("R").get<std::vector<double>>();
      require(r.size() == d * d, ErrorCategory::schema, "R must be d x d");
      Eigen::MatrixXd R(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
          R(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = r[a * d + b];
      m.gaussian = factorize(R);
    } else {
      const auto& v = j.at("vine");
      auto& s = m.vine.structure;
      s.d = v.at("d").get<std::size_t>();
      require(s.d == m.active.size(), ErrorCategory::schema, "copula dimension mismatch");
      s.truncation = v.at("truncation").get<std::size_t>();
      for (const auto& tree : v.at("trees")) {
        std::vector<VineEdge> edges;
        std::vector<PairCopula> cops;
        std::vector<double> taus;
        for (const auto& e : tree) {
          VineEdge edge;
          edge.a = e.at("a").get<Idx>();
          edge.b = e.at("b").get<Idx>();
          edge.cond = e.at("cond").get<std::vector<Idx>>();
          edge.left = e.at("left").get<Idx>();
          edge.right = e.at("right").get<Idx>();
          auto fam = family_from_string(e.at("family").get<std::string>());
          require(fam.has_value(), ErrorCategory::schema, "unknown copula family");
          PairCopula c{*fam, e.at("rotation").get<int>(), e.at("theta").get<double>(),
                       e.at("nu").get<double>(), e.at("loglik").get<double>()};
          validate(c);
          edges.push_back(std::move(edge));
          cops.push_back(c);
          taus.push_back(e.at("tau_hat").get<double>());
        }
        require(edges.size() + s.trees.size() + 1 == s.d, ErrorCategory::schema,
                "vine tree has the wrong number of edges");
        s.trees.push_back(std::move(edges));
        m.vine.copulas.push_back(std::move(cops));
        m.vine.tau_hat.push_back(std::move(taus));
      }
      complete_structure(s);
      for (std::size_t t = m.vine.copulas.size() + 1; t + 1 <= s.d; ++t) {
        m.vine.copulas.emplace_back(s.trees[t - 1].size());
        m.vine.tau_hat.emplace_back(s.trees[t - 1].size(), 0.0);
      }
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCategory::schema, path.string() + ": " + e.what());
  }
}

}  // namespace copaug
