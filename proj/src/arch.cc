// Copyright 2026 The relnas Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "relnas/arch.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace relnas {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

std::string vertex_name(int v) {
  if (v == kIn0) return "in0";
  if (v == kIn1) return "in1";
  return std::to_string(v);
}

const Tensor& state_at(const std::map<int, Tensor>& m, int v, const char* what) {
  auto it = m.find(v);
  if (it == m.end())
    throw Error(std::string("dag_forward: missing source ") + what + " vertex " + vertex_name(v));
  return it->second;
}

Tensor candidate_forward(const ArchDag& arch, Space s, int op, const FilmParams* p,
                         const Tensor& v, const Tensor& e, const Graph& g) {
  if (s == Space::kNode)
    return node_op_forward(static_cast<NodeOp>(op), v, e, g, p, arch.zoo);
  return rel_op_forward(static_cast<RelOp>(op), v, e, g, p, arch.zoo);
}

const FilmParams* params_of(const Link& l, int op) {
  return l.params[op] ? &*l.params[op] : nullptr;
}

}  // namespace

std::string_view space_name(Space s) {
  return s == Space::kNode ? "node" : "relation";
}

std::string op_name(Space s, int op) {
  if (op < 0 || op >= kNumOps) throw Error("unknown operation index " + std::to_string(op));
  return std::string(s == Space::kNode ? node_op_name(static_cast<NodeOp>(op))
                                       : rel_op_name(static_cast<RelOp>(op)));
}

int parse_op(Space s, const std::string& name) {
  for (int k = 0; k < kNumOps; ++k)
    if (op_name(s, k) == name) return k;
  throw Error("unknown " + std::string(space_name(s)) + " operation '" + name + "'");
}

int ArchDag::position(int vertex) const {
  if (vertex == kIn0) return 0;
  if (vertex == kIn1) return 1;
  auto it = std::find(order.begin(), order.end(), vertex);
  return it == order.end() ? -1 : 2 + static_cast<int>(it - order.begin());
}

bool ArchDag::has_mixtures() const {
  auto mixed = [](const Link& l) { return l.is_mixture(); };
  return std::any_of(node_links.begin(), node_links.end(), mixed) ||
         std::any_of(rel_links.begin(), rel_links.end(), mixed);
}

std::string link_id(Space s, const Link& l) {
  return std::string(space_name(s)) + ":" + vertex_name(l.src) + "->" + vertex_name(l.dst);
}

void init_params(ArchDag& arch, Rng& rng) {
  for (Space s : {Space::kNode, Space::kRelation}) {
    // Node ops are conditioned on E and emit d_v; relation ops the reverse.
    const auto d_in = static_cast<std::size_t>(s == Space::kNode ? arch.d_e : arch.d_v);
    const auto d_out = static_cast<std::size_t>(s == Space::kNode ? arch.d_v : arch.d_e);
    for (Link& l : arch.links(s)) {
      l.params = {};
      if (l.is_mixture()) {
        l.alpha = Tensor::zeros({static_cast<std::size_t>(kNumOps)}, true);
        for (int k = 0; k < kNumOps; ++k)
          if (op_has_params(k)) l.params[k] = FilmParams::init(d_in, d_out, d_out, rng);
      } else {
        l.alpha = {};
        if (op_has_params(l.op)) l.params[l.op] = FilmParams::init(d_in, d_out, d_out, rng);
      }
    }
  }
}

void ensure_params(ArchDag& arch, Rng& rng) {
  for (Space s : {Space::kNode, Space::kRelation}) {
    const auto d_in = static_cast<std::size_t>(s == Space::kNode ? arch.d_e : arch.d_v);
    const auto d_out = static_cast<std::size_t>(s == Space::kNode ? arch.d_v : arch.d_e);
    for (Link& l : arch.links(s)) {
      if (l.is_mixture() && !l.alpha.defined())
        l.alpha = Tensor::zeros({static_cast<std::size_t>(kNumOps)}, true);
      for (int k = 0; k < kNumOps; ++k)
        if (op_has_params(k) && (l.is_mixture() || k == l.op) && !l.params[k])
          l.params[k] = FilmParams::init(d_in, d_out, d_out, rng);
    }
  }
}

std::vector<Tensor> weight_tensors(const ArchDag& arch) {
  std::vector<Tensor> out;
  for (Space s : {Space::kNode, Space::kRelation})
    for (const Link& l : arch.links(s))
      for (const auto& p : l.params)
        if (p)
          for (const Tensor& t : p->tensors()) out.push_back(t);
  return out;
}

std::vector<Tensor> alpha_tensors(const ArchDag& arch) {
  std::vector<Tensor> out;
  for (Space s : {Space::kNode, Space::kRelation})
    for (const Link& l : arch.links(s))
      if (l.is_mixture()) out.push_back(l.alpha);
  return out;
}

Tensor link_forward(const ArchDag& arch, Space s, const Link& l, const Tensor& v,
                    const Tensor& e, const Graph& g) {
  if (!l.is_mixture()) return candidate_forward(arch, s, l.op, params_of(l, l.op), v, e, g);
  if (!l.alpha.defined() || l.alpha.numel() != static_cast<std::size_t>(kNumOps))
    throw Error("mixture_forward: " + link_id(s, l) + " needs " + std::to_string(kNumOps) +
                " alphas");
  Tensor w = softmax_rows(l.alpha);
  Tensor out;
  for (int k = 0; k < kNumOps; ++k) {
    if (k == kZeroOp) continue;  // contributes exactly zero
    Tensor term = mul(candidate_forward(arch, s, k, params_of(l, k), v, e, g),
                      select(w, static_cast<std::size_t>(k)));
    out = out.defined() ? add(out, term) : term;
  }
  return out;
}

Tensor mixture_forward(const ArchDag& arch, Space s, const Link& l, const ForwardState& st,
                       const Graph& g) {
  if (!l.is_mixture()) throw Error("mixture_forward: " + link_id(s, l) + " is a fixed link");
  const Tensor& v = state_at(st.v, l.src, "node");
  const Tensor& e = state_at(st.e, l.src, "edge");
  return link_forward(arch, s, l, v, e, g);
}

ForwardState dag_forward(const ArchDag& arch, const Graph& g, const Tensor& v_in0,
                         const Tensor& e_in0, const Tensor& v_in1, const Tensor& e_in1) {
  validate(arch);
  auto check = [&](const Tensor& v, const Tensor& e) {
    if (!v.defined() || v.dim() != 2 || v.rows() != static_cast<std::size_t>(g.n) ||
        v.cols() != static_cast<std::size_t>(arch.d_v))
      throw Error("dag_forward: node input " + (v.defined() ? shape_str(v.shape()) : "<none>") +
                  " does not match [" + std::to_string(g.n) + ", " + std::to_string(arch.d_v) +
                  "]");
    if (g.m > 0 && (!e.defined() || e.dim() != 2 || e.rows() != static_cast<std::size_t>(g.m) ||
                    e.cols() != static_cast<std::size_t>(arch.d_e)))
      throw Error("dag_forward: edge input " + (e.defined() ? shape_str(e.shape()) : "<none>") +
                  " does not match [" + std::to_string(g.m) + ", " + std::to_string(arch.d_e) +
                  "]");
  };
  check(v_in0, e_in0);
  check(v_in1, e_in1);
  ForwardState st;
  st.v[kIn0] = v_in0;
  st.v[kIn1] = v_in1;
  st.e[kIn0] = g.m > 0 ? e_in0 : Tensor();
  st.e[kIn1] = g.m > 0 ? e_in1 : Tensor();
  auto gather = [&](Space s, int dst) {
    Tensor sum;
    for (const Link& l : arch.links(s)) {
      if (l.dst != dst) continue;
      const Tensor& v = state_at(st.v, l.src, "node");
      const Tensor& e = state_at(st.e, l.src, "edge");
      Tensor t = link_forward(arch, s, l, v, e, g);
      sum = sum.defined() ? add(sum, t) : t;
    }
    return sum;
  };
  for (int vertex : arch.order) {
    Tensor v = gather(Space::kNode, vertex);
    Tensor e;
    if (g.m > 0) e = arch.relation_space ? gather(Space::kRelation, vertex) : e_in0;
    st.v[vertex] = v;
    st.e[vertex] = e;
  }
  return st;
}

ForwardState dag_forward(const ArchDag& arch, const Graph& g, const Tensor& v_in,
                         const Tensor& e_in) {
  return dag_forward(arch, g, v_in, e_in, v_in, e_in);
}

ForwardState dag_forward(const ArchDag& arch, const Graph& g) {
  return dag_forward(arch, g, g.v_in, g.e_in);
}

std::vector<std::string> violations(const ArchDag& arch) {
  std::vector<std::string> out;
  if (arch.d_v <= 0 || arch.d_e <= 0) out.push_back("widths: d_v and d_e must be positive");
  std::set<int> seen;
  for (int v : arch.order) {
    if (v <= 0) out.push_back("vertex ids: intermediate id " + std::to_string(v) + " must be positive");
    if (!seen.insert(v).second) out.push_back("vertex ids: duplicate id " + std::to_string(v));
  }
  if (!arch.relation_space && !arch.rel_links.empty())
    out.push_back("relation space: links present although the relation space is disabled");
  for (Space s : {Space::kNode, Space::kRelation}) {
    if (s == Space::kRelation && !arch.relation_space) continue;
    std::set<std::pair<int, int>> pairs;
    std::map<int, std::pair<int, int>> in;  // dst -> (fixed, mixture)
    for (const Link& l : arch.links(s)) {
      const std::string id = link_id(s, l);
      const int ps = arch.position(l.src);
      const int pd = arch.position(l.dst);
      if (ps < 0 || pd < 0) {
        out.push_back("unknown vertex: " + id);
        continue;
      }
      if (pd < 2) out.push_back("acyclicity: " + id + " targets an input vertex");
      else if (ps >= pd) out.push_back("acyclicity: " + id + " does not follow the vertex order");
      if (!pairs.insert({l.src, l.dst}).second) out.push_back("duplicate link: " + id);
      if (l.is_mixture()) {
        if (l.op != -1) out.push_back("operation index: " + id);
        if (l.alpha.defined() && l.alpha.numel() != static_cast<std::size_t>(kNumOps))
          out.push_back("alpha length: " + id);
        ++in[l.dst].second;
      } else {
        if (l.op >= kNumOps) out.push_back("operation index: " + id);
        ++in[l.dst].first;
      }
    }
    for (int v : arch.order) {
      const auto [f, x] = in[v];
      const std::string where = std::string(space_name(s)) + " vertex " + std::to_string(v);
      if (x == 0) {
        if (f != 2)
          out.push_back("two-input rule: " + where + " has " + std::to_string(f) +
                        " incoming fixed links");
      } else if (f >= 2) {
        out.push_back("two-input rule: " + where + " mixes mixtures with " + std::to_string(f) +
                      " fixed links");
      } else if (f + x < 2 || (!arch.one_shot && f + x > 3)) {
        out.push_back("three-mixture rule: " + where + " has " + std::to_string(x) +
                      " mixtures and " + std::to_string(f) + " fixed links");
      }
    }
  }
  return out;
}

void validate(const ArchDag& arch) {
  auto v = violations(arch);
  if (v.empty()) return;
  std::string msg = "invalid architecture:";
  for (const auto& s : v) msg += "\n  " + s;
  throw Error(msg);
}

std::string arch_to_json(const ArchDag& arch) {
  json j;
  j["version"] = kSchemaVersion;
  j["n_vertices"] = arch.order.size();
  j["order"] = arch.order;
  j["cell_mode"] = arch.cell_mode;
  j["relation_space"] = arch.relation_space;
  j["one_shot"] = arch.one_shot;
  j["d_v"] = arch.d_v;
  j["d_e"] = arch.d_e;
  j["eps"] = arch.zoo.eps;
  j["gauss_sigma"] = arch.zoo.gauss_sigma;
  for (Space s : {Space::kNode, Space::kRelation}) {
    json links = json::array();
    for (const Link& l : arch.links(s)) {
      json lj;
      lj["src"] = l.src;
      lj["dst"] = l.dst;
      if (l.is_mixture()) {
        std::vector<double> a(kNumOps, 0.0);
        if (l.alpha.defined()) a.assign(l.alpha.data().begin(), l.alpha.data().end());
        lj["alpha"] = a;
      } else {
        lj["kind"] = op_name(s, l.op);
      }
      links.push_back(std::move(lj));
    }
    j[s == Space::kNode ? "node_links" : "rel_links"] = std::move(links);
  }
  return j.dump(2);
}

namespace {

[[noreturn]] void arch_schema(const std::string& what) {
  throw Error("architecture schema: " + what);
}

const json& need(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) arch_schema(std::string("missing field '") + key + "'");
  return *it;
}

int need_int(const json& j, const char* key) {
  const json& v = need(j, key);
  if (!v.is_number_integer()) arch_schema(std::string("'") + key + "' must be an integer");
  return v.get<int>();
}

}  // namespace

ArchDag arch_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("architecture: malformed JSON at byte " + std::to_string(e.byte));
  }
  if (!j.is_object()) arch_schema("expected an object");
  const int version = need_int(j, "version");
  if (version != kSchemaVersion)
    arch_schema("version " + std::to_string(version) + " is not supported (expected " +
                std::to_string(kSchemaVersion) + ")");
  ArchDag a;
  const int n = need_int(j, "n_vertices");
  if (j.contains("order")) {
    const json& o = j["order"];
    if (!o.is_array()) arch_schema("'order' must be an array");
    for (const auto& x : o) {
      if (!x.is_number_integer()) arch_schema("'order' must hold integers");
      a.order.push_back(x.get<int>());
    }
  } else {
    for (int i = 1; i <= n; ++i) a.order.push_back(i);
  }
  if (static_cast<int>(a.order.size()) != n) arch_schema("'order' length differs from n_vertices");
  a.cell_mode = need(j, "cell_mode").get<bool>();
  a.relation_space = j.value("relation_space", true);
  a.one_shot = j.value("one_shot", false);
  a.d_v = need_int(j, "d_v");
  a.d_e = need_int(j, "d_e");
  a.zoo.eps = j.value("eps", a.zoo.eps);
  a.zoo.gauss_sigma = j.value("gauss_sigma", a.zoo.gauss_sigma);
  for (Space s : {Space::kNode, Space::kRelation}) {
    const char* key = s == Space::kNode ? "node_links" : "rel_links";
    const json& links = need(j, key);
    if (!links.is_array()) arch_schema(std::string("'") + key + "' must be an array");
    for (std::size_t i = 0; i < links.size(); ++i) {
      const json& lj = links[i];
      const std::string where = std::string(key) + "[" + std::to_string(i) + "]";
      if (!lj.is_object()) arch_schema(where + " must be an object");
      Link l;
      l.src = need_int(lj, "src");
      l.dst = need_int(lj, "dst");
      const bool has_kind = lj.contains("kind");
      const bool has_alpha = lj.contains("alpha");
      if (has_kind == has_alpha) arch_schema(where + " needs exactly one of 'kind' and 'alpha'");
      if (has_kind) {
        if (!lj["kind"].is_string()) arch_schema(where + ".kind must be a string");
        try {
          l.op = parse_op(s, lj["kind"].get<std::string>());
        } catch (const Error& e) {
          arch_schema(where + ": " + e.what());
        }
      } else {
        const json& aj = lj["alpha"];
        if (!aj.is_array() || aj.size() != static_cast<std::size_t>(kNumOps))
          arch_schema(where + ".alpha must have " + std::to_string(kNumOps) + " entries");
        std::vector<double> av;
        for (const auto& x : aj) {
          if (!x.is_number()) arch_schema(where + ".alpha must hold numbers");
          av.push_back(x.get<double>());
        }
        l.alpha = Tensor({static_cast<std::size_t>(kNumOps)}, std::move(av), true);
      }
      a.links(s).push_back(std::move(l));
    }
  }
  validate(a);
  return a;
}

void save_arch(const std::filesystem::path& path, const ArchDag& arch) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("architecture: cannot write " + path.string());
  out << arch_to_json(arch) << '\n';
}

ArchDag load_arch(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("architecture: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return arch_from_json(ss.str());
}

std::string export_dot(const ArchDag& arch) {
  std::ostringstream os;
  os << "digraph arch {\n  rankdir=LR;\n";
  for (Space s : {Space::kNode, Space::kRelation}) {
    const std::string prefix = s == Space::kNode ? "V" : "E";
    const std::string cluster = s == Space::kNode ? "node_space" : "relation_space";
    os << "  subgraph cluster_" << cluster << " {\n    label=\"" << cluster << "\";\n";
    auto node = [&](int v) { return "\"" + prefix + "_" + vertex_name(v) + "\""; };
    os << "    " << node(kIn0) << ";\n    " << node(kIn1) << ";\n";
    for (int v : arch.order) os << "    " << node(v) << ";\n";
    for (const Link& l : arch.links(s)) {
      std::string label = "mixture";
      if (!l.is_mixture()) label = op_name(s, l.op);
      os << "    " << node(l.src) << " -> " << node(l.dst) << " [label=\"" << label << "\""
         << (l.is_mixture() ? ", style=dashed" : "") << "];\n";
    }
    os << "  }\n";
  }
  os << "}\n";
  return os.str();
}

BigInt count_candidates(CountMode mode, int n_vertices, int num_ops, int cells,
                        int verts_per_cell, bool dual) {
  if (num_ops < 1) throw Error("count_candidates: num_ops must be positive");
  BigInt total = 1;
  const BigInt ops = num_ops;
  if (mode == CountMode::kCell) {
    if (cells < 1 || verts_per_cell < 1)
      throw Error("count_candidates: cells and verts_per_cell must be positive");
    // Vertex i picks 2 of its i + 1 predecessors (two inputs plus i - 1
    // earlier vertices) and an op for each chosen link.
    for (int i = 1; i <= verts_per_cell; ++i) total *= BigInt(i + 1) * i / 2 * ops * ops;
  } else {
    if (n_vertices < 1) throw Error("count_candidates: n_vertices must be positive");
    for (int i = 0; i < n_vertices; ++i) total *= 3 * ops * ops;
  }
  return dual ? total * total : total;
}

}  // namespace relnas
