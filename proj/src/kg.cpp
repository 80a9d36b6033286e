#include "ksmith/kg.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "ksmith/error.hpp"
#include "ksmith/rng.hpp"

namespace ksmith {

using nlohmann::json;

std::string_view to_string(Level level) noexcept {
  switch (level) {
    case Level::root: return "root";
    case Level::intermediate: return "intermediate";
    case Level::leaf: return "leaf";
  }
  return "root";
}

Level parse_level(std::string_view text) {
  if (text == "root") return Level::root;
  if (text == "intermediate") return Level::intermediate;
  if (text == "leaf") return Level::leaf;
  throw Error(Errc::SchemaViolation, "bad level '" + std::string(text) + "'");
}

int level_rank(Level level) noexcept { return static_cast<int>(level); }

std::string_view to_string(InterventionMode mode) noexcept {
  return mode == InterventionMode::edit ? "edit" : "unlearn";
}

InterventionMode parse_mode(std::string_view text) {
  if (text == "edit") return InterventionMode::edit;
  if (text == "unlearn") return InterventionMode::unlearn;
  throw Error(Errc::SchemaViolation, "bad mode '" + std::string(text) + "'");
}

std::string_view to_string(RetainPolicy policy) noexcept {
  return policy == RetainPolicy::post_updated ? "post_updated" : "original";
}

std::string fact_id(const FactTriple& fact) {
  std::string key = fact.subject;
  key += '\x1f';
  key += fact.relation;
  key += '\x1f';
  key += fact.object;
  char buf[20];
  std::snprintf(buf, sizeof buf, "f%016llx", static_cast<unsigned long long>(fnv1a64(key)));
  return buf;
}

namespace {

json triple_json(const FactTriple& f) {
  return json{{"subject", f.subject}, {"relation", f.relation}, {"object", f.object}};
}

// Union-find over node indices for the forest check.
struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

}  // namespace

json to_json(const InterventionSpec& spec) {
  json out;
  out["mode"] = to_string(spec.mode);
  out["item"] = triple_json(spec.item);
  out["updated"] = spec.updated ? triple_json(*spec.updated) : json(nullptr);
  out["scope"] = spec.scope;
  out["retain_policy"] = to_string(spec.retain_policy);
  return out;
}

KnowledgeGraph::KnowledgeGraph(std::string domain, std::vector<KGNode> nodes,
                               std::vector<FactTriple> edges)
    : domain_(std::move(domain)), nodes_(std::move(nodes)), edges_(std::move(edges)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    auto& n = nodes_[i];
    if (n.id.empty()) throw Error(Errc::SchemaViolation, "node with empty id");
    if (n.domain.empty()) n.domain = domain_;
    if (!index_.emplace(n.id, i).second)
      throw Error(Errc::SchemaViolation, "duplicate node id '" + n.id + "'");
  }

  adjacency_.assign(nodes_.size(), {});
  std::set<FactTriple> seen;
  std::set<std::pair<std::size_t, std::size_t>> links;
  DisjointSets forest(nodes_.size());
  for (const auto& e : edges_) {
    if (e.relation.empty())
      throw Error(Errc::SchemaViolation, "edge from '" + e.subject + "' has empty relation");
    auto s = index_.find(e.subject);
    if (s == index_.end())
      throw Error(Errc::DanglingReference, "edge subject '" + e.subject + "' is not a node");
    if (!seen.insert(e).second)
      throw Error(Errc::SchemaViolation, "duplicate edge " + fact_id(e));

    auto o = index_.find(e.object);
    if (o == index_.end()) continue;  // literal object

    const int from = level_rank(nodes_[s->second].level);
    const int to = level_rank(nodes_[o->second].level);
    if (to != from + 1) {
      throw Error(Errc::SchemaViolation,
                  "node edge '" + e.subject + "' -> '" + e.object +
                      "' must descend exactly one level (root -> intermediate -> leaf)");
    }
    auto key = std::minmax(s->second, o->second);
    if (!links.insert(key).second) continue;  // parallel relation between the same pair
    if (!forest.unite(s->second, o->second))
      throw Error(Errc::SchemaViolation, "node edges form a cycle at '" + e.subject + "'");
    adjacency_[s->second].push_back(e.object);
    adjacency_[o->second].push_back(e.subject);
  }
  for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
}

std::size_t KnowledgeGraph::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw Error(Errc::UnknownNode, "unknown node '" + std::string(id) + "'");
  return it->second;
}

bool KnowledgeGraph::has_node(std::string_view id) const {
  return index_.contains(std::string(id));
}

const KGNode& KnowledgeGraph::node(std::string_view id) const { return nodes_[index_of(id)]; }

bool KnowledgeGraph::contains(const FactTriple& fact) const {
  return std::find(edges_.begin(), edges_.end(), fact) != edges_.end();
}

const FactTriple* KnowledgeGraph::find_fact(std::string_view id) const {
  for (const auto& e : edges_)
    if (fact_id(e) == id) return &e;
  return nullptr;
}

std::vector<FactTriple> KnowledgeGraph::literal_facts() const {
  std::vector<FactTriple> out;
  for (const auto& e : edges_)
    if (!has_node(e.object)) out.push_back(e);
  return out;
}

const std::vector<std::string>& KnowledgeGraph::neighbours(std::string_view id) const {
  return adjacency_[index_of(id)];
}

void KnowledgeGraph::require_all_levels() const {
  for (Level l : {Level::root, Level::intermediate, Level::leaf}) {
    bool found = std::any_of(nodes_.begin(), nodes_.end(),
                             [l](const KGNode& n) { return n.level == l; });
    if (!found)
      throw Error(Errc::SchemaViolation,
                  "graph '" + domain_ + "' has no " + std::string(to_string(l)) + " node");
  }
}

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw Error(Errc::SchemaViolation, where + ": missing field '" + key + "'");
  if (!it->is_string())
    throw Error(Errc::SchemaViolation, where + ": field '" + key + "' must be a string");
  return *it;
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error(Errc::SchemaViolation, where + ": unknown key '" + key + "'");
  }
}

}  // namespace

KnowledgeGraph kg_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(Errc::SchemaViolation, "graph document must be an object");
  reject_unknown(doc, {"domain", "nodes", "edges"}, "graph");
  std::string domain = require(doc, "domain", "graph").get<std::string>();
  auto nodes_it = doc.find("nodes");
  auto edges_it = doc.find("edges");
  if (nodes_it == doc.end() || !nodes_it->is_array())
    throw Error(Errc::SchemaViolation, "graph: 'nodes' must be an array");
  if (edges_it == doc.end() || !edges_it->is_array())
    throw Error(Errc::SchemaViolation, "graph: 'edges' must be an array");

  std::vector<KGNode> nodes;
  for (std::size_t i = 0; i < nodes_it->size(); ++i) {
    const auto& n = (*nodes_it)[i];
    std::string where = "nodes[" + std::to_string(i) + "]";
    if (!n.is_object()) throw Error(Errc::SchemaViolation, where + " must be an object");
    reject_unknown(n, {"id", "label", "level"}, where);
    nodes.push_back(KGNode{require(n, "id", where).get<std::string>(),
                           require(n, "label", where).get<std::string>(),
                           parse_level(require(n, "level", where).get<std::string>()), domain});
  }
  std::vector<FactTriple> edges;
  for (std::size_t i = 0; i < edges_it->size(); ++i) {
    const auto& e = (*edges_it)[i];
    std::string where = "edges[" + std::to_string(i) + "]";
    if (!e.is_object()) throw Error(Errc::SchemaViolation, where + " must be an object");
    reject_unknown(e, {"subject", "relation", "object"}, where);
    edges.push_back(FactTriple{require(e, "subject", where).get<std::string>(),
                               require(e, "relation", where).get<std::string>(),
                               require(e, "object", where).get<std::string>()});
  }
  return KnowledgeGraph(std::move(domain), std::move(nodes), std::move(edges));
}

json kg_to_json(const KnowledgeGraph& kg) {
  json nodes = json::array();
  for (const auto& n : kg.nodes())
    nodes.push_back(json{{"id", n.id}, {"label", n.label}, {"level", to_string(n.level)}});
  json edges = json::array();
  for (const auto& e : kg.edges()) edges.push_back(triple_json(e));
  return json{{"domain", kg.domain()}, {"nodes", nodes}, {"edges", edges}};
}

KnowledgeGraph load_kg(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IOFailure, "cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::exception& ex) {
    throw Error(Errc::SchemaViolation, path.string() + ": " + ex.what());
  }
  return kg_from_json(doc);
}

std::unordered_map<std::string, std::size_t> hop_distances_from(const KnowledgeGraph& kg,
                                                                std::string_view source) {
  kg.node(source);
  std::unordered_map<std::string, std::size_t> dist{{std::string(source), 0}};
  std::deque<std::string> queue{std::string(source)};
  while (!queue.empty()) {
    std::string cur = std::move(queue.front());
    queue.pop_front();
    const std::size_t d = dist[cur];
    for (const auto& next : kg.neighbours(cur)) {
      if (dist.emplace(next, d + 1).second) queue.push_back(next);
    }
  }
  return dist;
}

std::optional<std::size_t> hop_distance(const KnowledgeGraph& kg, std::string_view a,
                                        std::string_view b) {
  kg.node(b);
  auto dist = hop_distances_from(kg, a);
  auto it = dist.find(std::string(b));
  if (it == dist.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> sibling_objects(const KnowledgeGraph& kg, const FactTriple& fact) {
  const bool literal = !kg.has_node(fact.object);
  const Level level = kg.node(fact.subject).level;
  std::set<std::string> same_level, any_level;
  for (const auto& e : kg.edges()) {
    if (e.relation != fact.relation || e.object == fact.object) continue;
    if (literal == kg.has_node(e.object)) continue;
    any_level.insert(e.object);
    if (kg.node(e.subject).level == level) same_level.insert(e.object);
  }
  const auto& chosen = same_level.empty() ? any_level : same_level;
  return {chosen.begin(), chosen.end()};
}

InterventionSpec derive_intervention(const KnowledgeGraph& kg, const FactTriple& fact,
                                     InterventionMode mode,
                                     const std::optional<std::string>& replacement,
                                     std::uint64_t seed) {
  if (!kg.contains(fact))
    throw Error(Errc::UnknownFact, "fact " + fact_id(fact) + " (" + fact.subject + ", " +
                                       fact.relation + ", " + fact.object + ") is not in the graph");

  InterventionSpec spec;
  spec.mode = mode;
  spec.item = fact;
  spec.scope = {fact.subject};

  std::optional<std::string> target;
  if (replacement) {
    if (*replacement == fact.object)
      throw Error(Errc::NoReplacementCandidate, "replacement equals the original object");
    target = replacement;
  } else {
    auto candidates = sibling_objects(kg, fact);
    if (!candidates.empty()) {
      Rng rng(derive_seed(seed, fact_id(fact)));
      target = candidates[rng.below(candidates.size())];
    }
  }

  if (target) {
    spec.updated = FactTriple{fact.subject, fact.relation, *target};
  } else if (mode == InterventionMode::edit) {
    throw Error(Errc::NoReplacementCandidate,
                "no sibling object for relation '" + fact.relation + "' and none supplied");
  }
  return spec;
}

std::set<std::string> related_probeset(const KnowledgeGraph& kg, const InterventionSpec& spec,
                                       std::size_t radius) {
  if (radius < 1) throw Error(Errc::InvalidArgument, "radius must be >= 1");
  std::set<std::string> out;
  for (const auto& [id, d] : hop_distances_from(kg, spec.item.subject)) {
    if (d >= 1 && d <= radius) out.insert(id);
  }
  return out;
}

}  // namespace ksmith
