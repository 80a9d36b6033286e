#pragma once

// Hierarchical knowledge graphs: loading, validation, shortest paths, and
// derivation of intervention requests from selected facts.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace ksmith {

enum class Level { root, intermediate, leaf };

std::string_view to_string(Level level) noexcept;
Level parse_level(std::string_view text);  // throws SchemaViolation
int level_rank(Level level) noexcept;

struct KGNode {
  std::string id;
  std::string label;
  Level level = Level::root;
  std::string domain;

  bool operator==(const KGNode&) const = default;
};

struct FactTriple {
  std::string subject;
  std::string relation;
  std::string object;

  bool operator==(const FactTriple&) const = default;
  auto operator<=>(const FactTriple&) const = default;
};

/// Stable short identifier of a triple ("f" + 16 hex digits).
std::string fact_id(const FactTriple& fact);

enum class InterventionMode { edit, unlearn };
enum class RetainPolicy { post_updated, original };

std::string_view to_string(InterventionMode mode) noexcept;
InterventionMode parse_mode(std::string_view text);
std::string_view to_string(RetainPolicy policy) noexcept;

struct InterventionSpec {
  InterventionMode mode = InterventionMode::edit;
  FactTriple item;
  std::optional<FactTriple> updated;
  std::set<std::string> scope;
  RetainPolicy retain_policy = RetainPolicy::post_updated;
};

nlohmann::json to_json(const InterventionSpec& spec);

// Immutable after construction; safe to share between readers.
class KnowledgeGraph {
 public:
  /// Validates every invariant; throws SchemaViolation or DanglingReference.
  KnowledgeGraph(std::string domain, std::vector<KGNode> nodes, std::vector<FactTriple> edges);

  const std::string& domain() const noexcept { return domain_; }
  const std::vector<KGNode>& nodes() const noexcept { return nodes_; }
  const std::vector<FactTriple>& edges() const noexcept { return edges_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  bool has_node(std::string_view id) const;
  const KGNode& node(std::string_view id) const;  // throws UnknownNode
  bool contains(const FactTriple& fact) const;
  const FactTriple* find_fact(std::string_view id) const;

  /// Edges whose object is a literal value rather than a node id.
  std::vector<FactTriple> literal_facts() const;

  /// Undirected neighbours over node-to-node edges, sorted by id.
  const std::vector<std::string>& neighbours(std::string_view id) const;

  /// Throws SchemaViolation unless every level has at least one node.
  void require_all_levels() const;

 private:
  std::size_t index_of(std::string_view id) const;

  std::string domain_;
  std::vector<KGNode> nodes_;
  std::vector<FactTriple> edges_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> adjacency_;
};

KnowledgeGraph kg_from_json(const nlohmann::json& doc);
nlohmann::json kg_to_json(const KnowledgeGraph& kg);
KnowledgeGraph load_kg(const std::filesystem::path& path);

/// Shortest undirected path length over node-to-node edges; literal objects
/// never participate. Empty when disconnected.
std::optional<std::size_t> hop_distance(const KnowledgeGraph& kg, std::string_view a,
                                        std::string_view b);

/// Single-source variant: distance to every reachable node.
std::unordered_map<std::string, std::size_t> hop_distances_from(const KnowledgeGraph& kg,
                                                                std::string_view source);

/// Objects of other facts sharing the relation, preferring subjects at the same
/// level. Sorted, unique, never containing `fact.object`.
std::vector<std::string> sibling_objects(const KnowledgeGraph& kg, const FactTriple& fact);

InterventionSpec derive_intervention(const KnowledgeGraph& kg, const FactTriple& fact,
                                     InterventionMode mode,
                                     const std::optional<std::string>& replacement,
                                     std::uint64_t seed);

std::set<std::string> related_probeset(const KnowledgeGraph& kg, const InterventionSpec& spec,
                                       std::size_t radius);

}  // namespace ksmith
