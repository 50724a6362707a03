// kg.hpp
// Co-occurrence knowledge graph over tagged corpora: nodes are (normalized
// surface, label) pairs seen often enough across enough papers, edges link
// a Task node to a Dataset or Metric node they share sentences with.

#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "tdm/corpus.hpp"
#include "tdm/errors.hpp"

namespace tdm {

struct KgThresholds {
  int min_node_mentions = 5;
  int min_node_papers = 2;
  int min_edge_sentences = 5;
  int min_edge_papers = 2;

  void validate() const {
    if (min_node_mentions < 1 || min_node_papers < 1 ||
        min_edge_sentences < 1 || min_edge_papers < 1)
      throw InvalidInput("kg thresholds must all be >= 1");
  }
};

struct TdmNode {
  std::string surface;  // normalized
  EntityLabel label = EntityLabel::Task;
  std::string display_surface;  // most frequent raw surface
  long long mention_count = 0;
  long long paper_count = 0;

  friend bool operator==(const TdmNode&, const TdmNode&) = default;
};

struct TdmEdge {
  std::string task_surface;
  std::string other_surface;
  EntityLabel other_label = EntityLabel::Dataset;
  long long cooccurrence_count = 0;  // distinct sentences
  long long paper_count = 0;

  friend bool operator==(const TdmEdge&, const TdmEdge&) = default;
};

struct TdmGraph {
  std::vector<TdmNode> nodes;  // sorted by (surface, label)
  std::vector<TdmEdge> edges;  // sorted by (task, other, other_label)
  KgThresholds thresholds;
};

// Lowercases, collapses whitespace runs, trims, and strips trailing
// sentence punctuation (. , ; :). Throws if nothing is left.
inline std::string normalize_surface(std::string_view text) {
  if (text.empty()) throw InvalidInput("normalize_surface: empty input");
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    const unsigned char u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      if (!out.empty() && out.back() != ' ') out += ' ';
    } else {
      out += static_cast<char>(std::tolower(u));
    }
  }
  auto strip_tail = [&]() {
    while (!out.empty() &&
           (out.back() == ' ' || out.back() == '.' || out.back() == ',' ||
            out.back() == ';' || out.back() == ':'))
      out.pop_back();
  };
  strip_tail();
  if (out.empty())
    throw InvalidInput("normalize_surface: nothing left after normalization");
  return out;
}

// Builds the thresholded graph. Mentions are counted per occurrence; sentence
// co-occurrence pairs are deduplicated by key within a sentence, so one
// sentence contributes at most one co-occurrence per (task, other) pair.
// Mentions whose surface normalizes to nothing (pure punctuation) are skipped.
inline TdmGraph build_graph(const Corpus& tagged,
                            const KgThresholds& thresholds = {}) {
  thresholds.validate();

  using NodeKey = std::pair<std::string, int>;  // (surface, label)
  struct NodeStat {
    long long mentions = 0;
    std::set<std::string> papers;
    std::map<std::string, long long> surfaces;
  };
  using EdgeKey = std::tuple<std::string, std::string, int>;
  struct EdgeStat {
    long long sentences = 0;
    std::set<std::string> papers;
  };

  std::map<NodeKey, NodeStat> node_stats;
  std::map<EdgeKey, EdgeStat> edge_stats;

  for (const auto& s : tagged.sentences) {
    std::set<NodeKey> tasks, others;
    for (const auto& e : s.entities) {
      if (e.start < 0 || e.end > s.size() || e.start >= e.end) continue;
      const std::string raw = span_surface(s, e);
      std::string normalized;
      try {
        normalized = normalize_surface(raw);
      } catch (const InvalidInput&) {
        continue;  // tagger noise like a bare "."
      }
      const NodeKey key{normalized, static_cast<int>(e.label)};
      NodeStat& stat = node_stats[key];
      ++stat.mentions;
      stat.papers.insert(s.doc_id);
      ++stat.surfaces[raw];
      if (e.label == EntityLabel::Task)
        tasks.insert(key);
      else
        others.insert(key);
    }
    for (const auto& t : tasks) {
      for (const auto& o : others) {
        EdgeStat& stat = edge_stats[{t.first, o.first, o.second}];
        ++stat.sentences;
        stat.papers.insert(s.doc_id);
      }
    }
  }

  TdmGraph graph;
  graph.thresholds = thresholds;
  std::set<NodeKey> admitted;
  for (const auto& [key, stat] : node_stats) {
    if (stat.mentions < thresholds.min_node_mentions) continue;
    if (static_cast<int>(stat.papers.size()) < thresholds.min_node_papers)
      continue;
    TdmNode node;
    node.surface = key.first;
    node.label = static_cast<EntityLabel>(key.second);
    node.mention_count = stat.mentions;
    node.paper_count = static_cast<long long>(stat.papers.size());
    long long best = 0;
    for (const auto& [raw, count] : stat.surfaces) {
      if (count > best) {  // map order makes ties go to the smallest surface
        best = count;
        node.display_surface = raw;
      }
    }
    admitted.insert(key);
    graph.nodes.push_back(std::move(node));
  }
  for (const auto& [key, stat] : edge_stats) {
    if (stat.sentences < thresholds.min_edge_sentences) continue;
    if (static_cast<int>(stat.papers.size()) < thresholds.min_edge_papers)
      continue;
    const auto& [task_surface, other_surface, other_label] = key;
    if (!admitted.count({task_surface, static_cast<int>(EntityLabel::Task)}))
      continue;
    if (!admitted.count({other_surface, other_label})) continue;
    TdmEdge edge;
    edge.task_surface = task_surface;
    edge.other_surface = other_surface;
    edge.other_label = static_cast<EntityLabel>(other_label);
    edge.cooccurrence_count = stat.sentences;
    edge.paper_count = static_cast<long long>(stat.papers.size());
    graph.edges.push_back(std::move(edge));
  }
  return graph;
}

enum class KgFormat { Dot, JsonLines };

namespace detail {

inline std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

inline std::string dot_node_id(std::string_view surface, EntityLabel label) {
  std::string id(to_string(label));
  for (char& c : id) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return id + "|" + std::string(surface);
}

inline std::string_view dot_shape(EntityLabel label) {
  switch (label) {
    case EntityLabel::Task: return "ellipse";
    case EntityLabel::Dataset: return "box";
    case EntityLabel::Metric: return "diamond";
  }
  return "ellipse";
}

}  // namespace detail

inline std::string export_graph(const TdmGraph& graph, KgFormat format) {
  std::string out;
  if (format == KgFormat::Dot) {
    out += "graph tdm {\n";
    out += "  node [fontsize=10];\n";
    for (const auto& n : graph.nodes) {
      out += "  \"" + detail::dot_escape(detail::dot_node_id(n.surface, n.label)) +
             "\" [label=\"" + detail::dot_escape(n.display_surface) +
             "\", shape=" + std::string(detail::dot_shape(n.label)) + "];\n";
    }
    for (const auto& e : graph.edges) {
      out += "  \"" +
             detail::dot_escape(
                 detail::dot_node_id(e.task_surface, EntityLabel::Task)) +
             "\" -- \"" +
             detail::dot_escape(
                 detail::dot_node_id(e.other_surface, e.other_label)) +
             "\" [weight=" + std::to_string(e.cooccurrence_count) +
             ", label=\"" + std::to_string(e.cooccurrence_count) + "\"];\n";
    }
    out += "}\n";
    return out;
  }
  // JSON lines: nodes first, then edges, already in deterministic order.
  for (const auto& n : graph.nodes) {
    nlohmann::json j;
    j["type"] = "node";
    j["surface"] = n.surface;
    j["label"] = std::string(to_string(n.label));
    j["display"] = n.display_surface;
    j["mentions"] = n.mention_count;
    j["papers"] = n.paper_count;
    out += j.dump() + "\n";
  }
  for (const auto& e : graph.edges) {
    nlohmann::json j;
    j["type"] = "edge";
    j["task"] = e.task_surface;
    j["other"] = e.other_surface;
    j["other_label"] = std::string(to_string(e.other_label));
    j["cooccurrences"] = e.cooccurrence_count;
    j["papers"] = e.paper_count;
    out += j.dump() + "\n";
  }
  return out;
}

inline std::string export_graph(const TdmGraph& graph, std::string_view format) {
  if (format == "dot") return export_graph(graph, KgFormat::Dot);
  if (format == "jsonl") return export_graph(graph, KgFormat::JsonLines);
  throw InvalidInput("unknown graph export format \"" + std::string(format) +
                     "\" (expected dot or jsonl)");
}

}  // namespace tdm
