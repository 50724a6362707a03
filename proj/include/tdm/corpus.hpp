// corpus.hpp
// Core data model for annotated corpora: tokens, entity spans, BIO tags,
// longest-span nesting resolution and annotation-guideline lint checks.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tdm/errors.hpp"

namespace tdm {

// ---------------------------------------------------------------------------
// Labels and tags

enum class EntityLabel : int { Task = 0, Dataset = 1, Metric = 2 };

inline constexpr int kNumEntityLabels = 3;

inline constexpr std::array<EntityLabel, kNumEntityLabels> kEntityLabels = {
    EntityLabel::Task, EntityLabel::Dataset, EntityLabel::Metric};

inline std::string_view to_string(EntityLabel label) {
  switch (label) {
    case EntityLabel::Task: return "Task";
    case EntityLabel::Dataset: return "Dataset";
    case EntityLabel::Metric: return "Metric";
  }
  return "?";
}

inline std::optional<EntityLabel> parse_entity_label(std::string_view s) {
  if (s == "Task") return EntityLabel::Task;
  if (s == "Dataset") return EntityLabel::Dataset;
  if (s == "Metric") return EntityLabel::Metric;
  return std::nullopt;
}

// The 7-tag BIO alphabet. O comes first so that deterministic tie-breaking
// by tag order prefers O (an all-zero model decodes to all O).
enum class BioTag : int {
  O = 0,
  BTask = 1,
  ITask = 2,
  BDataset = 3,
  IDataset = 4,
  BMetric = 5,
  IMetric = 6,
};

inline constexpr int kNumBioTags = 7;

inline std::string_view to_string(BioTag tag) {
  switch (tag) {
    case BioTag::O: return "O";
    case BioTag::BTask: return "B-Task";
    case BioTag::ITask: return "I-Task";
    case BioTag::BDataset: return "B-Dataset";
    case BioTag::IDataset: return "I-Dataset";
    case BioTag::BMetric: return "B-Metric";
    case BioTag::IMetric: return "I-Metric";
  }
  return "?";
}

inline std::optional<BioTag> parse_bio_tag(std::string_view s) {
  if (s == "O") return BioTag::O;
  if (s == "B-Task") return BioTag::BTask;
  if (s == "I-Task") return BioTag::ITask;
  if (s == "B-Dataset") return BioTag::BDataset;
  if (s == "I-Dataset") return BioTag::IDataset;
  if (s == "B-Metric") return BioTag::BMetric;
  if (s == "I-Metric") return BioTag::IMetric;
  return std::nullopt;
}

inline BioTag begin_tag(EntityLabel label) {
  return static_cast<BioTag>(1 + 2 * static_cast<int>(label));
}

inline BioTag inside_tag(EntityLabel label) {
  return static_cast<BioTag>(2 + 2 * static_cast<int>(label));
}

inline bool is_begin(BioTag tag) {
  const int v = static_cast<int>(tag);
  return v == 1 || v == 3 || v == 5;
}

inline bool is_inside(BioTag tag) {
  const int v = static_cast<int>(tag);
  return v == 2 || v == 4 || v == 6;
}

// Label carried by a B-/I- tag; nullopt for O.
inline std::optional<EntityLabel> tag_label(BioTag tag) {
  if (tag == BioTag::O) return std::nullopt;
  return static_cast<EntityLabel>((static_cast<int>(tag) - 1) / 2);
}

// ---------------------------------------------------------------------------
// Sentences

struct Token {
  std::string text;
  std::string pos;  // empty = no POS tag
  int index = 0;
  int char_start = 0;  // half-open offsets into the sentence text
  int char_end = 0;

  bool has_pos() const { return !pos.empty(); }

  friend bool operator==(const Token&, const Token&) = default;
};

// Half-open token span [start, end) with an entity label.
struct EntitySpan {
  int start = 0;
  int end = 0;
  EntityLabel label = EntityLabel::Task;

  int length() const { return end - start; }

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
  friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

inline bool spans_overlap(const EntitySpan& a, const EntitySpan& b) {
  return a.start < b.end && b.start < a.end;
}

struct Sentence {
  std::string doc_id;
  std::string sent_id;
  std::vector<Token> tokens;
  std::vector<EntitySpan> entities;

  int size() const { return static_cast<int>(tokens.size()); }

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Corpus {
  std::vector<Sentence> sentences;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Builds a sentence from plain token texts; character offsets are assigned
// as if the tokens were joined by single spaces.
inline Sentence sentence_from_tokens(std::string doc_id, std::string sent_id,
                                     const std::vector<std::string>& texts,
                                     std::vector<EntitySpan> entities = {},
                                     const std::vector<std::string>& pos = {}) {
  if (!pos.empty() && pos.size() != texts.size())
    throw InvalidInput("sentence_from_tokens: POS list length mismatch");
  Sentence s;
  s.doc_id = std::move(doc_id);
  s.sent_id = std::move(sent_id);
  int offset = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    Token t;
    t.text = texts[i];
    if (!pos.empty()) t.pos = pos[i];
    t.index = static_cast<int>(i);
    t.char_start = offset;
    t.char_end = offset + static_cast<int>(texts[i].size());
    offset = t.char_end + 1;
    s.tokens.push_back(std::move(t));
  }
  s.entities = std::move(entities);
  return s;
}

// Surface form of a span: token texts joined by single spaces.
inline std::string span_surface(const Sentence& s, const EntitySpan& e) {
  if (e.start < 0 || e.end > s.size() || e.start >= e.end)
    throw InvalidInput("span_surface: span out of range");
  std::string out;
  for (int i = e.start; i < e.end; ++i) {
    if (i > e.start) out += ' ';
    out += s.tokens[i].text;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nesting resolution (longest-span rule)

enum class ConflictPolicy { Strict, Lenient };

// Resolves embedded/overlapping annotations down to a non-overlapping set:
// whenever two spans overlap the longer one survives; equal lengths prefer
// the earlier start, then the canonical label order. Spans of identical
// extent but different labels are a conflict: Strict throws, Lenient keeps
// the canonically first label and records a warning. The result is sorted
// by start and the operation is idempotent.
inline std::vector<EntitySpan> resolve_nesting(
    std::vector<EntitySpan> spans,
    ConflictPolicy policy = ConflictPolicy::Strict,
    std::vector<std::string>* warnings = nullptr) {
  for (const auto& e : spans) {
    if (e.start < 0 || e.start >= e.end)
      throw InvalidInput("resolve_nesting: malformed span");
  }

  // Exact duplicates collapse silently; identical extents with different
  // labels are the conflict case.
  std::sort(spans.begin(), spans.end());
  spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    const auto& a = spans[i - 1];
    const auto& b = spans[i];
    if (a.start == b.start && a.end == b.end) {
      const std::string where = "span [" + std::to_string(a.start) + "," +
                                std::to_string(a.end) + ") labeled both " +
                                std::string(to_string(a.label)) + " and " +
                                std::string(to_string(b.label));
      if (policy == ConflictPolicy::Strict)
        throw AnnotationConflict("conflicting labels: " + where);
      if (warnings)
        warnings->push_back("kept " + std::string(to_string(a.label)) +
                            " for " + where);
    }
  }

  std::stable_sort(spans.begin(), spans.end(),
                   [](const EntitySpan& a, const EntitySpan& b) {
                     if (a.length() != b.length()) return a.length() > b.length();
                     if (a.start != b.start) return a.start < b.start;
                     return a.label < b.label;
                   });

  std::vector<EntitySpan> kept;
  for (const auto& e : spans) {
    bool clashes = false;
    for (const auto& k : kept) {
      if (spans_overlap(e, k)) {
        clashes = true;
        break;
      }
    }
    if (!clashes) kept.push_back(e);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

// ---------------------------------------------------------------------------
// BIO conversion

// Entities must be nesting-resolved; overlap is a precondition violation.
inline std::vector<BioTag> to_bio(const Sentence& s) {
  std::vector<BioTag> tags(s.tokens.size(), BioTag::O);
  for (const auto& e : s.entities) {
    if (e.start < 0 || e.start >= e.end || e.end > s.size())
      throw InvalidInput("to_bio: span out of range in " + s.doc_id + "/" +
                         s.sent_id);
    for (int i = e.start; i < e.end; ++i) {
      if (tags[i] != BioTag::O)
        throw InvalidInput(
            "to_bio: overlapping entities; call resolve_nesting first (" +
            s.doc_id + "/" + s.sent_id + ")");
      tags[i] = i == e.start ? begin_tag(e.label) : inside_tag(e.label);
    }
  }
  return tags;
}

// Inverse of to_bio. An I-X without a preceding B-X/I-X is repaired as B-X
// (standard IOB repair); repairs is incremented for each such fix so callers
// can surface how mangled a third-party file was.
inline std::vector<EntitySpan> from_bio(const std::vector<Token>& tokens,
                                        const std::vector<BioTag>& tags,
                                        int* repairs = nullptr) {
  if (tokens.size() != tags.size())
    throw InvalidInput("from_bio: token/tag length mismatch (" +
                       std::to_string(tokens.size()) + " vs " +
                       std::to_string(tags.size()) + ")");
  std::vector<EntitySpan> spans;
  std::optional<EntityLabel> open;
  int open_start = 0;
  auto close = [&](int end) {
    if (open) spans.push_back({open_start, end, *open});
    open.reset();
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const BioTag t = tags[i];
    if (t == BioTag::O) {
      close(static_cast<int>(i));
    } else if (is_begin(t)) {
      close(static_cast<int>(i));
      open = tag_label(t);
      open_start = static_cast<int>(i);
    } else {  // inside tag
      const EntityLabel lab = *tag_label(t);
      if (open && *open == lab) continue;
      close(static_cast<int>(i));
      open = lab;
      open_start = static_cast<int>(i);
      if (repairs) ++*repairs;
    }
  }
  close(static_cast<int>(tags.size()));
  return spans;
}

// ---------------------------------------------------------------------------
// Guideline lint checks (advisory, never blocking)

struct LintFinding {
  EntitySpan span;
  std::string rule_id;
  std::string message;
};

namespace detail {

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool is_determiner(std::string_view lowered) {
  return lowered == "the" || lowered == "a" || lowered == "an";
}

}  // namespace detail

// Flags spans that look like guideline violations:
//   determiner        - span starts with "the"/"a"/"an"
//   task-head-noun    - Task span ends in a bare "task"/"problem" head noun
//                       (shared-task style names with a digit or "shared"
//                       are exempt)
//   anonymous-entity  - the whole span is an anaphor like "this task"
inline std::vector<LintFinding> lint_spans(const Sentence& s) {
  std::vector<LintFinding> findings;
  for (const auto& e : s.entities) {
    if (e.start < 0 || e.end > s.size() || e.start >= e.end) continue;
    const std::string first = detail::ascii_lower(s.tokens[e.start].text);
    const std::string last = detail::ascii_lower(s.tokens[e.end - 1].text);
    const std::string text = detail::ascii_lower(span_surface(s, e));

    if (detail::is_determiner(first)) {
      findings.push_back({e, "determiner",
                          "span starts with determiner \"" +
                              s.tokens[e.start].text + "\": \"" + text + "\""});
    }
    if (e.label == EntityLabel::Task && (last == "task" || last == "problem")) {
      const bool has_digit = std::any_of(text.begin(), text.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c));
      });
      const bool shared_task = text.find("shared") != std::string::npos;
      if (!has_digit && !shared_task)
        findings.push_back({e, "task-head-noun",
                            "Task span ends with bare head noun \"" + last +
                                "\": \"" + text + "\""});
    }
    if (e.length() == 2 &&
        (first == "this" || first == "the" || first == "a" || first == "an") &&
        (last == "task" || last == "dataset" || last == "metric" ||
         last == "corpus")) {
      findings.push_back(
          {e, "anonymous-entity", "span is an anonymous entity: \"" + text + "\""});
    }
  }
  return findings;
}

// ---------------------------------------------------------------------------
// Corpus helpers

// Throws if any (doc_id, sent_id) pair repeats.
inline void validate_unique_keys(const Corpus& corpus) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& s : corpus.sentences) {
    if (!seen.insert({s.doc_id, s.sent_id}).second)
      throw InvalidInput("duplicate sentence key " + s.doc_id + "/" + s.sent_id);
  }
}

}  // namespace tdm
