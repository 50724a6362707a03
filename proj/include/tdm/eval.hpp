// eval.hpp
// Entity-level scoring (exact match and type partial match) and
// inter-annotator agreement (mean pairwise F, token-level Fleiss' kappa).
//
// Conventions: 0/0 precision and recall are defined as 0; micro scores sum
// counts over the three entity types.

#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "tdm/corpus.hpp"
#include "tdm/errors.hpp"

namespace tdm {

enum class MatchMode { Exact, PartialType };

struct LabelCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  void finish() {
    precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    f1 = precision + recall > 0
             ? 2.0 * precision * recall / (precision + recall)
             : 0.0;
  }
};

struct EvalReport {
  MatchMode mode = MatchMode::Exact;
  std::array<LabelCounts, kNumEntityLabels> per_label;
  LabelCounts micro;

  std::string table() const;
  std::string machine_readable() const;
};

namespace detail {

using SentenceKey = std::pair<std::string, std::string>;

inline std::map<SentenceKey, const Sentence*> index_corpus(const Corpus& c,
                                                           const char* role) {
  std::map<SentenceKey, const Sentence*> index;
  for (const auto& s : c.sentences) {
    if (!index.insert({{s.doc_id, s.sent_id}, &s}).second)
      throw InvalidInput(std::string(role) + " corpus has duplicate key " +
                         s.doc_id + "/" + s.sent_id);
  }
  return index;
}

inline void check_same_keys(const std::map<SentenceKey, const Sentence*>& gold,
                            const std::map<SentenceKey, const Sentence*>& pred) {
  std::string missing;
  int shown = 0;
  auto note = [&](const SentenceKey& k, const char* side) {
    if (shown++ < 5)
      missing += std::string(" ") + k.first + "/" + k.second + " (" + side + ")";
  };
  for (const auto& [k, v] : gold)
    if (!pred.count(k)) note(k, "missing from predictions");
  for (const auto& [k, v] : pred)
    if (!gold.count(k)) note(k, "missing from gold");
  if (!missing.empty())
    throw InvalidInput("sentence key sets differ:" + missing +
                       (shown > 5 ? " ..." : ""));
}

inline std::vector<EntitySpan> spans_of(const Sentence& s, EntityLabel label) {
  std::vector<EntitySpan> out;
  for (const auto& e : s.entities)
    if (e.label == label) out.push_back(e);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string format4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace detail

namespace detail {

template <typename MatchCounter>
EvalReport score_with(const Corpus& gold, const Corpus& pred, MatchMode mode,
                      MatchCounter count_matches) {
  const auto gi = index_corpus(gold, "gold");
  const auto pi = index_corpus(pred, "prediction");
  check_same_keys(gi, pi);

  EvalReport report;
  report.mode = mode;
  for (const auto& [key, gs] : gi) {
    const Sentence* ps = pi.at(key);
    for (EntityLabel label : kEntityLabels) {
      const auto g = spans_of(*gs, label);
      const auto p = spans_of(*ps, label);
      const long long tp = count_matches(g, p);
      auto& counts = report.per_label[static_cast<int>(label)];
      counts.tp += tp;
      counts.fp += static_cast<long long>(p.size()) - tp;
      counts.fn += static_cast<long long>(g.size()) - tp;
    }
  }
  for (auto& counts : report.per_label) {
    report.micro.tp += counts.tp;
    report.micro.fp += counts.fp;
    report.micro.fn += counts.fn;
    counts.finish();
  }
  report.micro.finish();
  return report;
}

}  // namespace detail

// True positive = identical boundaries and identical label; every span can
// match at most once.
inline EvalReport score_exact(const Corpus& gold, const Corpus& pred) {
  return detail::score_with(
      gold, pred, MatchMode::Exact,
      [](const std::vector<EntitySpan>& g, const std::vector<EntitySpan>& p) {
        long long tp = 0;
        std::size_t i = 0, j = 0;
        while (i < g.size() && j < p.size()) {
          if (g[i] == p[j]) {
            ++tp;
            ++i;
            ++j;
          } else if (g[i] < p[j]) {
            ++i;
          } else {
            ++j;
          }
        }
        return tp;
      });
}

// Type partial match: a prediction is correct when it shares at least one
// token with a gold span of the same label. Matching is greedy one-to-one
// in span order, so each gold span consumes at most one prediction.
inline EvalReport score_partial_type(const Corpus& gold, const Corpus& pred) {
  return detail::score_with(
      gold, pred, MatchMode::PartialType,
      [](const std::vector<EntitySpan>& g, const std::vector<EntitySpan>& p) {
        long long tp = 0;
        std::vector<bool> used(p.size(), false);
        for (const auto& gs : g) {
          for (std::size_t j = 0; j < p.size(); ++j) {
            if (used[j] || !spans_overlap(gs, p[j])) continue;
            used[j] = true;
            ++tp;
            break;
          }
        }
        return tp;
      });
}

inline std::string EvalReport::table() const {
  std::string out = "           P        R        F\n";
  auto row = [&](std::string_view name, const LabelCounts& c) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-9s  %6.4f   %6.4f   %6.4f\n",
                  std::string(name).c_str(), c.precision, c.recall, c.f1);
    out += buf;
  };
  for (EntityLabel label : kEntityLabels)
    row(to_string(label), per_label[static_cast<int>(label)]);
  row("Micro", micro);
  return out;
}

inline std::string EvalReport::machine_readable() const {
  std::string out;
  auto block = [&](std::string_view name, const LabelCounts& c) {
    const std::string n(name);
    out += n + ".tp=" + std::to_string(c.tp) + "\n";
    out += n + ".fp=" + std::to_string(c.fp) + "\n";
    out += n + ".fn=" + std::to_string(c.fn) + "\n";
    out += n + ".precision=" + detail::format4(c.precision) + "\n";
    out += n + ".recall=" + detail::format4(c.recall) + "\n";
    out += n + ".f1=" + detail::format4(c.f1) + "\n";
  };
  for (EntityLabel label : kEntityLabels)
    block(to_string(label), per_label[static_cast<int>(label)]);
  block("micro", micro);
  return out;
}

// ---------------------------------------------------------------------------
// Inter-annotator agreement

struct PairwiseFResult {
  std::array<double, kNumEntityLabels> per_label{};
  double overall = 0.0;
};

// Mean exact-match F over all unordered annotator pairs. F is symmetric in
// which annotator plays gold, so each pair is scored once.
inline PairwiseFResult pairwise_f(const std::vector<Corpus>& annotators) {
  if (annotators.size() < 2)
    throw InvalidInput("pairwise_f: need at least 2 annotators");
  PairwiseFResult result;
  int pairs = 0;
  for (std::size_t i = 0; i < annotators.size(); ++i) {
    for (std::size_t j = i + 1; j < annotators.size(); ++j) {
      const EvalReport r = score_exact(annotators[i], annotators[j]);
      for (int label = 0; label < kNumEntityLabels; ++label)
        result.per_label[label] += r.per_label[label].f1;
      result.overall += r.micro.f1;
      ++pairs;
    }
  }
  for (double& v : result.per_label) v /= pairs;
  result.overall /= pairs;
  return result;
}

struct FleissKappaResult {
  std::array<double, kNumEntityLabels> per_label{};  // binary, label vs rest
  double overall = 0.0;                              // 4 categories: T/D/M/O
  double per_label_mean = 0.0;
  long long token_count = 0;
};

namespace detail {

// Standard Fleiss formula over an items x categories count table where every
// row sums to the rater count. Perfect observed agreement returns exactly
// 1.0, which also covers the degenerate all-one-category case.
inline double fleiss_from_counts(const std::vector<std::array<long long, 4>>& counts,
                                 int categories, long long raters) {
  const long long items = static_cast<long long>(counts.size());
  if (items == 0 || raters < 2) return 1.0;
  double sum_pi = 0.0;
  std::array<double, 4> category_mass{};
  bool perfect = true;
  for (const auto& row : counts) {
    long long sq = 0;
    for (int j = 0; j < categories; ++j) {
      sq += row[j] * row[j];
      category_mass[j] += static_cast<double>(row[j]);
    }
    if (sq != raters * raters) perfect = false;
    sum_pi += static_cast<double>(sq - raters) /
              static_cast<double>(raters * (raters - 1));
  }
  if (perfect) return 1.0;
  const double p_bar = sum_pi / static_cast<double>(items);
  double p_e = 0.0;
  for (int j = 0; j < categories; ++j) {
    const double p_j =
        category_mass[j] / (static_cast<double>(items) * raters);
    p_e += p_j * p_j;
  }
  return (p_bar - p_e) / (1.0 - p_e);
}

// Per-token category (0..2 entity label, 3 = O) for every sentence of one
// annotator; entities must be nesting-resolved.
inline std::vector<int> token_categories(const Sentence& s) {
  std::vector<int> cats(s.tokens.size(), kNumEntityLabels);
  const auto tags = to_bio(s);  // throws on overlap
  for (std::size_t i = 0; i < tags.size(); ++i)
    if (auto label = tag_label(tags[i])) cats[i] = static_cast<int>(*label);
  return cats;
}

}  // namespace detail

// Token-level Fleiss' kappa across annotators: every token is a rating item.
// Per-label kappas rate "inside a span of that label" vs not; the overall
// kappa uses the four categories Task/Dataset/Metric/O.
inline FleissKappaResult fleiss_kappa(const std::vector<Corpus>& annotators) {
  if (annotators.size() < 2)
    throw InvalidInput("fleiss_kappa: need at least 2 annotators");
  const long long raters = static_cast<long long>(annotators.size());

  std::vector<std::map<detail::SentenceKey, const Sentence*>> indexes;
  for (const auto& c : annotators)
    indexes.push_back(detail::index_corpus(c, "annotator"));
  for (std::size_t a = 1; a < indexes.size(); ++a)
    detail::check_same_keys(indexes[0], indexes[a]);

  std::vector<std::array<long long, 4>> overall_counts;
  std::array<std::vector<std::array<long long, 4>>, kNumEntityLabels> binary;

  for (const auto& [key, first] : indexes[0]) {
    const std::size_t n_tokens = first->tokens.size();
    std::vector<std::vector<int>> cats;
    for (std::size_t a = 0; a < indexes.size(); ++a) {
      const Sentence* s = indexes[a].at(key);
      if (s->tokens.size() != n_tokens)
        throw InvalidInput("fleiss_kappa: tokenization mismatch at " +
                           key.first + "/" + key.second);
      for (std::size_t t = 0; t < n_tokens; ++t)
        if (s->tokens[t].text != first->tokens[t].text)
          throw InvalidInput("fleiss_kappa: tokenization mismatch at " +
                             key.first + "/" + key.second);
      cats.push_back(detail::token_categories(*s));
    }
    for (std::size_t t = 0; t < n_tokens; ++t) {
      std::array<long long, 4> row{};
      for (const auto& annotator_cats : cats) ++row[annotator_cats[t]];
      overall_counts.push_back(row);
      for (int label = 0; label < kNumEntityLabels; ++label) {
        std::array<long long, 4> bin{};
        bin[0] = row[label];
        bin[1] = raters - row[label];
        binary[label].push_back(bin);
      }
    }
  }

  FleissKappaResult result;
  result.token_count = static_cast<long long>(overall_counts.size());
  result.overall = detail::fleiss_from_counts(overall_counts, 4, raters);
  for (int label = 0; label < kNumEntityLabels; ++label) {
    result.per_label[label] =
        detail::fleiss_from_counts(binary[label], 2, raters);
    result.per_label_mean += result.per_label[label];
  }
  result.per_label_mean /= kNumEntityLabels;
  return result;
}

struct AgreementReport {
  PairwiseFResult mean_pairwise_f;
  FleissKappaResult kappa;
  int annotator_count = 0;
  long long token_count = 0;

  std::string table() const {
    std::string out =
        "           Mean F (exact)   Fleiss kappa (token)\n";
    auto row = [&](std::string_view name, double f, double k) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%-9s  %6.4f           %6.4f\n",
                    std::string(name).c_str(), f, k);
      out += buf;
    };
    for (int label = 0; label < kNumEntityLabels; ++label)
      row(to_string(static_cast<EntityLabel>(label)),
          mean_pairwise_f.per_label[label], kappa.per_label[label]);
    row("Overall", mean_pairwise_f.overall, kappa.overall);
    return out;
  }

  std::string machine_readable() const {
    std::string out;
    for (int label = 0; label < kNumEntityLabels; ++label) {
      const std::string n(to_string(static_cast<EntityLabel>(label)));
      out += n + ".mean_pairwise_f=" +
             detail::format4(mean_pairwise_f.per_label[label]) + "\n";
      out += n + ".fleiss_kappa=" + detail::format4(kappa.per_label[label]) +
             "\n";
    }
    out += "overall.mean_pairwise_f=" + detail::format4(mean_pairwise_f.overall) +
           "\n";
    out += "overall.fleiss_kappa=" + detail::format4(kappa.overall) + "\n";
    out += "overall.fleiss_kappa_label_mean=" +
           detail::format4(kappa.per_label_mean) + "\n";
    out += "annotators=" + std::to_string(annotator_count) + "\n";
    out += "tokens=" + std::to_string(token_count) + "\n";
    return out;
  }
};

inline AgreementReport agreement(const std::vector<Corpus>& annotators) {
  AgreementReport report;
  report.mean_pairwise_f = pairwise_f(annotators);
  report.kappa = fleiss_kappa(annotators);
  report.annotator_count = static_cast<int>(annotators.size());
  report.token_count = report.kappa.token_count;
  return report;
}

}  // namespace tdm
