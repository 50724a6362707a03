// features.hpp
// Deterministic feature templates for the sequence tagger: word unigrams in
// a +-1 window, character prefix/suffix n-grams, POS unigram + bigrams,
// word shapes, and gazetteer membership.
//
// Every feature is a flat string "template=value" (e.g. "w[-1]=the",
// "suf3=ank", "gaz:datasets=B"). Extraction is pure: identical inputs yield
// identical sorted feature sets.

#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tdm/corpus.hpp"
#include "tdm/errors.hpp"

namespace tdm {

inline constexpr std::string_view kBosSentinel = "<S>";
inline constexpr std::string_view kEosSentinel = "</S>";

// ---------------------------------------------------------------------------
// Word shape

// Maps uppercase -> X, lowercase -> x, digit -> d, anything else -> itself.
// The collapsed variant squeezes runs of identical shape characters:
// "SemEval-2017" -> "XxxXxxx-dddd", collapsed "XxXx-d".
inline std::string word_shape(std::string_view token, bool collapsed = false) {
  if (token.empty()) throw InvalidInput("word_shape: empty token");
  std::string shape;
  shape.reserve(token.size());
  for (char c : token) {
    const unsigned char u = static_cast<unsigned char>(c);
    char m = c;
    if (u < 128) {
      if (std::isupper(u)) m = 'X';
      else if (std::islower(u)) m = 'x';
      else if (std::isdigit(u)) m = 'd';
    }
    if (collapsed && !shape.empty() && shape.back() == m) continue;
    shape.push_back(m);
  }
  return shape;
}

// ---------------------------------------------------------------------------
// Gazetteers

namespace detail {

inline std::string fold_case(std::string_view s, bool case_insensitive) {
  std::string out(s);
  if (case_insensitive)
    for (char& c : out)
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

// A list of known entity phrases, matched token-wise against sentences.
// Phrases are stored whitespace-normalized (single spaces), sorted, deduped.
struct Gazetteer {
  std::string name;
  std::vector<std::string> phrases;
  bool match_case_insensitive = true;

  friend bool operator==(const Gazetteer&, const Gazetteer&) = default;

  static Gazetteer from_phrases(std::string name,
                                const std::vector<std::string>& raw,
                                bool case_insensitive = true) {
    Gazetteer g;
    g.name = std::move(name);
    g.match_case_insensitive = case_insensitive;
    for (const auto& phrase : raw) {
      std::istringstream words(phrase);
      std::string w, normalized;
      while (words >> w) {
        if (!normalized.empty()) normalized += ' ';
        normalized += w;
      }
      if (!normalized.empty()) g.phrases.push_back(std::move(normalized));
    }
    std::sort(g.phrases.begin(), g.phrases.end());
    g.phrases.erase(std::unique(g.phrases.begin(), g.phrases.end()),
                    g.phrases.end());
    if (g.phrases.empty())
      throw InvalidInput("gazetteer \"" + g.name + "\" has no entries");
    return g;
  }

  // File format: UTF-8, one phrase per line, '#' comment lines and blank
  // lines ignored.
  static Gazetteer from_stream(std::istream& in, std::string name,
                               bool case_insensitive = true) {
    std::vector<std::string> raw;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::size_t i = 0;
      while (i < line.size() &&
             std::isspace(static_cast<unsigned char>(line[i])))
        ++i;
      if (i >= line.size() || line[i] == '#') continue;
      raw.push_back(line);
    }
    return from_phrases(std::move(name), raw, case_insensitive);
  }

  static Gazetteer from_file(const std::string& path, std::string name = "",
                             bool case_insensitive = true) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open gazetteer file " + path);
    if (name.empty()) {
      // default name = file stem
      std::size_t slash = path.find_last_of("/\\");
      std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
      std::size_t dot = stem.find_last_of('.');
      if (dot != std::string::npos && dot > 0) stem = stem.substr(0, dot);
      name = stem;
    }
    return from_stream(in, std::move(name), case_insensitive);
  }
};

// Greedy longest-match scan, left to right; matches never overlap.
inline std::vector<std::pair<int, int>> gazetteer_match(const Sentence& s,
                                                        const Gazetteer& gaz) {
  // Bucket entries by folded first token; longest entry first within a bucket.
  std::map<std::string, std::vector<std::vector<std::string>>> by_first;
  for (const auto& phrase : gaz.phrases) {
    std::istringstream words(
        detail::fold_case(phrase, gaz.match_case_insensitive));
    std::vector<std::string> toks;
    std::string w;
    while (words >> w) toks.push_back(w);
    by_first[toks.front()].push_back(std::move(toks));
  }
  for (auto& [first, bucket] : by_first)
    std::stable_sort(bucket.begin(), bucket.end(),
                     [](const auto& a, const auto& b) {
                       return a.size() > b.size();
                     });

  std::vector<std::string> folded;
  folded.reserve(s.tokens.size());
  for (const auto& t : s.tokens)
    folded.push_back(detail::fold_case(t.text, gaz.match_case_insensitive));

  std::vector<std::pair<int, int>> matches;
  int i = 0;
  const int n = s.size();
  while (i < n) {
    auto it = by_first.find(folded[i]);
    int matched_len = 0;
    if (it != by_first.end()) {
      for (const auto& entry : it->second) {
        const int len = static_cast<int>(entry.size());
        if (i + len > n) continue;
        bool ok = true;
        for (int k = 1; k < len && ok; ++k) ok = folded[i + k] == entry[k];
        if (ok) {
          matched_len = len;
          break;
        }
      }
    }
    if (matched_len > 0) {
      matches.push_back({i, i + matched_len});
      i += matched_len;
    } else {
      ++i;
    }
  }
  return matches;
}

// ---------------------------------------------------------------------------
// Feature configuration

struct FeatureConfig {
  bool use_pos = true;
  bool use_shape = true;
  std::vector<int> char_ngram_lengths = {2, 3, 4};
  int shape_window = 1;
  int pos_window = 1;
  std::vector<Gazetteer> gazetteers;
  std::string unknown_token = "UNK";

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;

  void validate() const {
    for (int len : char_ngram_lengths)
      if (len < 1 || len > 6)
        throw InvalidInput("char n-gram length " + std::to_string(len) +
                           " outside [1,6]");
    if (shape_window < 0 || pos_window < 0)
      throw InvalidInput("feature windows must be >= 0");
    if (unknown_token.empty())
      throw InvalidInput("unknown_token must be non-empty");
  }
};

// ---------------------------------------------------------------------------
// Extraction

// Precomputes per-sentence state (gazetteer matches) once, then emits the
// per-position feature set. Use this when extracting over whole corpora.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig config) : config_(std::move(config)) {
    config_.validate();
    lengths_ = config_.char_ngram_lengths;
    std::sort(lengths_.begin(), lengths_.end());
    lengths_.erase(std::unique(lengths_.begin(), lengths_.end()),
                   lengths_.end());
  }

  const FeatureConfig& config() const { return config_; }

  std::vector<std::string> features_at(const Sentence& s, int i) const {
    if (i < 0 || i >= s.size())
      throw InvalidInput("extract_features: token index " + std::to_string(i) +
                         " out of range");
    return sentence_features(s)[i];
  }

  std::vector<std::vector<std::string>> sentence_features(
      const Sentence& s) const {
    const int n = s.size();
    // gaz_state[g][i]: 0 outside, 1 starts a match, 2 continues one
    std::vector<std::vector<char>> gaz_state(config_.gazetteers.size(),
                                             std::vector<char>(n, 0));
    for (std::size_t g = 0; g < config_.gazetteers.size(); ++g) {
      for (const auto& [b, e] : gazetteer_match(s, config_.gazetteers[g])) {
        gaz_state[g][b] = 1;
        for (int k = b + 1; k < e; ++k) gaz_state[g][k] = 2;
      }
    }
    std::vector<std::vector<std::string>> out(n);
    for (int i = 0; i < n; ++i) out[i] = position_features(s, i, gaz_state);
    return out;
  }

 private:
  static std::string offset_tag(int off) {
    if (off == 0) return "[0]";
    if (off > 0) return "[+" + std::to_string(off) + "]";
    return "[" + std::to_string(off) + "]";
  }

  std::vector<std::string> position_features(
      const Sentence& s, int i,
      const std::vector<std::vector<char>>& gaz_state) const {
    const int n = s.size();
    std::vector<std::string> feats;

    auto word_at = [&](int j) -> std::string {
      if (j < 0) return std::string(kBosSentinel);
      if (j >= n) return std::string(kEosSentinel);
      return s.tokens[j].text;
    };

    // word unigrams, previous/current/next
    for (int off = -1; off <= 1; ++off)
      feats.push_back("w" + offset_tag(off) + "=" + word_at(i + off));

    // character n-grams of the current word (prefixes and suffixes)
    const std::string& w = s.tokens[i].text;
    for (int len : lengths_) {
      if (static_cast<int>(w.size()) < len) continue;
      feats.push_back("pre" + std::to_string(len) + "=" + w.substr(0, len));
      feats.push_back("suf" + std::to_string(len) + "=" +
                      w.substr(w.size() - len));
    }

    // POS templates: unigram plus surrounding bigrams
    if (config_.use_pos && s.tokens[i].has_pos()) {
      const std::string& p = s.tokens[i].pos;
      feats.push_back("pos[0]=" + p);
      if (config_.pos_window >= 1) {
        const bool prev_ok = i == 0 || s.tokens[i - 1].has_pos();
        const bool next_ok = i + 1 >= n || s.tokens[i + 1].has_pos();
        if (prev_ok)
          feats.push_back("pos[-1]|pos[0]=" +
                          (i == 0 ? std::string(kBosSentinel)
                                  : s.tokens[i - 1].pos) +
                          "|" + p);
        if (next_ok)
          feats.push_back("pos[0]|pos[+1]=" + p + "|" +
                          (i + 1 >= n ? std::string(kEosSentinel)
                                      : s.tokens[i + 1].pos));
      }
    }

    // word shapes (raw and collapsed) over the shape window
    if (config_.use_shape) {
      for (int off = -config_.shape_window; off <= config_.shape_window;
           ++off) {
        const int j = i + off;
        std::string raw, squeezed;
        if (j < 0) {
          raw = squeezed = std::string(kBosSentinel);
        } else if (j >= n) {
          raw = squeezed = std::string(kEosSentinel);
        } else {
          raw = word_shape(s.tokens[j].text, false);
          squeezed = word_shape(s.tokens[j].text, true);
        }
        feats.push_back("shape" + offset_tag(off) + "=" + raw);
        feats.push_back("shapec" + offset_tag(off) + "=" + squeezed);
      }
    }

    // gazetteer membership
    for (std::size_t g = 0; g < config_.gazetteers.size(); ++g) {
      if (gaz_state[g][i] == 1)
        feats.push_back("gaz:" + config_.gazetteers[g].name + "=B");
      else if (gaz_state[g][i] == 2)
        feats.push_back("gaz:" + config_.gazetteers[g].name + "=I");
    }

    std::sort(feats.begin(), feats.end());
    feats.erase(std::unique(feats.begin(), feats.end()), feats.end());
    return feats;
  }

  FeatureConfig config_;
  std::vector<int> lengths_;
};

inline std::vector<std::string> extract_features(const Sentence& s, int i,
                                                 const FeatureConfig& config) {
  return FeatureExtractor(config).features_at(s, i);
}

}  // namespace tdm
