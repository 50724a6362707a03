// formats.hpp
// BRAT standoff and CoNLL column file I/O, plus the frozen whitespace
// tokenizer used when importing raw BRAT text.
//
// CoNLL flavor: TAB-separated columns (token, tag) or (token, pos, tag),
// blank line between sentences, optional "#doc=<id>" / "#sent=<id>" comment
// lines. "#doc" is sticky until the next "#doc"; "#sent" applies to the next
// sentence only. A line starting with '#' that contains a TAB is a token
// line, not a comment.

#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tdm/corpus.hpp"
#include "tdm/errors.hpp"

namespace tdm {

// ---------------------------------------------------------------------------
// Tokenizer
//
// Split on whitespace, then peel leading/trailing ASCII punctuation into
// separate tokens. Internal punctuation stays put, so "SemEval-2017" and
// "U.S" survive as single tokens while "(IMDB)," becomes ( IMDB ) ,

namespace detail {

inline bool is_ascii_punct(char c) {
  const unsigned char u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u);
}

inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

}  // namespace detail

inline std::vector<Token> tokenize_text(std::string_view text) {
  std::vector<Token> out;
  auto push = [&](std::size_t b, std::size_t e) {
    Token t;
    t.text = std::string(text.substr(b, e - b));
    t.index = static_cast<int>(out.size());
    t.char_start = static_cast<int>(b);
    t.char_end = static_cast<int>(e);
    out.push_back(std::move(t));
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (detail::is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !detail::is_space(text[j])) ++j;
    std::size_t b = i;
    while (b < j && detail::is_ascii_punct(text[b])) {
      push(b, b + 1);
      ++b;
    }
    std::size_t core_end = j;
    while (core_end > b && detail::is_ascii_punct(text[core_end - 1])) --core_end;
    if (core_end > b) push(b, core_end);
    for (std::size_t k = core_end; k < j; ++k) push(k, k + 1);
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// BRAT standoff

struct BratAnnotation {
  std::string ann_id;
  EntityLabel label = EntityLabel::Task;
  int char_start = 0;
  int char_end = 0;
  std::string surface;
};

struct BratDocument {
  std::string doc_id;
  std::string source_text;
  std::vector<BratAnnotation> annotations;
};

struct BratFiles {
  std::string txt;
  std::string ann;
};

namespace detail {

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (nl == text.size()) break;
    pos = nl + 1;
  }
  // A trailing newline produces one empty tail entry; drop it.
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline std::vector<std::string> split_fields(std::string_view line, char sep) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      fields.emplace_back(line.substr(pos));
      break;
    }
    fields.emplace_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  return fields;
}

inline std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (is_space(line[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline int parse_offset(const std::string& s, int line_no) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size() || v < 0) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("ann line " + std::to_string(line_no) +
                      ": bad character offset \"" + s + "\"");
  }
}

}  // namespace detail

// Parses the .ann side of a BRAT pair. Only text-bound entity lines
// ("T<id>") are consumed; relation/event/attribute/note lines are skipped
// with a finding. Discontinuous spans ("start end;start end") are rejected.
inline BratDocument parse_brat_annotations(std::string_view txt,
                                           std::string_view ann,
                                           const std::string& doc_id,
                                           std::vector<std::string>* findings =
                                               nullptr) {
  BratDocument doc;
  doc.doc_id = doc_id;
  doc.source_text = std::string(txt);

  int line_no = 0;
  for (const std::string& raw : detail::split_lines(ann)) {
    ++line_no;
    if (raw.empty()) continue;
    const char kind = raw[0];
    if (kind != 'T') {
      if (kind == 'R' || kind == 'E' || kind == 'A' || kind == 'M' ||
          kind == 'N' || kind == '#' || kind == '*') {
        if (findings)
          findings->push_back("ann line " + std::to_string(line_no) +
                              ": ignored non-entity annotation");
        continue;
      }
      throw FormatError("ann line " + std::to_string(line_no) +
                        ": unrecognized annotation line");
    }
    const auto fields = detail::split_fields(raw, '\t');
    if (fields.size() < 3)
      throw FormatError("ann line " + std::to_string(line_no) +
                        ": expected <id>TAB<type offsets>TAB<surface>");
    if (fields[1].find(';') != std::string::npos)
      throw Unsupported("ann line " + std::to_string(line_no) +
                        ": discontinuous spans are not supported");
    const auto parts = detail::split_whitespace(fields[1]);
    if (parts.size() != 3)
      throw FormatError("ann line " + std::to_string(line_no) +
                        ": expected \"<Label> <start> <end>\"");
    const auto label = parse_entity_label(parts[0]);
    if (!label)
      throw FormatError("ann line " + std::to_string(line_no) +
                        ": unknown entity label \"" + parts[0] + "\"");
    BratAnnotation a;
    a.ann_id = fields[0];
    a.label = *label;
    a.char_start = detail::parse_offset(parts[1], line_no);
    a.char_end = detail::parse_offset(parts[2], line_no);
    a.surface = fields[2];
    if (a.char_start >= a.char_end ||
        a.char_end > static_cast<int>(doc.source_text.size()))
      throw FormatError("ann line " + std::to_string(line_no) +
                        ": offsets [" + std::to_string(a.char_start) + "," +
                        std::to_string(a.char_end) + ") outside the text");
    const std::string_view actual =
        std::string_view(doc.source_text)
            .substr(a.char_start, a.char_end - a.char_start);
    if (actual != a.surface)
      throw FormatError("ann line " + std::to_string(line_no) +
                        ": surface \"" + a.surface +
                        "\" does not match text \"" + std::string(actual) +
                        "\"");
    doc.annotations.push_back(std::move(a));
  }
  return doc;
}

// Reads a BRAT .txt/.ann pair. Each line of the text file becomes one
// sentence (tokenized with tokenize_text); character spans are mapped to the
// minimal covering token range, with a finding when a span boundary falls
// strictly inside a token. Entities are returned as annotated - possibly
// nested; run resolve_nesting before BIO conversion.
inline std::vector<Sentence> read_brat(std::string_view txt,
                                       std::string_view ann,
                                       const std::string& doc_id,
                                       std::vector<std::string>* findings =
                                           nullptr) {
  const BratDocument doc = parse_brat_annotations(txt, ann, doc_id, findings);

  struct Line {
    int begin = 0;  // global offsets of the line, excluding '\n'
    int end = 0;
    int sentence = -1;  // index into out, -1 if the line had no tokens
  };
  std::vector<Line> lines;
  std::vector<Sentence> out;
  {
    int pos = 0;
    const std::string& text = doc.source_text;
    while (pos <= static_cast<int>(text.size())) {
      std::size_t nl = text.find('\n', pos);
      const int end = nl == std::string::npos ? static_cast<int>(text.size())
                                              : static_cast<int>(nl);
      if (pos == static_cast<int>(text.size()) && pos == end && !lines.empty())
        break;
      Line line{pos, end, -1};
      auto tokens = tokenize_text(
          std::string_view(text).substr(pos, end - pos));
      if (!tokens.empty()) {
        Sentence s;
        s.doc_id = doc_id;
        s.sent_id = std::to_string(out.size());
        s.tokens = std::move(tokens);
        line.sentence = static_cast<int>(out.size());
        out.push_back(std::move(s));
      }
      lines.push_back(line);
      if (nl == std::string::npos) break;
      pos = end + 1;
    }
  }

  for (const auto& a : doc.annotations) {
    const Line* home = nullptr;
    for (const auto& line : lines) {
      if (a.char_start >= line.begin && a.char_start < line.end) {
        home = &line;
        break;
      }
    }
    if (home == nullptr || home->sentence < 0)
      throw FormatError("annotation " + a.ann_id +
                        ": span does not start inside any sentence");
    if (a.char_end > home->end)
      throw FormatError("annotation " + a.ann_id +
                        ": span crosses a sentence boundary");
    Sentence& s = out[home->sentence];
    const int ls = a.char_start - home->begin;
    const int le = a.char_end - home->begin;
    int first = -1, last = -1;
    for (const auto& t : s.tokens) {
      if (t.char_end > ls && t.char_start < le) {
        if (first < 0) first = t.index;
        last = t.index;
      }
    }
    if (first < 0)
      throw FormatError("annotation " + a.ann_id +
                        ": span covers no tokens");
    if (findings) {
      if (s.tokens[first].char_start < ls)
        findings->push_back("annotation " + a.ann_id +
                            ": start offset falls inside token \"" +
                            s.tokens[first].text + "\"");
      if (s.tokens[last].char_end > le)
        findings->push_back("annotation " + a.ann_id +
                            ": end offset falls inside token \"" +
                            s.tokens[last].text + "\"");
    }
    s.entities.push_back({first, last + 1, a.label});
  }
  for (auto& s : out) std::sort(s.entities.begin(), s.entities.end());
  return out;
}

// Serializes sentences to a canonical BRAT pair: one sentence per line,
// tokens joined by single spaces, annotations in sentence order.
inline BratFiles write_brat(const std::vector<Sentence>& sentences) {
  BratFiles files;
  int next_id = 1;
  int offset = 0;
  for (const auto& s : sentences) {
    std::string line;
    std::vector<std::pair<int, int>> local(s.tokens.size());
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (i > 0) line += ' ';
      local[i] = {static_cast<int>(line.size()),
                  static_cast<int>(line.size() + s.tokens[i].text.size())};
      line += s.tokens[i].text;
    }
    for (const auto& e : s.entities) {
      if (e.start < 0 || e.end > s.size() || e.start >= e.end)
        throw InvalidInput("write_brat: span out of range in " + s.doc_id +
                           "/" + s.sent_id);
      const int cs = offset + local[e.start].first;
      const int ce = offset + local[e.end - 1].second;
      files.ann += "T" + std::to_string(next_id++) + "\t" +
                   std::string(to_string(e.label)) + " " + std::to_string(cs) +
                   " " + std::to_string(ce) + "\t" +
                   line.substr(local[e.start].first,
                               local[e.end - 1].second - local[e.start].first) +
                   "\n";
    }
    files.txt += line + "\n";
    offset += static_cast<int>(line.size()) + 1;
  }
  return files;
}

// ---------------------------------------------------------------------------
// CoNLL column files

enum class ConllLayout : int { TokenTag = 2, TokenPosTag = 3 };

inline Corpus read_conll(std::string_view content,
                         const std::string& source_name = "conll",
                         int* repairs = nullptr,
                         std::vector<std::string>* findings = nullptr) {
  Corpus corpus;
  std::set<std::pair<std::string, std::string>> keys;

  std::string sticky_doc;
  std::optional<std::string> pending_sent;
  std::vector<std::string> texts, pos, tag_texts;
  int column_count = 0;
  int auto_index = 0;
  int line_no = 0;

  auto finalize = [&]() {
    if (texts.empty()) return;
    std::vector<BioTag> tags;
    tags.reserve(tag_texts.size());
    for (const auto& t : tag_texts) tags.push_back(*parse_bio_tag(t));
    Sentence s = sentence_from_tokens(
        sticky_doc.empty() ? source_name : sticky_doc,
        pending_sent ? *pending_sent : std::to_string(auto_index), texts, {},
        column_count == 3 ? pos : std::vector<std::string>{});
    s.entities = from_bio(s.tokens, tags, repairs);
    if (!keys.insert({s.doc_id, s.sent_id}).second)
      throw FormatError("duplicate sentence key " + s.doc_id + "/" + s.sent_id);
    corpus.sentences.push_back(std::move(s));
    texts.clear();
    pos.clear();
    tag_texts.clear();
    pending_sent.reset();
    ++auto_index;
  };

  for (const std::string& line : detail::split_lines(content)) {
    ++line_no;
    if (line.empty()) {
      finalize();
      continue;
    }
    if (line[0] == '#' && line.find('\t') == std::string::npos) {
      const auto eq = line.find('=');
      const std::string key = eq == std::string::npos ? "" : line.substr(1, eq - 1);
      if (key == "doc") {
        sticky_doc = line.substr(eq + 1);
      } else if (key == "sent") {
        pending_sent = line.substr(eq + 1);
      } else if (findings) {
        findings->push_back("line " + std::to_string(line_no) +
                            ": ignored comment");
      }
      continue;
    }
    const auto cols = detail::split_whitespace(line);
    if (column_count == 0) {
      if (cols.size() != 2 && cols.size() != 3)
        throw FormatError("line " + std::to_string(line_no) + ": expected 2 or 3 columns, got " +
                          std::to_string(cols.size()));
      column_count = static_cast<int>(cols.size());
    } else if (static_cast<int>(cols.size()) != column_count) {
      throw FormatError("line " + std::to_string(line_no) +
                        ": inconsistent column count (" +
                        std::to_string(cols.size()) + " vs " +
                        std::to_string(column_count) + ")");
    }
    const std::string& tag_text = cols.back();
    if (!parse_bio_tag(tag_text))
      throw FormatError("line " + std::to_string(line_no) + ": unknown tag \"" +
                        tag_text + "\"");
    texts.push_back(cols[0]);
    if (column_count == 3) pos.push_back(cols[1]);
    tag_texts.push_back(tag_text);
  }
  finalize();
  return corpus;
}

// Writes the canonical CoNLL rendering: per-sentence #doc/#sent comments,
// TAB-separated columns, blank line after every sentence. Reading the
// output back and re-writing it reproduces the bytes exactly.
inline std::string write_conll(const Corpus& corpus,
                               ConllLayout layout = ConllLayout::TokenTag) {
  std::string out;
  for (const auto& s : corpus.sentences) {
    const auto tags = to_bio(s);
    out += "#doc=" + s.doc_id + "\n";
    out += "#sent=" + s.sent_id + "\n";
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const Token& t = s.tokens[i];
      if (t.text.empty() ||
          std::any_of(t.text.begin(), t.text.end(), detail::is_space))
        throw InvalidInput("write_conll: token text unusable in a column file");
      out += t.text;
      if (layout == ConllLayout::TokenPosTag) {
        if (!t.has_pos())
          throw InvalidInput("write_conll: 3-column layout but token \"" +
                             t.text + "\" has no POS (" + s.doc_id + "/" +
                             s.sent_id + ")");
        if (std::any_of(t.pos.begin(), t.pos.end(), detail::is_space))
          throw InvalidInput("write_conll: POS tag contains whitespace");
        out += '\t';
        out += t.pos;
      }
      out += '\t';
      out += to_string(tags[i]);
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

// True when every token of every sentence carries a POS tag (and the corpus
// is non-empty), i.e. the 3-column layout is representable.
inline bool corpus_has_full_pos(const Corpus& corpus) {
  bool any = false;
  for (const auto& s : corpus.sentences)
    for (const auto& t : s.tokens) {
      if (!t.has_pos()) return false;
      any = true;
    }
  return any;
}

}  // namespace tdm
