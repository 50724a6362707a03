// augment.hpp
// Entity-mask data augmentation: append, after the original sentences, one
// copy of every entity-bearing sentence with all entity tokens replaced by
// a mask token, keeping spans and labels untouched.

#pragma once

#include <string>
#include <vector>

#include "tdm/corpus.hpp"
#include "tdm/errors.hpp"

namespace tdm {

inline Corpus mask_entities(const Corpus& corpus, const std::string& mask) {
  if (mask.empty()) throw InvalidInput("mask_entities: empty mask token");
  Corpus out;
  out.sentences = corpus.sentences;
  for (const auto& s : corpus.sentences) {
    if (s.entities.empty()) continue;
    Sentence masked = s;
    masked.sent_id += "+mask";
    std::vector<bool> covered(s.tokens.size(), false);
    for (const auto& e : s.entities) {
      if (e.start < 0 || e.end > s.size() || e.start >= e.end)
        throw InvalidInput("mask_entities: span out of range in " + s.doc_id +
                           "/" + s.sent_id);
      for (int i = e.start; i < e.end; ++i) covered[i] = true;
    }
    int offset = 0;
    for (std::size_t i = 0; i < masked.tokens.size(); ++i) {
      Token& t = masked.tokens[i];
      if (covered[i]) {
        t.text = mask;
        t.pos.clear();  // masked tokens lose their POS
      }
      t.char_start = offset;
      t.char_end = offset + static_cast<int>(t.text.size());
      offset = t.char_end + 1;
    }
    out.sentences.push_back(std::move(masked));
  }
  return out;
}

}  // namespace tdm
