// Copyright 2026 The xmt Authors
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

#include "xmt/vocab.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "xmt/error.hpp"
#include "xmt/text.hpp"

namespace xmt {
namespace {

constexpr int kFixedSpecials = 5;  // pad unk bos eos mask

std::uint64_t pair_key(TokenId a, TokenId b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

/// Marker-transformed text: "a b" -> "<m>a<m>b". Every word (including the
/// first) starts with the boundary marker; runs of spaces survive as bare
/// marker words, so the transform is invertible.
std::string with_boundaries(std::string_view text) {
  std::string out;
  out.reserve(text.size() + 4);
  out += Vocabulary::kBoundary;
  for (char c : text) {
    if (c == ' ')
      out += Vocabulary::kBoundary;
    else
      out += c;
  }
  return out;
}

std::vector<std::string> split_marked_words(std::string_view marked) {
  std::vector<std::string> words;
  std::size_t pos = 0;
  while (pos < marked.size()) {
    std::size_t next = marked.find(Vocabulary::kBoundary,
                                   pos + Vocabulary::kBoundary.size());
    if (next == std::string_view::npos) next = marked.size();
    words.emplace_back(marked.substr(pos, next - pos));
    pos = next;
  }
  return words;
}

std::string escape_token(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (c > 0x20 && c < 0x7f && c != '\\') {
      out += static_cast<char>(c);
    } else {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "\\x%02x", c);
      out += buf;
    }
  }
  return out;
}

std::string unescape_token(std::string_view s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '\\' && i + 3 < s.size() && s[i + 1] == 'x') {
      out += static_cast<char>(
          std::stoi(std::string(s.substr(i + 2, 2)), nullptr, 16));
      i += 4;
    } else {
      out += s[i++];
    }
  }
  return out;
}

}  // namespace

void Vocabulary::build_specials(const std::vector<LanguageCode>& langs,
                                int spare_lids) {
  specials_ = SpecialTokens{};
  specials_.lid_capacity = static_cast<int>(langs.size()) + spare_lids;
  tokens_ = {"<pad>", "<unk>", "<s>", "</S>", "<mask>"};
  for (int i = 0; i < specials_.lid_capacity; ++i) tokens_.push_back("");
  for (std::size_t i = 0; i < langs.size(); ++i) {
    const TokenId id = specials_.lid_base + static_cast<TokenId>(i);
    specials_.lid[langs[i]] = id;
    tokens_[static_cast<std::size_t>(id)] = "[" + langs[i].code + "]";
  }
  byte_base_ = specials_.count();
  for (int b = 0; b < 256; ++b)
    tokens_.push_back(std::string(1, static_cast<char>(b)));
  tokens_.push_back(std::string(kBoundary));
}

Vocabulary Vocabulary::train(const CorpusCollection& collection,
                             int target_size, int spare_lids,
                             std::uint64_t /*seed*/) {
  Vocabulary v;
  std::vector<LanguageCode> langs;
  for (const auto& [lang, corpus] : collection.corpora) langs.push_back(lang);
  v.build_specials(langs, spare_lids);

  const int base_size = v.size();
  if (target_size < base_size)
    throw Error::validation("target vocabulary size " +
                            std::to_string(target_size) +
                            " cannot hold alphabet + specials (" +
                            std::to_string(base_size) + ")");
  const int merge_budget = target_size - base_size;

  // Word-type frequencies over the whole (shared) collection.
  std::map<std::string, std::int64_t> word_freq;
  for (const auto& [lang, corpus] : collection.corpora)
    for (const auto& doc : corpus.documents)
      for (const auto& sentence : doc)
        for (auto& w : split_marked_words(with_boundaries(sentence)))
          ++word_freq[w];

  // Each word type as a symbol sequence over the base alphabet.
  struct Word {
    std::vector<TokenId> symbols;
    std::int64_t freq;
  };
  std::vector<Word> words;
  words.reserve(word_freq.size());
  for (const auto& [text, freq] : word_freq) {
    Word w;
    w.freq = freq;
    std::string_view sv = text;
    if (sv.substr(0, kBoundary.size()) == kBoundary) {
      w.symbols.push_back(v.marker_token());
      sv.remove_prefix(kBoundary.size());
    }
    for (unsigned char c : sv) w.symbols.push_back(v.byte_token(c));
    words.push_back(std::move(w));
  }

  for (int rank = 0; rank < merge_budget; ++rank) {
    std::map<std::pair<TokenId, TokenId>, std::int64_t> pair_freq;
    for (const Word& w : words)
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i)
        pair_freq[{w.symbols[i], w.symbols[i + 1]}] += w.freq;

    // Best pair: max frequency, ties by lexicographic token strings.
    std::optional<std::pair<TokenId, TokenId>> best;
    std::int64_t best_freq = 1;  // a pair must occur at least twice
    for (const auto& [pair, freq] : pair_freq) {
      if (freq < best_freq) continue;
      if (freq == best_freq && best) {
        const auto cur = std::make_pair(v.tokens_[pair.first],
                                        v.tokens_[pair.second]);
        const auto old = std::make_pair(v.tokens_[best->first],
                                        v.tokens_[best->second]);
        if (cur >= old) continue;
      }
      best = pair;
      best_freq = freq;
    }
    if (!best) break;

    const TokenId new_id = static_cast<TokenId>(v.tokens_.size());
    v.tokens_.push_back(v.tokens_[best->first] + v.tokens_[best->second]);
    v.merges_.push_back(*best);
    for (Word& w : words) {
      std::vector<TokenId> merged;
      merged.reserve(w.symbols.size());
      std::size_t i = 0;
      while (i < w.symbols.size()) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == best->first &&
            w.symbols[i + 1] == best->second) {
          merged.push_back(new_id);
          i += 2;
        } else {
          merged.push_back(w.symbols[i++]);
        }
      }
      w.symbols = std::move(merged);
    }
  }

  v.rebuild_lookup();
  return v;
}

void Vocabulary::rebuild_lookup() {
  merge_to_id_.clear();
  merge_rank_.clear();
  TokenId next = byte_base_ + 257;
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto key = pair_key(merges_[r].first, merges_[r].second);
    merge_rank_[key] = static_cast<int>(r);
    merge_to_id_[key] = next++;
  }
}

std::vector<TokenId> Vocabulary::encode_word(std::string_view word) const {
  std::vector<TokenId> syms;
  if (word.substr(0, kBoundary.size()) == kBoundary) {
    syms.push_back(marker_token());
    word.remove_prefix(kBoundary.size());
  }
  for (unsigned char c : word) syms.push_back(byte_token(c));

  // Apply merges lowest rank first until none applies.
  while (syms.size() > 1) {
    int best_rank = INT32_MAX;
    std::size_t best_pos = 0;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = merge_rank_.find(pair_key(syms[i], syms[i + 1]));
      if (it != merge_rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best_pos = i;
      }
    }
    if (best_rank == INT32_MAX) break;
    const TokenId merged =
        merge_to_id_.at(pair_key(syms[best_pos], syms[best_pos + 1]));
    syms[best_pos] = merged;
    syms.erase(syms.begin() + static_cast<std::ptrdiff_t>(best_pos) + 1);
  }
  return syms;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> out;
  if (text.empty()) return out;
  const std::string marked = with_boundaries(text);
  for (const auto& word : split_marked_words(marked)) {
    const auto syms = encode_word(word);
    out.insert(out.end(), syms.begin(), syms.end());
  }
  return out;
}

const std::string& Vocabulary::token_string(TokenId id) const {
  if (id < 0 || id >= size())
    throw Error::validation("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string raw;
  for (TokenId id : ids) {
    const std::string& s = token_string(id);
    if (is_special(id)) {
      raw += s.empty() ? "<lid?>" : s;
    } else {
      raw += s;
    }
  }
  std::string out;
  std::size_t i = 0;
  bool first_boundary = true;
  while (i < raw.size()) {
    if (raw.compare(i, kBoundary.size(), kBoundary) == 0) {
      if (!first_boundary) out += ' ';
      first_boundary = false;
      i += kBoundary.size();
    } else {
      out += raw[i++];
    }
  }
  return out;
}

std::string Vocabulary::decode_text(std::span<const TokenId> ids) const {
  std::vector<TokenId> kept;
  kept.reserve(ids.size());
  for (TokenId id : ids)
    if (!is_special(id)) kept.push_back(id);
  return decode(kept);
}

TokenId Vocabulary::lid(const LanguageCode& lang) const {
  auto it = specials_.lid.find(lang);
  if (it == specials_.lid.end())
    throw Error::validation("no <LID> token for language: " + lang.code);
  return it->second;
}

bool Vocabulary::has_lid(const LanguageCode& lang) const {
  return specials_.lid.count(lang) > 0;
}

TokenId Vocabulary::ensure_lid(const LanguageCode& lang) {
  auto it = specials_.lid.find(lang);
  if (it != specials_.lid.end()) return it->second;
  const int used = static_cast<int>(specials_.lid.size());
  if (used >= specials_.lid_capacity)
    throw Error::validation("no spare <LID> slots left for language: " +
                            lang.code);
  const TokenId id = specials_.lid_base + used;
  specials_.lid[lang] = id;
  tokens_[static_cast<std::size_t>(id)] = "[" + lang.code + "]";
  return id;
}

bool Vocabulary::begins_word(TokenId id) const {
  if (is_special(id)) return false;
  const std::string& s = token_string(id);
  return s.compare(0, kBoundary.size(), kBoundary) == 0;
}

std::size_t Vocabulary::count_tokens(const MonolingualCorpus& corpus) const {
  std::size_t n = 0;
  for (const auto& doc : corpus.documents)
    for (const auto& sentence : doc) n += encode(sentence).size();
  return n;
}

void Vocabulary::count_tokens(CorpusCollection& collection) const {
  for (auto& [lang, corpus] : collection.corpora)
    corpus.token_count = count_tokens(corpus);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << "xmtvocab 1\n";
  out << "size " << size() << "\n";
  out << "lid_capacity " << specials_.lid_capacity << "\n";
  out << "lid";
  for (const auto& [lang, id] : specials_.lid)
    out << " " << lang.code << "=" << id;
  out << "\n";
  out << "merges " << merges_.size() << "\n";
  for (const auto& [a, b] : merges_)
    out << escape_token(tokens_[static_cast<std::size_t>(a)]) << " "
        << escape_token(tokens_[static_cast<std::size_t>(b)]) << "\n";
  write_file(path, out.str());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.size() < 5 || lines[0] != "xmtvocab 1")
    throw Error::config("unrecognized vocabulary file: " + path.string());

  auto field = [&](std::size_t i, const std::string& key) -> std::string {
    const auto parts = split(lines.at(i), ' ');
    if (parts.empty() || parts[0] != key)
      throw Error::config("vocabulary file: expected '" + key + "' line");
    return lines[i].substr(key.size() + 1);
  };

  const int stated_size = std::stoi(field(1, "size"));
  const int lid_capacity = std::stoi(field(2, "lid_capacity"));

  Vocabulary v;
  v.specials_ = SpecialTokens{};
  v.specials_.lid_capacity = lid_capacity;
  v.tokens_ = {"<pad>", "<unk>", "<s>", "</S>", "<mask>"};
  for (int i = 0; i < lid_capacity; ++i) v.tokens_.push_back("");
  for (const auto& entry : split_whitespace(field(3, "lid"))) {
    const auto kv = split(entry, '=');
    if (kv.size() != 2) throw Error::config("bad lid entry: " + entry);
    LanguageCode lang(kv[0]);
    const TokenId id = std::stoi(kv[1]);
    v.specials_.lid[lang] = id;
    v.tokens_[static_cast<std::size_t>(id)] = "[" + lang.code + "]";
  }
  v.byte_base_ = v.specials_.count();
  for (int b = 0; b < 256; ++b)
    v.tokens_.push_back(std::string(1, static_cast<char>(b)));
  v.tokens_.push_back(std::string(kBoundary));

  const int n_merges = std::stoi(field(4, "merges"));
  std::unordered_map<std::string, TokenId> by_string;
  for (TokenId id = 0; id < static_cast<TokenId>(v.tokens_.size()); ++id)
    if (!v.is_special(id)) by_string[v.tokens_[id]] = id;
  for (int i = 0; i < n_merges; ++i) {
    const auto parts = split(lines.at(5 + static_cast<std::size_t>(i)), ' ');
    if (parts.size() != 2)
      throw Error::config("bad merge line in vocabulary file");
    const std::string left = unescape_token(parts[0]);
    const std::string right = unescape_token(parts[1]);
    auto li = by_string.find(left);
    auto ri = by_string.find(right);
    if (li == by_string.end() || ri == by_string.end())
      throw Error::config("merge references unknown token");
    v.merges_.emplace_back(li->second, ri->second);
    const TokenId id = static_cast<TokenId>(v.tokens_.size());
    v.tokens_.push_back(left + right);
    by_string[left + right] = id;
  }
  if (v.size() != stated_size)
    throw Error::config("vocabulary size mismatch: header says " +
                        std::to_string(stated_size) + ", got " +
                        std::to_string(v.size()));
  v.rebuild_lookup();
  return v;
}

}  // namespace xmt
