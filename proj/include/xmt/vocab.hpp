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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xmt/corpus.hpp"

namespace xmt {

using TokenId = std::int32_t;

/// Fixed low ids, then a reserved block of language-id slots. Spare slots
/// exist so languages that only show up at fine-tuning time can still get
/// an id without renumbering anything.
struct SpecialTokens {
  TokenId pad = 0;
  TokenId unk = 1;
  TokenId bos = 2;
  TokenId eos = 3;  // the </S> sentence separator
  TokenId mask = 4;
  TokenId lid_base = 5;
  int lid_capacity = 0;
  std::map<LanguageCode, TokenId> lid;

  int count() const { return 5 + lid_capacity; }
  bool is_lid(TokenId id) const {
    return id >= lid_base && id < lid_base + lid_capacity;
  }
};

/// Shared byte-level BPE vocabulary. Word boundaries are encoded with a
/// visible marker (U+2581) prepended to the text and substituted for every
/// space, so decode(encode(s)) == s for any text not containing the marker
/// itself. The 256 single bytes plus the marker form the base alphabet, so
/// raw text never encodes to <unk>.
class Vocabulary {
 public:
  static constexpr std::string_view kBoundary = "\xe2\x96\x81";  // U+2581

  /// Deterministic BPE training: highest pair frequency first, ties broken
  /// lexicographically on (left, right) token strings. Merges never cross
  /// word boundaries. `seed` is accepted for interface stability but the
  /// trainer is fully deterministic and does not consume it.
  static Vocabulary train(const CorpusCollection& collection, int target_size,
                          int spare_lids, std::uint64_t seed);

  std::vector<TokenId> encode(std::string_view text) const;

  /// Rendering for debug output: specials appear as visible sentinels
  /// ("<mask>", "[en]", "</S>"), raw subwords concatenate losslessly.
  std::string decode(std::span<const TokenId> ids) const;

  /// Plain-text rendering: specials are skipped, boundary markers become
  /// spaces. Inverse of encode() on special-free sequences.
  std::string decode_text(std::span<const TokenId> ids) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  const SpecialTokens& specials() const { return specials_; }
  const std::string& token_string(TokenId id) const;

  TokenId lid(const LanguageCode& lang) const;
  bool has_lid(const LanguageCode& lang) const;
  /// Returns the existing id or assigns the next spare slot.
  TokenId ensure_lid(const LanguageCode& lang);

  bool is_special(TokenId id) const { return id < specials_.count(); }
  /// True iff this token starts a word (its string begins with the marker).
  bool begins_word(TokenId id) const;

  std::size_t count_tokens(const MonolingualCorpus& corpus) const;
  /// Fills token_count on every corpus in the collection.
  void count_tokens(CorpusCollection& collection) const;

  /// Versioned text format; byte-identical across runs for equal inputs.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  Vocabulary() = default;
  void build_specials(const std::vector<LanguageCode>& langs, int spare_lids);
  void rebuild_lookup();
  TokenId byte_token(unsigned char b) const { return byte_base_ + b; }
  TokenId marker_token() const { return byte_base_ + 256; }
  std::vector<TokenId> encode_word(std::string_view word) const;

  SpecialTokens specials_;
  TokenId byte_base_ = 0;  // == specials_.count()
  std::vector<std::string> tokens_;
  std::vector<std::pair<TokenId, TokenId>> merges_;  // rank order
  std::unordered_map<std::uint64_t, TokenId> merge_to_id_;
  std::unordered_map<std::uint64_t, int> merge_rank_;
};

}  // namespace xmt
