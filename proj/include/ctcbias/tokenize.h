// ctcbias/tokenize.h
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

#ifndef CTCBIAS_TOKENIZE_H_
#define CTCBIAS_TOKENIZE_H_

#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ctcbias/ngram.h"
#include "ctcbias/symbol_table.h"
#include "ctcbias/wfst.h"

namespace ctcbias {

// Word-boundary marker carried by word-initial pieces (U+2581).
inline constexpr std::string_view kWordBoundary = "\xE2\x96\x81";

/// Wordpiece inventory plus the CTC label table built from it: epsilon is 0,
/// blank is 1, pieces follow in inventory order.
class WordpieceModel {
 public:
  // Throws ConfigError on empty, duplicate or malformed pieces (a boundary
  // marker anywhere but the front).
  static WordpieceModel FromPieces(const std::vector<std::string>& pieces);
  // One word-initial and one continuation piece per character.
  static WordpieceModel CharacterModel(const std::vector<std::string>& chars);
  // One piece per line; blank lines ignored.
  static WordpieceModel ReadFile(const std::string& path);
  void WriteFile(const std::string& path) const;

  const std::shared_ptr<const SymbolTable>& Symbols() const { return symbols_; }
  Label Blank() const { return symbols_->Blank(); }
  const std::vector<std::string>& Pieces() const { return pieces_; }
  std::vector<Label> PieceIds() const;
  size_t NumPieces() const { return pieces_.size(); }
  bool Contains(const std::string& piece) const {
    return piece_set_.count(piece) > 0;
  }
  Label Id(const std::string& piece) const;

  /// Greedy longest match from the left over the marked word "▁word".
  /// Throws TokenizationError naming the first uncoverable character.
  std::vector<std::string> Tokenize(std::string_view word) const;
  std::vector<Label> TokenizeIds(std::string_view word) const;

 private:
  std::shared_ptr<const SymbolTable> symbols_;
  std::vector<std::string> pieces_;
  std::unordered_set<std::string> piece_set_;
  size_t max_chars_ = 0;
};

struct NormConfig {
  double scale = 0.8;
  double clip = 20.0;
  double blank_cost = -3.0;

  // Documented defaults: blank cost -3 with prior normalization, +3 without.
  static NormConfig Defaults(bool normalize);
  void Validate() const;
};

/// CTC collapse topology. State 0 is the blank/start state; state 1+i is
/// "last emitted piece i". Entering a piece state emits the piece and costs
/// -(scale * min(prior, clip)) when normalizing (else 0); self-loops repeat
/// the piece silently at cost 0; every blank arc costs blank_cost. All
/// states are final.
Wfst BuildT(const WordpieceModel& model, const PriorTable* prior,
            const NormConfig& cfg, bool normalize);

// Class names look like @CONTACT.
bool IsClassName(std::string_view name);
// Output symbol closing a class region, e.g. "</@CONTACT>".
std::string ClassExitSymbol(std::string_view cls);
// Output symbol carrying a raw piece through a class region, e.g. "<wp>▁bo".
std::string PassThroughSymbol(std::string_view piece);
inline constexpr std::string_view kPassThroughPrefix = "<wp>";

/// Lexicon transducer. Output table: epsilon, the words, then per class its
/// entry marker (the class name), exit marker, and one pass-through symbol
/// per piece. Each word maps from its greedy tokenization; each class adds
/// start -ε:@C-> loop (every piece p : <wp>p) -ε:</@C>-> start.
Wfst BuildL(const WordpieceModel& model, const std::vector<std::string>& words,
            const std::vector<std::string>& classes);

// One class name per line; names must match @[A-Z_]+.
std::vector<std::string> ReadClassList(const std::string& path);

}  // namespace ctcbias

#endif  // CTCBIAS_TOKENIZE_H_
