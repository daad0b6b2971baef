// ctcbias/biasing.h
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

#ifndef CTCBIAS_BIASING_H_
#define CTCBIAS_BIASING_H_

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ctcbias/jointseq.h"
#include "ctcbias/tokenize.h"
#include "ctcbias/wfst.h"

namespace ctcbias {

using Pronunciation = std::vector<std::string>;
using Tokenization = std::vector<std::string>;

/// Lowercased word -> pronunciations, in file order.
using Lexicon = std::map<std::string, std::vector<Pronunciation>>;

// TSV `word<TAB>phone phone ...`; one line per pronunciation. Words are
// lowercased; duplicate pronunciations are dropped.
Lexicon ReadLexicon(std::istream& in);
Lexicon ReadLexiconFile(const std::string& path);
void WriteLexicon(const Lexicon& lexicon, std::ostream& out);

/// A class's entities, whitespace-normalized and sorted; case is preserved.
struct EntityList {
  std::string cls;
  std::vector<std::string> entities;

  // Throws ConfigError when empty or when two entries normalize equally.
  static EntityList Make(std::string cls,
                         const std::vector<std::string>& entities);
  size_t Size() const { return entities.size(); }
};

// JSON object {class name -> [entity, ...]}; classes in name order.
std::vector<EntityList> ReadEntityListsJson(std::istream& in);
std::vector<EntityList> ReadEntityListsJsonFile(const std::string& path);
void WriteEntityListsJson(const std::vector<EntityList>& lists,
                          std::ostream& out);

/// Uniform acceptor over the entity word sequences; each path costs ln N_c.
/// The word table holds epsilon then the distinct entity words, sorted.
Wfst BuildGc(const EntityList& entities);

/// Maps a pronunciation to at most `n` wordpiece sequences, best first.
using PronTokenizer = std::function<std::vector<Tokenization>(
    const Pronunciation& pron, size_t n)>;

// N-best through a phone-to-wordpiece joint model; uncoverable
// pronunciations yield no sequences.
PronTokenizer JointTokenizer(const JointModel& p2wp);

struct LcOptions {
  size_t n_pron = 4;   // grapheme-to-phone alternatives for unknown words
  size_t n_tok = 10;   // wordpiece sequences per pronunciation
};

struct LcResult {
  Wfst fst;
  // Distinct tokenizations per entity word, orthographic first.
  std::map<std::string, std::vector<Tokenization>> word_tokenizations;
  size_t warnings = 0;
  std::vector<std::string> messages;
};

/// Wordpiece-to-word transducer over the entity words (a closure of one
/// zero-cost chain per distinct tokenization, word emitted on the first
/// piece). Every word gets its orthographic tokenization (lowercased); with a
/// pronunciation tokenizer it additionally gets the n_tok best sequences of
/// each pronunciation, taken from the lexicon or, for unknown words, from the
/// n_pron best grapheme-to-phone outputs. Words without any pronunciation
/// source are counted as warnings. `tokenizer` and `g2p` may be null.
LcResult BuildLc(const EntityList& entities, const WordpieceModel& wp,
                 const PronTokenizer* tokenizer, const Lexicon& lexicon,
                 const JointModel* g2p, const LcOptions& options);

/// Per-class contextual FST over wordpieces emitting entity words.
struct BiasFst {
  std::string cls;
  Wfst fst;  // pair-deterministic, minimal
  size_t num_entities = 0;
  // Entity -> per-word tokenization alternatives; the entity's accepted
  // sequences are the concatenations.
  std::map<std::string, std::vector<std::vector<Tokenization>>> provenance;
  size_t warnings = 0;
};

/// Compose, remove epsilons, determinize and minimize L_c with G_c.
Wfst BuildBias(const Wfst& lc, const Wfst& gc);

// Full per-class pipeline: BuildGc, BuildLc, BuildBias plus provenance.
BiasFst MakeBiasFst(const EntityList& entities, const WordpieceModel& wp,
                    const PronTokenizer* tokenizer, const Lexicon& lexicon,
                    const JointModel* g2p, const LcOptions& options);

/// Phone-to-wordpiece transducer of the prior lexicon-based approach: maps
/// any sequence of lexicon pronunciations to the orthographic tokenizations
/// of the corresponding words. Throws ConfigError for an empty lexicon.
Wfst BuildLgBaseline(const Lexicon& lexicon, const WordpieceModel& wp);

// N-best through the lexicon-based transducer; pronunciations it cannot
// consume yield no sequences.
PronTokenizer LgTokenizer(const Wfst& lg);

// Bias FST files: AT&T text with symbolic labels at `path`, the word table
// at `path` + ".syms". Provenance is not persisted.
void WriteBiasFstFile(const BiasFst& bias, const std::string& path);
BiasFst ReadBiasFstFile(const std::string& path, const std::string& cls,
                        const WordpieceModel& wp);

}  // namespace ctcbias

#endif  // CTCBIAS_BIASING_H_
