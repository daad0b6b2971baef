// ctcbias/simulate.h
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

// Synthetic stand-in for a neural CTC acoustic model and for evaluation
// data: a small artificial language (phones, spelling rules, lexicon, LM
// text), an acoustic realization of pronunciations as wordpieces, emission
// synthesis with confusion noise, and corpus generation with personal
// contacts.

#ifndef CTCBIAS_SIMULATE_H_
#define CTCBIAS_SIMULATE_H_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ctcbias/biasing.h"
#include "ctcbias/corpus.h"
#include "ctcbias/decoder.h"
#include "ctcbias/tokenize.h"

namespace ctcbias {

// piece -> piece -> similarity in [0, 1).
using ConfusionMap = std::map<std::string, std::map<std::string, double>>;

struct NoiseConfig {
  uint64_t seed = 0;
  int frames_min = 2;  // frames per planted piece, inclusive range
  int frames_max = 3;
  double blank_prob = 0.3;      // chance of a blank frame after each piece
  double confusion_temp = 0.0;  // amplitude of per-frame score noise
  ConfusionMap confusion_map;   // empty: uniform confusion
  // Score gap (nats) between the planted label and a fully dissimilar one;
  // similarity s shrinks the gap to margin * (1 - s).
  double margin = 8.0;
  // Internal language model of the simulated acoustic model: every
  // non-blank label l loses internal_lm_weight * label_prior[l] per frame,
  // so frequent pieces are favoured (labels absent from the map lose
  // nothing).
  double internal_lm_weight = 0.0;
  std::map<std::string, double> label_prior;  // piece -> prior cost

  void Validate() const;  // throws ConfigError naming the field
};

// Stable 64-bit seed for a keyed sub-stream (e.g. one per utterance id).
uint64_t DeriveSeed(uint64_t base, std::string_view key);

/// Emission matrix for a planted piece sequence. Each piece occupies
/// frames_min..frames_max frames, a blank frame follows with probability
/// blank_prob (always between two identical pieces). A frame planted with
/// label p scores p at 0 and every other label l at
/// -margin * (1 - sim(p, l)) + confusion_temp * z (z standard normal),
/// then every non-blank label l (p included) is shifted by
/// -internal_lm_weight * label_prior[l]; rows are log-softmax normalized and stored as costs. Deterministic in
/// cfg.seed. Throws ConfigError for pieces outside the label table.
EmissionMatrix SynthEmissions(const std::vector<std::string>& plan,
                              const std::shared_ptr<const SymbolTable>& labels,
                              const NoiseConfig& cfg);

/// Spelling system of the synthetic language. Every phone has a regular
/// spelling (the first alternative) and possibly irregular ones, some
/// restricted to word-initial or non-initial position.
struct SpellingRules {
  enum class Position : uint8_t { kAny, kInitial, kNonInitial };
  struct Spelling {
    std::string text;
    Position position = Position::kAny;
  };
  std::vector<std::string> consonants;
  std::vector<std::string> vowels;
  std::map<std::string, std::vector<Spelling>> spellings;

  static SpellingRules Default();
  bool IsVowel(const std::string& phone) const;
  // Concatenated regular spellings; throws ConfigError on unknown phones.
  std::string Regular(const Pronunciation& pron) const;
  // Reads letters back into phones: greedy longest grapheme, each grapheme
  // taking the phone it spells regularly (else its first irregular use).
  Pronunciation Read(std::string_view letters) const;
};

/// What the acoustic model emits for a sound: the wordpiece tokenization of
/// the regular spelling. Total over every phone sequence of the inventory.
class AcousticRealization {
 public:
  AcousticRealization(SpellingRules rules, const WordpieceModel& wp)
      : rules_(std::move(rules)), wp_(&wp) {}
  std::vector<std::string> Realize(const Pronunciation& pron) const;
  const SpellingRules& Rules() const { return rules_; }

 private:
  SpellingRules rules_;
  const WordpieceModel* wp_;
};

/// Phonetic similarity between pieces: pieces are read into phones and
/// compared by edit distance; similarity is max_sim * (1 - d / max_len),
/// halved across word-boundary mismatch, kept when >= min_sim.
ConfusionMap PhoneticConfusions(const WordpieceModel& wp,
                                const SpellingRules& rules,
                                double max_sim = 0.6, double min_sim = 0.25);

// ---------------------------------------------------------------------------
// Synthetic language and desk data.

struct NameWord {
  std::string spelling;  // lowercase
  Pronunciation pron;    // true pronunciation
  bool irregular = false;
  bool in_lexicon = true;  // present in the pronunciation lexicon
  bool first = true;       // first name (else last name)
};

struct WorldSpec {
  uint64_t seed = 1;
  size_t vocab_size = 880;
  size_t first_names = 70;
  size_t last_names = 70;
  double irregular_word_rate = 0.15;
  double irregular_name_rate = 0.7;
  double names_missing_rate = 0.2;  // names absent from the lexicon
  size_t lm_sentences = 4000;
  size_t heldout_sentences = 600;
  size_t carriers = 8;
  double carrier_rate = 0.25;
  size_t pieces = 300;
  std::string cls = "@CONTACT";

  void Validate() const;
};

struct World {
  std::vector<std::string> vocab;  // decoding vocabulary, lowercase
  std::map<std::string, Pronunciation> prons;  // vocabulary pronunciations
  std::map<std::string, double> word_counts;   // counts in the LM text
  std::vector<std::vector<std::string>> lm_text;  // class placeholders kept
  std::vector<std::vector<std::string>> heldout;  // entity-free test text
  std::vector<std::string> templates;  // carrier phrases with "{CONTACT}"
  std::vector<NameWord> names;
  std::vector<std::string> pieces;  // wordpiece inventory
  std::string cls = "@CONTACT";

  // Vocabulary plus in-lexicon names.
  Lexicon PronunciationLexicon() const;
  // Wordpiece-tokenized LM text (placeholders dropped), for the prior.
  std::vector<std::vector<std::string>> PieceCorpus(
      const WordpieceModel& wp) const;
  // word, frequency, phones (outputs filled by tokenization when read).
  std::vector<TrainingPair> P2wpPairs(const WordpieceModel& wp) const;
  // word, 1, letters, phones.
  std::vector<TrainingPair> G2pPairs() const;
};

/// Deterministic in spec.seed. Throws ConfigError on invalid sizes.
World GenerateWorld(const WorldSpec& spec);

// Wordpiece inventory by frequency-weighted pair merging, seeded with every
// character in word-initial and continuation form.
std::vector<std::string> LearnWordpieces(
    const std::map<std::string, double>& word_counts, size_t size);

// Directory layout: vocab.txt, lexicon.tsv, lm_text.txt, heldout.txt,
// templates.txt, names.tsv, wordpieces.txt, word_counts.tsv,
// p2wp_train.tsv, g2p_train.tsv.
void WriteWorldDir(const World& world, const std::string& dir);
World ReadWorldDir(const std::string& dir);

struct CorpusSpec {
  size_t subset_a = 100;
  size_t subset_b = 100;
  size_t contacts = 50;         // distinct mentioned contacts
  size_t users = 5;
  size_t distractors = 10;      // unmentioned contacts per user list
  double mismatch_fraction = 0.7;
  double oov_fraction = 0.2;    // contacts with a name missing from the lexicon
  double two_word_rate = 0.6;   // first + last name
  uint64_t seed = 7;

  void Validate() const;
};

/// Corpus of subset-A utterances (a template with one contact) and subset-B
/// utterances (held-out entity-free sentences), with per-user contact lists
/// and planted pieces: vocabulary words by their tokenization, contact words
/// by the acoustic realization of their true pronunciation. Mismatch and
/// lexicon-missing contact counts are exact (rounded fractions). Throws
/// ConfigError when the inventory cannot satisfy the counts.
Corpus GenCorpus(const CorpusSpec& spec, const World& world,
                 const WordpieceModel& wp, const AcousticRealization& acoustic);

// Contact surface form: capitalized words joined by spaces.
std::string ContactSurface(const std::vector<const NameWord*>& words);

}  // namespace ctcbias

#endif  // CTCBIAS_SIMULATE_H_
