// ctcbias/corpus.h
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

#ifndef CTCBIAS_CORPUS_H_
#define CTCBIAS_CORPUS_H_

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace ctcbias {

/// An entity occurrence: words [begin, end) of the utterance text.
struct EntitySpan {
  std::string cls;
  std::string surface;
  size_t begin = 0;
  size_t end = 0;
};

struct Utterance {
  std::string id;
  std::vector<std::string> words;
  std::vector<EntitySpan> entities;
  std::string user;                  // owner of the entity lists; may be empty
  std::vector<std::string> planted;  // pieces the emissions were planted from

  // Subset A holds the utterances with at least one entity.
  bool InSubsetA() const { return !entities.empty(); }
  std::string Text() const;
};

struct Corpus {
  std::vector<Utterance> utterances;
  // user -> class -> entities
  std::map<std::string, std::map<std::string, std::vector<std::string>>>
      user_entities;
};

// Checks spans against the words (in range, non-empty, surface equal to the
// spanned words) and ids for uniqueness; throws ConfigError.
void ValidateCorpus(const Corpus& corpus);

// One JSON object per line:
//   {"id", "text", "entities": [{"class", "surface", "span": [b, e]}],
//    optional "user", optional "planted": [piece, ...]}
std::vector<Utterance> ReadUtterancesJsonl(std::istream& in);
void WriteUtterancesJsonl(const std::vector<Utterance>& utts,
                          std::ostream& out);

// Corpus directory layout: corpus.jsonl plus users.json
// ({user: {class: [entity, ...]}}).
Corpus ReadCorpusDir(const std::string& dir);
void WriteCorpusDir(const Corpus& corpus, const std::string& dir);

}  // namespace ctcbias

#endif  // CTCBIAS_CORPUS_H_
