// biasing.cc
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

#include "ctcbias/biasing.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ctcbias/errors.h"
#include "ctcbias/fst_io.h"
#include "ctcbias/fst_ops.h"
#include "ctcbias/text_util.h"

namespace ctcbias {
namespace {

std::shared_ptr<const SymbolTable> EntityWordTable(const EntityList& list) {
  std::set<std::string> words;
  for (const auto& e : list.entities) {
    for (auto& w : SplitWhitespace(e)) words.insert(std::move(w));
  }
  auto table = std::make_shared<SymbolTable>();
  for (const auto& w : words) table->AddSymbol(w);
  return table;
}

// Appends a chain s -p1:out-> ... -pk:eps-> end.
void AddChain(Wfst* fst, StateId from, StateId to,
              const std::vector<Label>& inputs, Label output) {
  StateId s = from;
  for (size_t i = 0; i < inputs.size(); ++i) {
    StateId next = i + 1 == inputs.size() ? to : fst->AddState();
    fst->AddArc(s, Arc(inputs[i], i == 0 ? output : kEpsilon, 0.0, next));
    s = next;
  }
}

void AddUnique(std::vector<Tokenization>* list, Tokenization tok) {
  if (std::find(list->begin(), list->end(), tok) == list->end()) {
    list->push_back(std::move(tok));
  }
}

}  // namespace

Lexicon ReadLexicon(std::istream& in) {
  Lexicon lexicon;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (NormalizeWhitespace(line).empty()) continue;
    auto cols = SplitTabs(line);
    if (cols.size() != 2) {
      throw Error(ErrorKind::kIo, "lexicon line " + std::to_string(line_no) +
                                      ": expected word<TAB>phones");
    }
    std::string word = ToLowerAscii(NormalizeWhitespace(cols[0]));
    Pronunciation pron = SplitWhitespace(cols[1]);
    if (word.empty() || pron.empty()) {
      throw Error(ErrorKind::kIo, "lexicon line " + std::to_string(line_no) +
                                      ": empty word or pronunciation");
    }
    auto& prons = lexicon[word];
    if (std::find(prons.begin(), prons.end(), pron) == prons.end()) {
      prons.push_back(std::move(pron));
    }
  }
  return lexicon;
}

Lexicon ReadLexiconFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return ReadLexicon(in);
}

void WriteLexicon(const Lexicon& lexicon, std::ostream& out) {
  for (const auto& [word, prons] : lexicon) {
    for (const auto& p : prons) out << word << '\t' << Join(p, " ") << '\n';
  }
}

EntityList EntityList::Make(std::string cls,
                            const std::vector<std::string>& entities) {
  if (entities.empty()) {
    throw ConfigError("entity list for " + cls + " is empty", cls);
  }
  EntityList list;
  list.cls = std::move(cls);
  std::set<std::string> seen;
  for (const auto& e : entities) {
    std::string norm = NormalizeWhitespace(e);
    if (norm.empty()) {
      throw ConfigError("empty entity in " + list.cls, list.cls);
    }
    if (!seen.insert(norm).second) {
      throw ConfigError("duplicate entity \"" + norm + "\" in " + list.cls,
                        list.cls);
    }
  }
  list.entities.assign(seen.begin(), seen.end());
  return list;
}

std::vector<EntityList> ReadEntityListsJson(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kIo, std::string("entity lists: ") + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorKind::kIo, "entity lists: expected a JSON object");
  }
  std::vector<EntityList> lists;
  for (const auto& [cls, arr] : doc.items()) {
    if (!IsClassName(cls)) {
      throw ConfigError("invalid class name " + cls, cls);
    }
    if (!arr.is_array()) {
      throw Error(ErrorKind::kIo, "entity lists: " + cls + " is not an array");
    }
    std::vector<std::string> entities;
    for (const auto& v : arr) {
      if (!v.is_string()) {
        throw Error(ErrorKind::kIo, "entity lists: non-string in " + cls);
      }
      entities.push_back(v.get<std::string>());
    }
    lists.push_back(EntityList::Make(cls, entities));
  }
  return lists;
}

std::vector<EntityList> ReadEntityListsJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return ReadEntityListsJson(in);
}

void WriteEntityListsJson(const std::vector<EntityList>& lists,
                          std::ostream& out) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& l : lists) doc[l.cls] = l.entities;
  out << doc.dump(2) << '\n';
}

Wfst BuildGc(const EntityList& entities) {
  if (entities.entities.empty()) {
    throw ConfigError("entity list for " + entities.cls + " is empty",
                      entities.cls);
  }
  auto words = EntityWordTable(entities);
  Wfst g(words, words);
  StateId start = g.AddState();
  g.SetStart(start);
  const double cost = std::log(static_cast<double>(entities.Size()));
  for (const auto& e : entities.entities) {
    StateId s = start;
    auto ws = SplitWhitespace(e);
    for (size_t i = 0; i < ws.size(); ++i) {
      StateId next = g.AddState();
      Label l = words->Find(ws[i]);
      g.AddArc(s, Arc(l, l, i == 0 ? cost : 0.0, next));
      s = next;
    }
    g.SetFinal(s, Weight::One());
  }
  return g;
}

PronTokenizer JointTokenizer(const JointModel& p2wp) {
  return [&p2wp](const Pronunciation& pron, size_t n) {
    std::vector<Tokenization> out;
    for (auto& t : Nbest(p2wp, pron, n)) out.push_back(std::move(t.output));
    return out;
  };
}

LcResult BuildLc(const EntityList& entities, const WordpieceModel& wp,
                 const PronTokenizer* tokenizer, const Lexicon& lexicon,
                 const JointModel* g2p, const LcOptions& options) {
  if (options.n_tok == 0) throw ConfigError("n_tok must be >= 1", "n_tok");
  if (options.n_pron == 0) throw ConfigError("n_pron must be >= 1", "n_pron");
  LcResult result;
  auto words = EntityWordTable(entities);
  for (Label id = 1; id < static_cast<Label>(words->Size()); ++id) {
    const std::string& word = words->Symbol(id);
    const std::string lower = ToLowerAscii(word);
    std::vector<Tokenization> toks{wp.Tokenize(lower)};
    if (tokenizer) {
      std::vector<Pronunciation> prons;
      auto it = lexicon.find(lower);
      if (it != lexicon.end()) {
        prons = it->second;
      } else if (g2p) {
        for (auto& t : Nbest(*g2p, Utf8Chars(lower), options.n_pron)) {
          prons.push_back(std::move(t.output));
        }
        if (prons.empty()) {
          ++result.warnings;
          result.messages.push_back("no G2P pronunciation for " + word);
        }
      } else {
        ++result.warnings;
        result.messages.push_back("no pronunciation source for " + word);
      }
      for (const auto& pron : prons) {
        for (auto& tok : (*tokenizer)(pron, options.n_tok)) {
          bool known = !tok.empty();
          for (const auto& p : tok) known = known && wp.Contains(p);
          if (!known) {
            ++result.warnings;
            result.messages.push_back("dropped tokenization of " + word +
                                      " with unknown pieces");
            continue;
          }
          AddUnique(&toks, std::move(tok));
        }
      }
    }
    result.word_tokenizations[word] = toks;
  }

  Wfst& l = result.fst;
  l = Wfst(wp.Symbols(), words);
  StateId start = l.AddState();
  l.SetStart(start);
  l.SetFinal(start, Weight::One());
  for (const auto& [word, toks] : result.word_tokenizations) {
    Label out = words->Find(word);
    for (const auto& tok : toks) {
      std::vector<Label> ids;
      for (const auto& p : tok) ids.push_back(wp.Id(p));
      AddChain(&l, start, start, ids, out);
    }
  }
  return result;
}

Wfst BuildBias(const Wfst& lc, const Wfst& gc) {
  if (!SameSymbols(lc.OutputSymbols(), gc.InputSymbols())) {
    throw ConfigError("L_c output table differs from G_c input table",
                      "symbols");
  }
  return Minimize(Determinize(RemoveEpsilons(Compose(lc, gc))));
}

BiasFst MakeBiasFst(const EntityList& entities, const WordpieceModel& wp,
                    const PronTokenizer* tokenizer, const Lexicon& lexicon,
                    const JointModel* g2p, const LcOptions& options) {
  BiasFst bias;
  bias.cls = entities.cls;
  bias.num_entities = entities.Size();
  LcResult lc = BuildLc(entities, wp, tokenizer, lexicon, g2p, options);
  bias.fst = BuildBias(lc.fst, BuildGc(entities));
  bias.warnings = lc.warnings;
  for (const auto& e : entities.entities) {
    auto& per_word = bias.provenance[e];
    for (const auto& w : SplitWhitespace(e)) {
      per_word.push_back(lc.word_tokenizations.at(w));
    }
  }
  return bias;
}

Wfst BuildLgBaseline(const Lexicon& lexicon, const WordpieceModel& wp) {
  if (lexicon.empty()) throw ConfigError("lexicon is empty", "lexicon");
  auto phones = std::make_shared<SymbolTable>();
  {
    std::set<std::string> all;
    for (const auto& [w, prons] : lexicon) {
      for (const auto& p : prons) all.insert(p.begin(), p.end());
    }
    for (const auto& p : all) phones->AddSymbol(p);
  }
  auto words = std::make_shared<SymbolTable>();
  for (const auto& [w, prons] : lexicon) words->AddSymbol(w);

  // Pronunciations to words.
  Wfst l(phones, words);
  StateId ls = l.AddState();
  l.SetStart(ls);
  l.SetFinal(ls, Weight::One());
  // Words to their orthographic tokenizations.
  Wfst g(words, wp.Symbols());
  StateId gs = g.AddState();
  g.SetStart(gs);
  g.SetFinal(gs, Weight::One());
  for (const auto& [w, prons] : lexicon) {
    Label wl = words->Find(w);
    for (const auto& p : prons) {
      std::vector<Label> ids;
      for (const auto& ph : p) ids.push_back(phones->Find(ph));
      AddChain(&l, ls, ls, ids, wl);
    }
    auto pieces = wp.TokenizeIds(w);
    StateId s = gs;
    for (size_t i = 0; i < pieces.size(); ++i) {
      StateId next = i + 1 == pieces.size() ? gs : g.AddState();
      g.AddArc(s, Arc(i == 0 ? wl : kEpsilon, pieces[i], 0.0, next));
      s = next;
    }
  }
  Wfst lg = Compose(l, g);
  ArcSort(&lg);
  return lg;
}

PronTokenizer LgTokenizer(const Wfst& lg) {
  return [&lg](const Pronunciation& pron, size_t n) {
    std::vector<Tokenization> out;
    const auto& phones = *lg.InputSymbols();
    std::vector<Label> ids;
    for (const auto& p : pron) {
      Label id = phones.Find(p);
      if (id == kNoLabel) return out;
      ids.push_back(id);
    }
    Wfst paths =
        ProjectOutput(Compose(StringAcceptor(ids, lg.InputSymbols()), lg));
    if (paths.Empty()) return out;
    const auto& syms = *lg.OutputSymbols();
    for (const auto& path : ShortestPaths(Determinize(paths), n)) {
      Tokenization tok;
      for (Label l : path.output) tok.push_back(syms.Symbol(l));
      out.push_back(std::move(tok));
    }
    return out;
  };
}

void WriteBiasFstFile(const BiasFst& bias, const std::string& path) {
  WriteFstFile(bias.fst, path);
  bias.fst.OutputSymbols()->WriteFile(path + ".syms");
}

BiasFst ReadBiasFstFile(const std::string& path, const std::string& cls,
                        const WordpieceModel& wp) {
  auto words =
      std::make_shared<const SymbolTable>(SymbolTable::ReadFile(path + ".syms"));
  BiasFst bias;
  bias.cls = cls;
  bias.fst = ReadFstFile(path, wp.Symbols(), words);
  return bias;
}

}  // namespace ctcbias
