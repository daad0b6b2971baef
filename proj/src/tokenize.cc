// tokenize.cc
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

#include "ctcbias/tokenize.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "ctcbias/errors.h"
#include "ctcbias/text_util.h"

namespace ctcbias {

WordpieceModel WordpieceModel::FromPieces(
    const std::vector<std::string>& pieces) {
  if (pieces.empty()) throw ConfigError("wordpiece inventory is empty", "pieces");
  WordpieceModel model;
  auto symbols = std::make_shared<SymbolTable>();
  symbols->AddSymbol(kBlankSymbol);
  for (const std::string& piece : pieces) {
    if (piece.empty()) throw ConfigError("empty wordpiece", "pieces");
    if (piece == kEpsilonSymbol || piece == kBlankSymbol) {
      throw ConfigError("reserved symbol used as wordpiece: " + piece,
                        "pieces");
    }
    auto chars = Utf8Chars(piece);
    for (size_t i = 1; i < chars.size(); ++i) {
      if (chars[i] == kWordBoundary) {
        throw ConfigError("boundary marker inside wordpiece: " + piece,
                          "pieces");
      }
    }
    if (!model.piece_set_.insert(piece).second) {
      throw ConfigError("duplicate wordpiece: " + piece, "pieces");
    }
    model.pieces_.push_back(piece);
    symbols->AddSymbol(piece);
    model.max_chars_ = std::max(model.max_chars_, chars.size());
  }
  model.symbols_ = std::move(symbols);
  return model;
}

WordpieceModel WordpieceModel::CharacterModel(
    const std::vector<std::string>& chars) {
  std::set<std::string> unique(chars.begin(), chars.end());
  std::vector<std::string> pieces;
  for (const auto& c : unique) {
    if (Utf8Chars(c).size() != 1) {
      throw ConfigError("not a single character: " + c, "chars");
    }
    pieces.push_back(std::string(kWordBoundary) + c);
  }
  for (const auto& c : unique) pieces.push_back(c);
  return FromPieces(pieces);
}

WordpieceModel WordpieceModel::ReadFile(const std::string& path) {
  std::vector<std::string> pieces;
  for (const std::string& line : ReadLines(path)) {
    std::string piece = NormalizeWhitespace(line);
    if (!piece.empty()) pieces.push_back(piece);
  }
  return FromPieces(pieces);
}

void WordpieceModel::WriteFile(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  for (const auto& p : pieces_) out << p << '\n';
}

std::vector<Label> WordpieceModel::PieceIds() const {
  std::vector<Label> ids;
  for (const auto& p : pieces_) ids.push_back(symbols_->Find(p));
  return ids;
}

Label WordpieceModel::Id(const std::string& piece) const {
  Label id = piece_set_.count(piece) ? symbols_->Find(piece) : kNoLabel;
  if (id == kNoLabel) {
    throw ConfigError("unknown wordpiece: " + piece, "piece");
  }
  return id;
}

std::vector<std::string> WordpieceModel::Tokenize(std::string_view word) const {
  if (word.empty()) {
    throw Error(ErrorKind::kPrecondition, "cannot tokenize an empty word");
  }
  std::vector<std::string> chars = Utf8Chars(word);
  chars.insert(chars.begin(), std::string(kWordBoundary));
  std::vector<std::string> out;
  size_t i = 0;
  while (i < chars.size()) {
    size_t best = 0;
    std::string candidate;
    std::string best_piece;
    size_t limit = std::min(max_chars_, chars.size() - i);
    for (size_t len = 1; len <= limit; ++len) {
      candidate += chars[i + len - 1];
      if (piece_set_.count(candidate)) {
        best = len;
        best_piece = candidate;
      }
    }
    if (best == 0) {
      const std::string& bad = i == 0 && chars.size() > 1 ? chars[1] : chars[i];
      throw TokenizationError(
          "no wordpiece covers '" + bad + "' in word '" + std::string(word) +
              "'",
          bad);
    }
    out.push_back(std::move(best_piece));
    i += best;
  }
  return out;
}

std::vector<Label> WordpieceModel::TokenizeIds(std::string_view word) const {
  std::vector<Label> ids;
  for (const auto& p : Tokenize(word)) ids.push_back(symbols_->Find(p));
  return ids;
}

NormConfig NormConfig::Defaults(bool normalize) {
  NormConfig cfg;
  cfg.blank_cost = normalize ? -3.0 : 3.0;
  return cfg;
}

void NormConfig::Validate() const {
  if (!std::isfinite(scale) || scale < 0.0) {
    throw ConfigError("norm scale must be finite and >= 0", "norm.scale");
  }
  if (!std::isfinite(clip) || clip < 0.0) {
    throw ConfigError("norm clip must be finite and >= 0", "norm.clip");
  }
  if (!std::isfinite(blank_cost)) {
    throw ConfigError("blank cost must be finite", "norm.blank_cost");
  }
}

Wfst BuildT(const WordpieceModel& model, const PriorTable* prior,
            const NormConfig& cfg, bool normalize) {
  cfg.Validate();
  const auto& pieces = model.Pieces();
  std::vector<double> entry(pieces.size(), 0.0);
  if (normalize) {
    if (!prior) throw ConfigError("normalization needs a prior", "prior");
    for (size_t i = 0; i < pieces.size(); ++i) {
      if (!prior->Contains(pieces[i])) {
        throw ConfigError("prior has no entry for piece " + pieces[i],
                          "prior");
      }
      entry[i] = -(cfg.scale * std::min(prior->Cost(pieces[i]), cfg.clip));
    }
  }
  const std::vector<Label> ids = model.PieceIds();
  const Label blank = model.Blank();
  Wfst t(model.Symbols(), model.Symbols());
  t.ReserveStates(pieces.size() + 1);
  for (size_t s = 0; s <= pieces.size(); ++s) {
    t.AddState();
    t.SetFinal(static_cast<StateId>(s), Weight::One());
  }
  t.SetStart(0);
  for (size_t s = 0; s <= pieces.size(); ++s) {
    const auto src = static_cast<StateId>(s);
    t.AddArc(src, Arc(blank, kEpsilon, Weight(cfg.blank_cost), 0));
    for (size_t i = 0; i < pieces.size(); ++i) {
      const auto dst = static_cast<StateId>(i + 1);
      if (dst == src) {
        t.AddArc(src, Arc(ids[i], kEpsilon, Weight::One(), dst));
      } else {
        t.AddArc(src, Arc(ids[i], ids[i], Weight(entry[i]), dst));
      }
    }
  }
  ArcSort(&t);
  return t;
}

bool IsClassName(std::string_view name) {
  if (name.size() < 2 || name[0] != '@') return false;
  return std::all_of(name.begin() + 1, name.end(),
                     [](char c) { return (c >= 'A' && c <= 'Z') || c == '_'; });
}

std::string ClassExitSymbol(std::string_view cls) {
  return "</" + std::string(cls) + ">";
}

std::string PassThroughSymbol(std::string_view piece) {
  return std::string(kPassThroughPrefix) + std::string(piece);
}

Wfst BuildL(const WordpieceModel& model, const std::vector<std::string>& words,
            const std::vector<std::string>& classes) {
  auto osyms = std::make_shared<SymbolTable>();
  std::vector<std::string> lexicon;
  for (const std::string& w : words) {
    if (w.empty() || IsClassName(w) || w == kBos || w == kEos || w == kUnk ||
        w == kEpsilonSymbol) {
      continue;
    }
    if (osyms->Contains(w)) continue;
    osyms->AddSymbol(w);
    lexicon.push_back(w);
  }
  for (const std::string& c : classes) {
    if (!IsClassName(c)) {
      throw ConfigError("bad class name: " + c, "classes");
    }
    if (osyms->Contains(c)) throw ConfigError("duplicate class " + c, "classes");
    osyms->AddSymbol(c);
    osyms->AddSymbol(ClassExitSymbol(c));
  }
  if (!classes.empty()) {
    for (const auto& p : model.Pieces()) osyms->AddSymbol(PassThroughSymbol(p));
  }

  Wfst l(model.Symbols(), osyms);
  const StateId start = l.AddState();
  l.SetStart(start);
  l.SetFinal(start, Weight::One());
  for (const std::string& w : lexicon) {
    std::vector<Label> pieces = model.TokenizeIds(w);
    const Label out = osyms->Find(w);
    StateId cur = start;
    for (size_t i = 0; i < pieces.size(); ++i) {
      StateId next = i + 1 == pieces.size() ? start : l.AddState();
      l.AddArc(cur, Arc(pieces[i], i == 0 ? out : kEpsilon, Weight::One(),
                        next));
      cur = next;
    }
  }
  for (const std::string& c : classes) {
    const StateId loop = l.AddState();
    l.AddArc(start, Arc(kEpsilon, osyms->Find(c), Weight::One(), loop));
    for (const auto& p : model.Pieces()) {
      l.AddArc(loop, Arc(model.Id(p), osyms->Find(PassThroughSymbol(p)),
                         Weight::One(), loop));
    }
    l.AddArc(loop, Arc(kEpsilon, osyms->Find(ClassExitSymbol(c)),
                       Weight::One(), start));
  }
  ArcSort(&l);
  return l;
}

std::vector<std::string> ReadClassList(const std::string& path) {
  std::vector<std::string> classes;
  for (const std::string& line : ReadLines(path)) {
    std::string name = NormalizeWhitespace(line);
    if (name.empty()) continue;
    if (!IsClassName(name)) {
      throw ConfigError("class names must match @[A-Z_]+: " + name, "classes");
    }
    classes.push_back(name);
  }
  return classes;
}

}  // namespace ctcbias
