// fst_io.cc
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

#include "ctcbias/fst_io.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ctcbias/errors.h"
#include "ctcbias/text_util.h"

namespace ctcbias {
namespace {

std::string LabelText(Label label, const Wfst::SymbolsPtr& syms) {
  return syms ? syms->Symbol(label) : std::to_string(label);
}

Label ParseLabel(const std::string& text, const Wfst::SymbolsPtr& syms) {
  if (!syms) return static_cast<Label>(ParseInt(text));
  Label id = syms->Find(text);
  if (id == kNoLabel) throw Error(ErrorKind::kIo, "unknown symbol: " + text);
  return id;
}

void WriteState(const Wfst& fst, StateId s, std::ostream& out) {
  for (const Arc& arc : fst.Arcs(s)) {
    out << s << '\t' << arc.nextstate << '\t'
        << LabelText(arc.ilabel, fst.InputSymbols()) << '\t'
        << LabelText(arc.olabel, fst.OutputSymbols()) << '\t'
        << FormatWeight(arc.weight.Value()) << '\n';
  }
  if (fst.IsFinal(s)) {
    out << s << '\t' << FormatWeight(fst.Final(s).Value()) << '\n';
  }
}

}  // namespace

void WriteFstText(const Wfst& fst, std::ostream& out) {
  if (fst.Empty()) return;
  const StateId start = fst.Start();
  if (fst.NumArcs(start) == 0 && !fst.IsFinal(start)) {
    // A lone non-final start would otherwise be invisible.
    out << start << '\t' << FormatWeight(Weight::Zero().Value()) << '\n';
  }
  WriteState(fst, start, out);
  for (size_t s = 0; s < fst.NumStates(); ++s) {
    if (static_cast<StateId>(s) != start) {
      WriteState(fst, static_cast<StateId>(s), out);
    }
  }
}

std::string FstToText(const Wfst& fst) {
  std::ostringstream out;
  WriteFstText(fst, out);
  return out.str();
}

Wfst ReadFstText(std::istream& in, Wfst::SymbolsPtr isyms,
                 Wfst::SymbolsPtr osyms) {
  Wfst fst(isyms, osyms);
  auto ensure = [&](StateId s) {
    if (s < 0) throw Error(ErrorKind::kIo, "negative state id");
    while (fst.NumStates() <= static_cast<size_t>(s)) fst.AddState();
  };
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = SplitTabs(line);
    StateId src = static_cast<StateId>(ParseInt(fields[0]));
    ensure(src);
    if (fst.Start() == kNoState) fst.SetStart(src);
    if (fields.size() == 1 || fields.size() == 2) {
      double w = fields.size() == 2 ? ParseDouble(fields[1]) : 0.0;
      if (!std::isinf(w)) fst.SetFinal(src, Weight(w));
    } else if (fields.size() == 4 || fields.size() == 5) {
      StateId dst = static_cast<StateId>(ParseInt(fields[1]));
      ensure(dst);
      Label il = ParseLabel(fields[2], isyms);
      Label ol = ParseLabel(fields[3], osyms);
      double w = fields.size() == 5 ? ParseDouble(fields[4]) : 0.0;
      fst.AddArc(src, Arc(il, ol, Weight(w), dst));
    } else {
      throw Error(ErrorKind::kIo, "bad FST line " + std::to_string(line_no) +
                                      ": " + line);
    }
  }
  return fst;
}

Wfst FstFromText(const std::string& text, Wfst::SymbolsPtr isyms,
                 Wfst::SymbolsPtr osyms) {
  std::istringstream in(text);
  return ReadFstText(in, std::move(isyms), std::move(osyms));
}

void WriteFstFile(const Wfst& fst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  WriteFstText(fst, out);
}

Wfst ReadFstFile(const std::string& path, Wfst::SymbolsPtr isyms,
                 Wfst::SymbolsPtr osyms) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return ReadFstText(in, std::move(isyms), std::move(osyms));
}

}  // namespace ctcbias
