// symbol_table.cc
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

#include "ctcbias/symbol_table.h"

#include <fstream>
#include <istream>
#include <ostream>

#include "ctcbias/errors.h"
#include "ctcbias/text_util.h"

namespace ctcbias {

SymbolTable::SymbolTable() { AddSymbol(kEpsilonSymbol); }

Label SymbolTable::AddSymbol(std::string_view symbol) {
  if (symbol.empty()) {
    throw Error(ErrorKind::kPrecondition, "empty symbol");
  }
  auto it = ids_.find(std::string(symbol));
  if (it != ids_.end()) return it->second;
  Label id = static_cast<Label>(symbols_.size());
  symbols_.emplace_back(symbol);
  ids_.emplace(symbols_.back(), id);
  if (symbol == kBlankSymbol) blank_ = id;
  return id;
}

Label SymbolTable::Find(std::string_view symbol) const {
  auto it = ids_.find(std::string(symbol));
  return it == ids_.end() ? kNoLabel : it->second;
}

const std::string& SymbolTable::Symbol(Label id) const {
  if (id < 0 || static_cast<size_t>(id) >= symbols_.size()) {
    throw Error(ErrorKind::kPrecondition,
                "symbol id out of range: " + std::to_string(id));
  }
  return symbols_[id];
}

SymbolTable SymbolTable::Read(std::istream& in) {
  SymbolTable table;
  std::string line;
  Label expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = SplitTabs(line);
    if (fields.size() != 2) {
      throw Error(ErrorKind::kIo, "bad symbol table line: " + line);
    }
    Label id = static_cast<Label>(ParseInt(fields[1]));
    if (id != expected) {
      throw Error(ErrorKind::kIo, "symbol ids must be dense, got " +
                                      std::to_string(id) + " expected " +
                                      std::to_string(expected));
    }
    if (id == 0) {
      if (fields[0] != kEpsilonSymbol) {
        throw Error(ErrorKind::kIo, "id 0 must be " +
                                        std::string(kEpsilonSymbol));
      }
    } else if (table.AddSymbol(fields[0]) != id) {
      throw Error(ErrorKind::kIo, "duplicate symbol: " + fields[0]);
    }
    ++expected;
  }
  return table;
}

SymbolTable SymbolTable::ReadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return Read(in);
}

void SymbolTable::Write(std::ostream& out) const {
  for (size_t i = 0; i < symbols_.size(); ++i) {
    out << symbols_[i] << '\t' << i << '\n';
  }
}

void SymbolTable::WriteFile(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  Write(out);
}

}  // namespace ctcbias
