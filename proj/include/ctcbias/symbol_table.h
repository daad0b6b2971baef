// ctcbias/symbol_table.h
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

#ifndef CTCBIAS_SYMBOL_TABLE_H_
#define CTCBIAS_SYMBOL_TABLE_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctcbias {

using Label = int32_t;

constexpr Label kEpsilon = 0;
constexpr Label kNoLabel = -1;

inline constexpr std::string_view kEpsilonSymbol = "<eps>";
inline constexpr std::string_view kBlankSymbol = "<blk>";

/// Bijective symbol <-> id map with dense ids. Id 0 is always epsilon.
/// A CTC label table additionally carries a distinguished blank id; tables
/// containing the symbol "<blk>" mark it as blank automatically.
class SymbolTable {
 public:
  SymbolTable();

  // Returns the existing id when the symbol is already present.
  Label AddSymbol(std::string_view symbol);
  Label Find(std::string_view symbol) const;
  bool Contains(std::string_view symbol) const {
    return Find(symbol) != kNoLabel;
  }
  const std::string& Symbol(Label id) const;
  size_t Size() const { return symbols_.size(); }

  Label Blank() const { return blank_; }
  bool HasBlank() const { return blank_ != kNoLabel; }

  // Lines of `symbol<TAB>id`; ids must be dense and start at 0 (epsilon).
  static SymbolTable Read(std::istream& in);
  static SymbolTable ReadFile(const std::string& path);
  void Write(std::ostream& out) const;
  void WriteFile(const std::string& path) const;

  friend bool operator==(const SymbolTable& a, const SymbolTable& b) {
    return a.symbols_ == b.symbols_;
  }
  friend bool operator!=(const SymbolTable& a, const SymbolTable& b) {
    return !(a == b);
  }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, Label> ids_;
  Label blank_ = kNoLabel;
};

}  // namespace ctcbias

#endif  // CTCBIAS_SYMBOL_TABLE_H_
