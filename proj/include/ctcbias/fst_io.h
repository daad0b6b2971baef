// ctcbias/fst_io.h
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

#ifndef CTCBIAS_FST_IO_H_
#define CTCBIAS_FST_IO_H_

#include <iosfwd>
#include <string>

#include "ctcbias/wfst.h"

namespace ctcbias {

// AT&T text format. Arc lines are `src<TAB>dst<TAB>ilabel<TAB>olabel<TAB>w`,
// final lines `state<TAB>w`; weights carry six fractional digits. The start
// state is written first. Labels are written as symbols when the FST has
// symbol tables attached and as integers otherwise; reading uses whichever
// tables are passed in the same way.
void WriteFstText(const Wfst& fst, std::ostream& out);
std::string FstToText(const Wfst& fst);
Wfst ReadFstText(std::istream& in, Wfst::SymbolsPtr isyms = nullptr,
                 Wfst::SymbolsPtr osyms = nullptr);
Wfst FstFromText(const std::string& text, Wfst::SymbolsPtr isyms = nullptr,
                 Wfst::SymbolsPtr osyms = nullptr);

void WriteFstFile(const Wfst& fst, const std::string& path);
Wfst ReadFstFile(const std::string& path, Wfst::SymbolsPtr isyms = nullptr,
                 Wfst::SymbolsPtr osyms = nullptr);

}  // namespace ctcbias

#endif  // CTCBIAS_FST_IO_H_
