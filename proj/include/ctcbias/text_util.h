// ctcbias/text_util.h
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

#ifndef CTCBIAS_TEXT_UTIL_H_
#define CTCBIAS_TEXT_UTIL_H_

#include <string>
#include <string_view>
#include <vector>

namespace ctcbias {

std::vector<std::string> SplitTabs(std::string_view line);
std::vector<std::string> SplitWhitespace(std::string_view text);
std::string Join(const std::vector<std::string>& parts, std::string_view sep);
std::string NormalizeWhitespace(std::string_view text);
std::string ToLowerAscii(std::string_view text);

long long ParseInt(std::string_view text);
double ParseDouble(std::string_view text);

// Fixed six fractional digits; negative zero prints as 0.000000 and
// infinities as "Infinity" / "-Infinity".
std::string FormatWeight(double value);

// Splits UTF-8 text into code points, each returned as its byte string.
std::vector<std::string> Utf8Chars(std::string_view text);

std::vector<std::string> ReadLines(const std::string& path);

}  // namespace ctcbias

#endif  // CTCBIAS_TEXT_UTIL_H_
