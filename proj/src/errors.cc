// errors.cc
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

#include "ctcbias/errors.h"

namespace ctcbias {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return "config";
    case ErrorKind::kTokenization:
      return "tokenization";
    case ErrorKind::kUnsupported:
      return "unsupported";
    case ErrorKind::kPrecondition:
      return "precondition";
    case ErrorKind::kDivergence:
      return "divergence";
    case ErrorKind::kIo:
      return "io";
    case ErrorKind::kCoverage:
      return "coverage";
    case ErrorKind::kUndefined:
      return "undefined";
  }
  return "unknown";
}

}  // namespace ctcbias
