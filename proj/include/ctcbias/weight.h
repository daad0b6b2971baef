// ctcbias/weight.h
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

#ifndef CTCBIAS_WEIGHT_H_
#define CTCBIAS_WEIGHT_H_

#include <cmath>
#include <limits>

#include "ctcbias/errors.h"

namespace ctcbias {

/// Tropical semiring weight: a cost (negative log probability) with
/// Plus = min and Times = +. Zero() is +infinity and One() is 0.
class TropicalWeight {
 public:
  constexpr TropicalWeight() : value_(kInfinity) {}
  explicit TropicalWeight(double value) : value_(value) {
    if (std::isnan(value)) {
      throw Error(ErrorKind::kPrecondition, "NaN weight");
    }
  }

  static constexpr TropicalWeight Zero() { return TropicalWeight(); }
  static TropicalWeight One() { return TropicalWeight(0.0); }

  double Value() const { return value_; }
  bool IsZero() const { return value_ == kInfinity; }

  friend TropicalWeight Plus(TropicalWeight a, TropicalWeight b) {
    return a.value_ <= b.value_ ? a : b;
  }
  friend TropicalWeight Times(TropicalWeight a, TropicalWeight b) {
    if (a.IsZero() || b.IsZero()) return Zero();
    return TropicalWeight(a.value_ + b.value_);
  }
  // Left division: the c with Times(b, c) == a.
  friend TropicalWeight Divide(TropicalWeight a, TropicalWeight b) {
    if (a.IsZero()) return Zero();
    if (b.IsZero()) throw Error(ErrorKind::kPrecondition, "division by Zero()");
    return TropicalWeight(a.value_ - b.value_);
  }

  friend bool operator==(TropicalWeight a, TropicalWeight b) {
    return a.value_ == b.value_;
  }
  friend bool operator!=(TropicalWeight a, TropicalWeight b) {
    return !(a == b);
  }
  friend bool operator<(TropicalWeight a, TropicalWeight b) {
    return a.value_ < b.value_;
  }

 private:
  static constexpr double kInfinity = std::numeric_limits<double>::infinity();
  double value_;
};

inline bool ApproxEqual(TropicalWeight a, TropicalWeight b,
                        double delta = 1e-9) {
  if (a.IsZero() || b.IsZero()) return a.IsZero() && b.IsZero();
  return std::fabs(a.Value() - b.Value()) <= delta;
}

using Weight = TropicalWeight;

}  // namespace ctcbias

#endif  // CTCBIAS_WEIGHT_H_
