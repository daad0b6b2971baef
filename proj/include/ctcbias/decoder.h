// ctcbias/decoder.h
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

#ifndef CTCBIAS_DECODER_H_
#define CTCBIAS_DECODER_H_

#include <iosfwd>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ctcbias/biasing.h"
#include "ctcbias/ngram.h"
#include "ctcbias/symbol_table.h"
#include "ctcbias/tokenize.h"
#include "ctcbias/wfst.h"

namespace ctcbias {

/// Frame costs (negative natural-log posteriors). Column c holds label c + 1
/// of the CTC label table (column 0 is the blank, then the pieces).
class EmissionMatrix {
 public:
  EmissionMatrix() = default;
  EmissionMatrix(size_t frames, std::shared_ptr<const SymbolTable> labels);

  size_t NumFrames() const { return frames_; }
  size_t NumColumns() const { return columns_; }
  const std::shared_ptr<const SymbolTable>& Labels() const { return labels_; }
  float Cost(size_t frame, Label label) const {
    return costs_[frame * columns_ + static_cast<size_t>(label - 1)];
  }
  void SetCost(size_t frame, Label label, float cost) {
    costs_[frame * columns_ + static_cast<size_t>(label - 1)] = cost;
  }
  const float* Row(size_t frame) const { return &costs_[frame * columns_]; }
  float* MutableRow(size_t frame) { return &costs_[frame * columns_]; }
  const std::vector<float>& Data() const { return costs_; }

 private:
  size_t frames_ = 0;
  size_t columns_ = 0;
  std::shared_ptr<const SymbolTable> labels_;
  std::vector<float> costs_;
};

// Binary: magic "CTCEM1", little-endian u32 frames, u32 columns, then
// frames x columns 32-bit floats. The label table lives in a sidecar file.
void WriteEmissionBinary(const EmissionMatrix& em, std::ostream& out);
EmissionMatrix ReadEmissionBinary(std::istream& in,
                                  std::shared_ptr<const SymbolTable> labels);
void WriteEmissionFile(const EmissionMatrix& em, const std::string& path);
EmissionMatrix ReadEmissionFile(const std::string& path,
                                std::shared_ptr<const SymbolTable> labels);
// Text variant: a `#`-prefixed header of label symbols, then one
// tab-separated row of costs per frame.
void WriteEmissionTsv(const EmissionMatrix& em, std::ostream& out);
EmissionMatrix ReadEmissionTsv(std::istream& in,
                               std::shared_ptr<const SymbolTable> labels);

/// The offline graph T o L o G_uni plus what the decoder needs to interpret
/// its output labels.
struct DecodingGraph {
  enum class OutKind : uint8_t { kNone, kWord, kClassEntry, kClassExit, kPiece };

  Wfst fst;  // input: CTC labels; output: L's output table
  std::vector<OutKind> kinds;     // per output label
  std::vector<double> uni_cost;   // G_uni cost of words and class names
  std::vector<Label> piece;       // CTC label carried by pass-through symbols
  std::vector<std::string> cls;   // class name for entry/exit markers
  double final_uni_cost = 0.0;    // G_uni cost of </s>

  const SymbolTable& Outputs() const { return *fst.OutputSymbols(); }
};

/// Composes T, L and the unigram G_uni (as a one-state acceptor over L's
/// output table: words and class names cost their unigram cost, exit and
/// pass-through symbols cost 0, </s> is the final weight). The result is
/// arc-sorted by input label. Throws ConfigError on alphabet mismatch or when
/// L has no words.
DecodingGraph BuildDecodingGraph(const Wfst& t, const Wfst& l,
                                 const NgramModel& g_uni);

struct DecodeConfig {
  double beam = 12.0;
  size_t max_active = 2000;
  double lm_scale = 1.0;
  size_t nbest = 1;

  void Validate() const;
  // No pruning at all (for exhaustive comparisons).
  static DecodeConfig Exhaustive();
};

struct Hypothesis {
  std::vector<std::string> words;   // entities substituted for class regions
  std::vector<std::string> pieces;  // collapsed wordpiece sequence
  std::vector<std::string> lm_tokens;  // words and class names, as seen by G
  double cost = 0.0;
  double lm_delta = 0.0;  // accumulated lm_scale * (cost_G - cost_G_uni)
};

using BiasMap = std::map<std::string, const BiasFst*>;

/// Frame-synchronous beam search over the graph with on-the-fly unigram
/// removal and rescoring against `g`, and class regions resolved through the
/// per-class bias FSTs. Returns up to cfg.nbest hypotheses with distinct word
/// sequences, best first; empty when no complete path survives. Throws
/// ConfigError on a label-table mismatch and Error(kPrecondition) when a
/// class of the graph has no bias FST.
std::vector<Hypothesis> Decode(const EmissionMatrix& em,
                               const DecodingGraph& graph, const NgramModel& g,
                               const BiasMap& biases, const DecodeConfig& cfg);

// {"id", "text", "cost", "pieces"} per line.
void WriteHypothesisJsonl(const std::string& id, const Hypothesis* hyp,
                          std::ostream& out);
std::map<std::string, std::vector<std::string>> ReadHypothesesJsonl(
    std::istream& in);

}  // namespace ctcbias

#endif  // CTCBIAS_DECODER_H_
