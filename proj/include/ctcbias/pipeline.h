// ctcbias/pipeline.h
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

// Experiment pipeline shared by the command-line driver and the tests:
// configuration, model training, graph and bias construction, decoding and
// the system ladder.

#ifndef CTCBIAS_PIPELINE_H_
#define CTCBIAS_PIPELINE_H_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ctcbias/biasing.h"
#include "ctcbias/corpus.h"
#include "ctcbias/decoder.h"
#include "ctcbias/eval.h"
#include "ctcbias/jointseq.h"
#include "ctcbias/ngram.h"
#include "ctcbias/simulate.h"
#include "ctcbias/tokenize.h"

namespace ctcbias {

struct JointSettings {
  int order = 5;
  double entropy_threshold = 1e-7;  // 0 disables entropy pruning
  double unit_beam = 3.0;           // <= 0 disables unit pruning
  int max_input = 4;                // input symbols per unit
  int em_iters = 10;
};

struct PipelineConfig {
  std::string data_dir = "data/desk";  // world files
  std::string corpus_dir;              // default: data_dir + "/corpus"
  std::string out_dir = "out";
  WorldSpec world;
  CorpusSpec corpus;
  // Confusion map and label prior are filled from the world (NoiseFor).
  NoiseConfig noise = [] {
    NoiseConfig n;
    n.internal_lm_weight = 0.3;
    return n;
  }();
  double confusion_max_sim = 0.6;
  double confusion_min_sim = 0.25;
  int lm_order = 4;
  NormConfig norm = NormConfig::Defaults(true);
  NormConfig plain = NormConfig::Defaults(false);
  JointSettings p2wp;
  JointSettings g2p{5, 0.0, 0.0, 4, 10};
  size_t n_pron = 4;
  size_t n_tok = 4;           // used by single-system stages
  size_t lg_compare_n_tok = 10;
  DecodeConfig decode;
  size_t threads = 1;

  std::string CorpusDir() const {
    return corpus_dir.empty() ? data_dir + "/corpus" : corpus_dir;
  }
  // Numeric ranges; throws ConfigError naming the field.
  void Validate() const;
  // Referenced input paths exist; throws ConfigError naming the field.
  void ValidatePaths(bool need_corpus) const;
};

// JSON object with the field names above (nested "world", "corpus",
// "noise", "norm", "plain", "p2wp", "g2p", "decode"); unknown keys are
// rejected. Relative paths resolve against `base_dir`.
PipelineConfig ParsePipelineConfig(const std::string& json_text,
                                   const std::string& base_dir);
PipelineConfig ReadPipelineConfig(const std::string& path);
std::string PipelineConfigJson(const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// Stages.

NgramModel TrainWordLm(const World& world, int order);
PriorTable EstimatePrior(const World& world, const WordpieceModel& wp);
JointModel TrainJointModel(const std::vector<TrainingPair>& pairs,
                           const JointSettings& settings);

/// Everything that is trained or built once per experiment.
class Models {
 public:
  Models(World world, const PipelineConfig& cfg);

  const World& GetWorld() const { return world_; }
  const WordpieceModel& Wp() const { return wp_; }
  const PriorTable& Prior() const { return prior_; }
  const NgramModel& G() const { return g_; }
  const NgramModel& GUni() const { return g_uni_; }
  const Lexicon& PronLexicon() const { return lexicon_; }
  const JointModel& P2wp() const { return p2wp_; }
  const JointModel& G2p() const { return g2p_; }
  const AcousticRealization& Acoustic() const { return acoustic_; }
  // Lazily built and cached.
  const DecodingGraph& Graph(bool with_classes, bool normalize);
  const Wfst& Lg();

 private:
  PipelineConfig cfg_;
  World world_;
  WordpieceModel wp_;
  PriorTable prior_;
  NgramModel g_;
  NgramModel g_uni_;
  Lexicon lexicon_;
  JointModel p2wp_;
  JointModel g2p_;
  AcousticRealization acoustic_;
  std::map<std::pair<bool, bool>, std::unique_ptr<DecodingGraph>> graphs_;
  std::unique_ptr<Wfst> lg_;
};

enum class TokenSource { kNone, kP2wp, kLg };

struct SystemSpec {
  std::string name;
  bool personalized = false;
  TokenSource source = TokenSource::kNone;
  size_t n_tok = 0;
  bool normalize = false;
};

// CTC+4-gram, +Personalized, +P2WP=1, +P2WP=4, +WP norm.
std::vector<SystemSpec> LadderSystems();
// LG FST vs P2WP with n_tok tokenizations each, prior normalization on.
std::vector<SystemSpec> LgComparisonSystems(size_t n_tok);

using EmissionSet = std::map<std::string, EmissionMatrix>;

// Emissions for every utterance from its planted pieces; per-utterance
// seeds derive from cfg.noise.seed and the id.
EmissionSet SimulateEmissions(const Corpus& corpus, const Models& models,
                              const NoiseConfig& noise, size_t threads);

// user -> class -> bias FST for one system.
using UserBiases = std::map<std::string, std::map<std::string, BiasFst>>;
UserBiases BuildUserBiases(Models& models, const Corpus& corpus,
                           const SystemSpec& system,
                           const PipelineConfig& cfg);

struct SystemResult {
  SystemSpec system;
  HypothesisMap hyps;
  std::map<std::string, Hypothesis> best;  // absent when nothing survived
  EvalReport report;
  size_t bias_warnings = 0;
  double seconds = 0.0;
};

SystemResult RunSystem(Models& models, const Corpus& corpus,
                       const EmissionSet& emissions, const SystemSpec& system,
                       const PipelineConfig& cfg);

// Confusion map of the world's pieces under cfg's similarity settings.
NoiseConfig NoiseFor(const Models& models, const PipelineConfig& cfg);

}  // namespace ctcbias

#endif  // CTCBIAS_PIPELINE_H_
