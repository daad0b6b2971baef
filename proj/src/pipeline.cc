// pipeline.cc
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

#include "ctcbias/pipeline.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <set>
#include <thread>

#include "json.hpp"

#include "ctcbias/errors.h"
#include "ctcbias/fst_ops.h"
#include "ctcbias/text_util.h"

namespace ctcbias {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration.

void PipelineConfig::Validate() const {
  world.Validate();
  corpus.Validate();
  noise.Validate();
  norm.Validate();
  plain.Validate();
  decode.Validate();
  if (!(confusion_max_sim >= 0.0 && confusion_max_sim < 1.0)) {
    throw ConfigError("confusion_max_sim must lie in [0, 1)",
                      "confusion_max_sim");
  }
  if (lm_order < 1) throw ConfigError("lm_order must be >= 1", "lm_order");
  for (const auto& [js, name] :
       {std::pair{&p2wp, "p2wp"}, std::pair{&g2p, "g2p"}}) {
    if (js->order < 1) {
      throw ConfigError("order must be >= 1", std::string(name) + ".order");
    }
    if (js->max_input < 1) {
      throw ConfigError("max_input must be >= 1",
                        std::string(name) + ".max_input");
    }
    if (js->entropy_threshold < 0.0) {
      throw ConfigError("entropy_threshold must be >= 0",
                        std::string(name) + ".entropy_threshold");
    }
    if (js->em_iters < 1) {
      throw ConfigError("em_iters must be >= 1",
                        std::string(name) + ".em_iters");
    }
  }
  if (n_pron < 1) throw ConfigError("n_pron must be >= 1", "n_pron");
  if (n_tok < 1) throw ConfigError("n_tok must be >= 1", "n_tok");
  if (lg_compare_n_tok < 1) {
    throw ConfigError("lg_compare_n_tok must be >= 1", "lg_compare_n_tok");
  }
  if (threads < 1) throw ConfigError("threads must be >= 1", "threads");
}

void PipelineConfig::ValidatePaths(bool need_corpus) const {
  namespace fs = std::filesystem;
  if (!fs::is_directory(data_dir)) {
    throw ConfigError("data directory does not exist: " + data_dir,
                      "data_dir");
  }
  for (const char* f : {"vocab_prons.tsv", "lm_text.txt", "heldout.txt",
                        "templates.txt", "names.tsv", "wordpieces.txt",
                        "word_counts.tsv"}) {
    if (!fs::exists(fs::path(data_dir) / f)) {
      throw ConfigError("missing " + std::string(f) + " in " + data_dir,
                        "data_dir");
    }
  }
  if (need_corpus) {
    for (const char* f : {"corpus.jsonl", "users.json"}) {
      if (!fs::exists(fs::path(CorpusDir()) / f)) {
        throw ConfigError("missing " + std::string(f) + " in " + CorpusDir(),
                          "corpus_dir");
      }
    }
  }
}

namespace {

// Reads known keys of one JSON object and rejects the rest.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string prefix)
      : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) {
      throw ConfigError("expected an object", prefix_.empty() ? "config" : prefix_);
    }
  }
  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("unknown configuration key", Field(it.key()));
      }
    }
  }

  std::string Field(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }
  const Json* Get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  void Read(const std::string& key, double& v) {
    if (auto* x = Get(key)) {
      if (!x->is_number()) throw ConfigError("expected a number", Field(key));
      v = x->get<double>();
    }
  }
  template <typename Int>
    requires std::is_integral_v<Int>
  void Read(const std::string& key, Int& v) {
    if (auto* x = Get(key)) {
      if (!x->is_number_integer()) {
        throw ConfigError("expected an integer", Field(key));
      }
      if constexpr (std::is_unsigned_v<Int>) {
        if (x->get<long long>() < 0) {
          throw ConfigError("expected a non-negative integer", Field(key));
        }
      }
      v = x->get<Int>();
    }
  }
  void Read(const std::string& key, std::string& v) {
    if (auto* x = Get(key)) {
      if (!x->is_string()) throw ConfigError("expected a string", Field(key));
      v = x->get<std::string>();
    }
  }

 private:
  const Json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

void ReadJoint(ObjectReader& r, const std::string& key, JointSettings& s) {
  if (const Json* j = r.Get(key)) {
    ObjectReader o(*j, r.Field(key));
    o.Read("order", s.order);
    o.Read("entropy_threshold", s.entropy_threshold);
    o.Read("unit_beam", s.unit_beam);
    o.Read("max_input", s.max_input);
    o.Read("em_iters", s.em_iters);
  }
}

void ReadNorm(ObjectReader& r, const std::string& key, NormConfig& n) {
  if (const Json* j = r.Get(key)) {
    ObjectReader o(*j, r.Field(key));
    o.Read("scale", n.scale);
    o.Read("clip", n.clip);
    o.Read("blank_cost", n.blank_cost);
  }
}

std::string Resolve(const std::string& base, const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute() || base.empty()) return path;
  return (std::filesystem::path(base) / p).lexically_normal().string();
}

}  // namespace

PipelineConfig ParsePipelineConfig(const std::string& json_text,
                                   const std::string& base_dir) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what(), "config");
  }
  PipelineConfig cfg;
  {
    ObjectReader r(j, "");
    r.Read("data_dir", cfg.data_dir);
    r.Read("corpus_dir", cfg.corpus_dir);
    r.Read("out_dir", cfg.out_dir);
    if (const Json* w = r.Get("world")) {
      ObjectReader o(*w, "world");
      o.Read("seed", cfg.world.seed);
      o.Read("vocab_size", cfg.world.vocab_size);
      o.Read("first_names", cfg.world.first_names);
      o.Read("last_names", cfg.world.last_names);
      o.Read("irregular_word_rate", cfg.world.irregular_word_rate);
      o.Read("irregular_name_rate", cfg.world.irregular_name_rate);
      o.Read("names_missing_rate", cfg.world.names_missing_rate);
      o.Read("lm_sentences", cfg.world.lm_sentences);
      o.Read("heldout_sentences", cfg.world.heldout_sentences);
      o.Read("carriers", cfg.world.carriers);
      o.Read("carrier_rate", cfg.world.carrier_rate);
      o.Read("pieces", cfg.world.pieces);
      o.Read("class", cfg.world.cls);
    }
    if (const Json* c = r.Get("corpus")) {
      ObjectReader o(*c, "corpus");
      o.Read("subset_a", cfg.corpus.subset_a);
      o.Read("subset_b", cfg.corpus.subset_b);
      o.Read("contacts", cfg.corpus.contacts);
      o.Read("users", cfg.corpus.users);
      o.Read("distractors", cfg.corpus.distractors);
      o.Read("mismatch_fraction", cfg.corpus.mismatch_fraction);
      o.Read("oov_fraction", cfg.corpus.oov_fraction);
      o.Read("two_word_rate", cfg.corpus.two_word_rate);
      o.Read("seed", cfg.corpus.seed);
    }
    if (const Json* n = r.Get("noise")) {
      ObjectReader o(*n, "noise");
      o.Read("seed", cfg.noise.seed);
      o.Read("frames_min", cfg.noise.frames_min);
      o.Read("frames_max", cfg.noise.frames_max);
      o.Read("blank_prob", cfg.noise.blank_prob);
      o.Read("confusion_temp", cfg.noise.confusion_temp);
      o.Read("margin", cfg.noise.margin);
      o.Read("internal_lm_weight", cfg.noise.internal_lm_weight);
      o.Read("confusion_max_sim", cfg.confusion_max_sim);
      o.Read("confusion_min_sim", cfg.confusion_min_sim);
    }
    r.Read("lm_order", cfg.lm_order);
    ReadNorm(r, "norm", cfg.norm);
    ReadNorm(r, "plain", cfg.plain);
    ReadJoint(r, "p2wp", cfg.p2wp);
    ReadJoint(r, "g2p", cfg.g2p);
    r.Read("n_pron", cfg.n_pron);
    r.Read("n_tok", cfg.n_tok);
    r.Read("lg_compare_n_tok", cfg.lg_compare_n_tok);
    if (const Json* d = r.Get("decode")) {
      ObjectReader o(*d, "decode");
      o.Read("beam", cfg.decode.beam);
      o.Read("max_active", cfg.decode.max_active);
      o.Read("lm_scale", cfg.decode.lm_scale);
      o.Read("nbest", cfg.decode.nbest);
    }
    r.Read("threads", cfg.threads);
  }
  cfg.data_dir = Resolve(base_dir, cfg.data_dir);
  cfg.corpus_dir = Resolve(base_dir, cfg.corpus_dir);
  cfg.out_dir = Resolve(base_dir, cfg.out_dir);
  cfg.Validate();
  return cfg;
}

PipelineConfig ReadPipelineConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path, "config");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParsePipelineConfig(
      ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string PipelineConfigJson(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["data_dir"] = c.data_dir;
  j["corpus_dir"] = c.CorpusDir();
  j["out_dir"] = c.out_dir;
  j["world"] = {{"seed", c.world.seed},
                {"vocab_size", c.world.vocab_size},
                {"first_names", c.world.first_names},
                {"last_names", c.world.last_names},
                {"irregular_word_rate", c.world.irregular_word_rate},
                {"irregular_name_rate", c.world.irregular_name_rate},
                {"names_missing_rate", c.world.names_missing_rate},
                {"lm_sentences", c.world.lm_sentences},
                {"heldout_sentences", c.world.heldout_sentences},
                {"carriers", c.world.carriers},
                {"carrier_rate", c.world.carrier_rate},
                {"pieces", c.world.pieces},
                {"class", c.world.cls}};
  j["corpus"] = {{"subset_a", c.corpus.subset_a},
                 {"subset_b", c.corpus.subset_b},
                 {"contacts", c.corpus.contacts},
                 {"users", c.corpus.users},
                 {"distractors", c.corpus.distractors},
                 {"mismatch_fraction", c.corpus.mismatch_fraction},
                 {"oov_fraction", c.corpus.oov_fraction},
                 {"two_word_rate", c.corpus.two_word_rate},
                 {"seed", c.corpus.seed}};
  j["noise"] = {{"seed", c.noise.seed},
                {"frames_min", c.noise.frames_min},
                {"frames_max", c.noise.frames_max},
                {"blank_prob", c.noise.blank_prob},
                {"confusion_temp", c.noise.confusion_temp},
                {"margin", c.noise.margin},
                {"internal_lm_weight", c.noise.internal_lm_weight},
                {"confusion_max_sim", c.confusion_max_sim},
                {"confusion_min_sim", c.confusion_min_sim}};
  j["lm_order"] = c.lm_order;
  auto norm = [](const NormConfig& n) {
    return nlohmann::ordered_json{
        {"scale", n.scale}, {"clip", n.clip}, {"blank_cost", n.blank_cost}};
  };
  j["norm"] = norm(c.norm);
  j["plain"] = norm(c.plain);
  auto joint = [](const JointSettings& s) {
    return nlohmann::ordered_json{{"order", s.order},
                                  {"entropy_threshold", s.entropy_threshold},
                                  {"unit_beam", s.unit_beam},
                                  {"max_input", s.max_input},
                                  {"em_iters", s.em_iters}};
  };
  j["p2wp"] = joint(c.p2wp);
  j["g2p"] = joint(c.g2p);
  j["n_pron"] = c.n_pron;
  j["n_tok"] = c.n_tok;
  j["lg_compare_n_tok"] = c.lg_compare_n_tok;
  const bool inf_beam = std::isinf(c.decode.beam);
  j["decode"] = {{"beam", inf_beam ? nlohmann::ordered_json(1e300)
                                   : nlohmann::ordered_json(c.decode.beam)},
                 {"max_active", c.decode.max_active},
                 {"lm_scale", c.decode.lm_scale},
                 {"nbest", c.decode.nbest}};
  j["threads"] = c.threads;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Stages.

NgramModel TrainWordLm(const World& world, int order) {
  std::vector<TrainingSentence> sentences;
  sentences.reserve(world.lm_text.size());
  for (const auto& s : world.lm_text) {
    TrainingSentence t;
    t.tokens = s;
    sentences.push_back(std::move(t));
  }
  NgramTrainOptions opt;
  opt.order = order;
  opt.vocabulary = world.vocab;
  opt.vocabulary.push_back(world.cls);
  return TrainNgram(sentences, opt);
}

PriorTable EstimatePrior(const World& world, const WordpieceModel& wp) {
  return PriorTable::Estimate(world.PieceCorpus(wp), wp.Pieces());
}

JointModel TrainJointModel(const std::vector<TrainingPair>& pairs,
                           const JointSettings& settings) {
  AlignOptions opt;
  opt.max_input = settings.max_input;
  opt.max_iters = settings.em_iters;
  AlignResult aligned = Align(pairs, opt);
  JointModel model = TrainJoint(aligned.aligned, settings.order);
  if (settings.entropy_threshold > 0.0) {
    model = PruneJointEntropy(model, settings.entropy_threshold);
  }
  if (settings.unit_beam > 0.0) model = PruneUnits(model, settings.unit_beam);
  return model;
}

Models::Models(World world, const PipelineConfig& cfg)
    : cfg_(cfg),
      world_(std::move(world)),
      wp_(WordpieceModel::FromPieces(world_.pieces)),
      prior_(EstimatePrior(world_, wp_)),
      g_(TrainWordLm(world_, cfg.lm_order)),
      g_uni_(TrainWordLm(world_, 1)),
      lexicon_(world_.PronunciationLexicon()),
      p2wp_(TrainJointModel(world_.P2wpPairs(wp_), cfg.p2wp)),
      g2p_(TrainJointModel(world_.G2pPairs(), cfg.g2p)),
      acoustic_(SpellingRules::Default(), wp_) {}

const DecodingGraph& Models::Graph(bool with_classes, bool normalize) {
  auto& slot = graphs_[{with_classes, normalize}];
  if (!slot) {
    Wfst t = BuildT(wp_, &prior_, normalize ? cfg_.norm : cfg_.plain,
                    normalize);
    std::vector<std::string> words = world_.vocab;
    std::vector<std::string> classes;
    if (with_classes) classes.push_back(world_.cls);
    Wfst l = BuildL(wp_, words, classes);
    slot = std::make_unique<DecodingGraph>(BuildDecodingGraph(t, l, g_uni_));
  }
  return *slot;
}

const Wfst& Models::Lg() {
  if (!lg_) lg_ = std::make_unique<Wfst>(BuildLgBaseline(lexicon_, wp_));
  return *lg_;
}

std::vector<SystemSpec> LadderSystems() {
  return {
      {"CTC+4-gram", false, TokenSource::kNone, 0, false},
      {"+Personalized", true, TokenSource::kNone, 0, false},
      {"+P2WP=1", true, TokenSource::kP2wp, 1, false},
      {"+P2WP=4", true, TokenSource::kP2wp, 4, false},
      {"+WP norm", true, TokenSource::kP2wp, 4, true},
  };
}

std::vector<SystemSpec> LgComparisonSystems(size_t n_tok) {
  return {
      {"LG FST", true, TokenSource::kLg, n_tok, true},
      {"P2WP", true, TokenSource::kP2wp, n_tok, true},
  };
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <typename Fn>
void ParallelFor(size_t n, size_t threads, Fn fn) {
  threads = std::max<size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

NoiseConfig NoiseFor(const Models& models, const PipelineConfig& cfg) {
  NoiseConfig noise = cfg.noise;
  noise.confusion_map =
      PhoneticConfusions(models.Wp(), models.Acoustic().Rules(),
                         cfg.confusion_max_sim, cfg.confusion_min_sim);
  noise.label_prior = models.Prior().Costs();
  return noise;
}

EmissionSet SimulateEmissions(const Corpus& corpus, const Models& models,
                              const NoiseConfig& noise, size_t threads) {
  const auto& utts = corpus.utterances;
  std::vector<EmissionMatrix> out(utts.size());
  ParallelFor(utts.size(), threads, [&](size_t i) {
    NoiseConfig n = noise;
    n.seed = DeriveSeed(noise.seed, utts[i].id);
    out[i] = SynthEmissions(utts[i].planted, models.Wp().Symbols(), n);
  });
  EmissionSet set;
  for (size_t i = 0; i < utts.size(); ++i) set[utts[i].id] = std::move(out[i]);
  return set;
}

UserBiases BuildUserBiases(Models& models, const Corpus& corpus,
                           const SystemSpec& system,
                           const PipelineConfig& cfg) {
  UserBiases out;
  if (!system.personalized) return out;
  std::optional<PronTokenizer> tokenizer;
  if (system.source == TokenSource::kP2wp) {
    tokenizer = JointTokenizer(models.P2wp());
  } else if (system.source == TokenSource::kLg) {
    tokenizer = LgTokenizer(models.Lg());
  }
  LcOptions opt;
  opt.n_pron = cfg.n_pron;
  opt.n_tok = std::max<size_t>(1, system.n_tok);  // unused without a source
  for (const auto& [user, classes] : corpus.user_entities) {
    for (const auto& [cls, entities] : classes) {
      out[user][cls] = MakeBiasFst(EntityList::Make(cls, entities), models.Wp(),
                                   tokenizer ? &*tokenizer : nullptr,
                                   models.PronLexicon(), &models.G2p(), opt);
    }
  }
  return out;
}

SystemResult RunSystem(Models& models, const Corpus& corpus,
                       const EmissionSet& emissions, const SystemSpec& system,
                       const PipelineConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  SystemResult result;
  result.system = system;
  const UserBiases biases = BuildUserBiases(models, corpus, system, cfg);
  for (const auto& [user, classes] : biases) {
    for (const auto& [cls, b] : classes) result.bias_warnings += b.warnings;
  }
  const DecodingGraph& graph = models.Graph(system.personalized, system.normalize);
  const auto& utts = corpus.utterances;
  std::vector<std::optional<Hypothesis>> best(utts.size());
  ParallelFor(utts.size(), cfg.threads, [&](size_t i) {
    const Utterance& u = utts[i];
    auto em = emissions.find(u.id);
    if (em == emissions.end()) {
      throw Error(ErrorKind::kPrecondition, "no emissions for " + u.id);
    }
    BiasMap map;
    if (system.personalized) {
      auto it = biases.find(u.user);
      if (it == biases.end()) {
        throw Error(ErrorKind::kPrecondition,
                    "no entity lists for user '" + u.user + "' of " + u.id);
      }
      for (const auto& [cls, b] : it->second) map[cls] = &b;
    }
    DecodeConfig dc = cfg.decode;
    dc.nbest = 1;
    auto hyps = Decode(em->second, graph, models.G(), map, dc);
    if (!hyps.empty()) best[i] = std::move(hyps.front());
  });
  for (size_t i = 0; i < utts.size(); ++i) {
    if (best[i]) {
      result.hyps[utts[i].id] = best[i]->words;
      result.best[utts[i].id] = std::move(*best[i]);
    } else {
      result.hyps[utts[i].id] = {};
    }
  }
  result.report = Evaluate(utts, result.hyps);
  result.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return result;
}

}  // namespace ctcbias
