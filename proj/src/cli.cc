// cli.cc
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

#include "ctcbias/cli.h"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ctcbias/errors.h"
#include "ctcbias/fst_io.h"
#include "ctcbias/pipeline.h"
#include "ctcbias/text_util.h"

namespace ctcbias {
namespace {

namespace fs = std::filesystem;
using OJson = nlohmann::ordered_json;

// Options shared by every subcommand.
struct CommonOptions {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out;
  std::optional<size_t> threads;
  std::string data_dir;
  std::string corpus_dir;
};

// System selection flags of decode and build-bias.
struct SystemOptions {
  bool no_bias = false;
  std::optional<size_t> p2wp_nbest;
  bool normalize = false;
  bool lg = false;
};

void AddCommon(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "JSON pipeline configuration");
  app->add_option("--seed", o.seed,
                  "overrides the world, corpus and noise seeds");
  app->add_option("--out", o.out, "output directory (overrides out_dir)");
  app->add_option("--threads", o.threads, "worker threads");
  app->add_option("--data", o.data_dir, "world directory (overrides data_dir)");
  app->add_option("--corpus", o.corpus_dir,
                  "corpus directory (overrides corpus_dir)");
}

void AddSystem(CLI::App* app, SystemOptions& s) {
  app->add_flag("--no-bias", s.no_bias, "decode without contextual biasing");
  app->add_option("--p2wp-nbest", s.p2wp_nbest,
                  "P2WP tokenizations per pronunciation (0: spelling only)");
  app->add_flag("--normalize", s.normalize, "wordpiece prior normalization");
  app->add_flag("--lg", s.lg, "LG-baseline tokenizations instead of P2WP");
}

PipelineConfig LoadConfig(const CommonOptions& o) {
  PipelineConfig cfg =
      o.config.empty() ? PipelineConfig{} : ReadPipelineConfig(o.config);
  if (o.seed) {
    cfg.world.seed = *o.seed;
    cfg.corpus.seed = *o.seed;
    cfg.noise.seed = *o.seed;
  }
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.threads) cfg.threads = *o.threads;
  if (!o.data_dir.empty()) cfg.data_dir = o.data_dir;
  if (!o.corpus_dir.empty()) cfg.corpus_dir = o.corpus_dir;
  cfg.Validate();
  return cfg;
}

SystemSpec SelectSystem(const SystemOptions& s, const PipelineConfig& cfg) {
  SystemSpec spec;
  spec.normalize = s.normalize;
  if (s.no_bias) {
    spec.name = "CTC+4-gram";
    return spec;
  }
  spec.personalized = true;
  const size_t n = s.p2wp_nbest.value_or(cfg.n_tok);
  if (n == 0) {
    spec.name = "+Personalized";
    return spec;
  }
  spec.source = s.lg ? TokenSource::kLg : TokenSource::kP2wp;
  spec.n_tok = n;
  spec.name = std::string(s.lg ? "LG" : "P2WP") + "=" + std::to_string(n) +
              (s.normalize ? " +WP norm" : "");
  return spec;
}

std::string Slug(const std::string& name) {
  std::string s;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!s.empty() && s.back() != '_') {
      s += '_';
    }
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s;
}

std::ofstream OpenOut(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

std::vector<std::vector<std::string>> ReadTextLines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path, "input");
  std::vector<std::vector<std::string>> lines;
  std::string line;
  while (std::getline(in, line)) {
    auto words = SplitWhitespace(line);
    if (!words.empty()) lines.push_back(std::move(words));
  }
  return lines;
}

World LoadWorld(const PipelineConfig& cfg) {
  cfg.ValidatePaths(false);
  World world = ReadWorldDir(cfg.data_dir);
  world.cls = cfg.world.cls;
  return world;
}

Corpus LoadCorpus(const PipelineConfig& cfg) {
  cfg.ValidatePaths(true);
  return ReadCorpusDir(cfg.CorpusDir());
}

// Emissions listed in `dir`/manifest.tsv (`id<TAB>path`, paths relative to
// the manifest).
EmissionSet ReadEmissionManifest(const std::string& dir,
                                 const WordpieceModel& wp) {
  const fs::path manifest = fs::path(dir) / "manifest.tsv";
  std::ifstream in(manifest);
  if (!in) {
    throw ConfigError("missing emission manifest " + manifest.string(),
                      "emissions");
  }
  EmissionSet set;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorKind::kIo, "malformed manifest line: " + line);
    }
    fs::path p = line.substr(tab + 1);
    if (p.is_relative()) p = fs::path(dir) / p;
    set[line.substr(0, tab)] = ReadEmissionFile(p.string(), wp.Symbols());
  }
  return set;
}

void WriteEmissions(const EmissionSet& set, const fs::path& dir) {
  fs::create_directories(dir);
  auto manifest = OpenOut(dir / "manifest.tsv");
  for (const auto& [id, em] : set) {
    const std::string file = id + ".em";
    WriteEmissionFile(em, (dir / file).string());
    manifest << id << '\t' << file << '\n';
  }
}

void WriteHyps(const Corpus& corpus, const SystemResult& r,
               const fs::path& path) {
  auto out = OpenOut(path);
  for (const auto& u : corpus.utterances) {
    auto it = r.best.find(u.id);
    WriteHypothesisJsonl(u.id, it == r.best.end() ? nullptr : &it->second,
                         out);
  }
}

std::string Now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Timestamps and timings live only here so that every other artifact is
// reproducible byte for byte.
void WriteRunManifest(const fs::path& dir, const std::string& stage,
                      const PipelineConfig& cfg, const OJson& timings) {
  OJson j;
  j["stage"] = stage;
  j["finished"] = Now();
  j["config"] = OJson::parse(PipelineConfigJson(cfg));
  j["timings_seconds"] = timings;
  OpenOut(dir / "run_manifest.json") << j.dump(2) << "\n";
}

OJson ReportRow(const std::string& name, const EvalReport& r) {
  auto pct = [](const WerStats& s) {
    return s.Defined() ? OJson(s.Wer()) : OJson(nullptr);
  };
  auto ceer = r.ceer.Ceer();
  return OJson{{"system", name},          {"wer_all", pct(r.all)},
               {"wer_a", pct(r.a)},       {"wer_b", pct(r.b)},
               {"ceer", ceer ? OJson(*ceer) : OJson(nullptr)},
               {"contacts", r.ceer.total},
               {"misrecognized", r.ceer.misrecognized}};
}

// ---------------------------------------------------------------------------
// Subcommands.

int CmdGenWorld(const PipelineConfig& cfg, std::ostream& out) {
  World world = GenerateWorld(cfg.world);
  WriteWorldDir(world, cfg.out_dir);
  out << "world: " << world.vocab.size() << " words, " << world.names.size()
      << " names, " << world.pieces.size() << " pieces -> " << cfg.out_dir
      << "\n";
  return 0;
}

int CmdSimulate(const PipelineConfig& cfg, bool emissions,
                std::ostream& out) {
  World world = LoadWorld(cfg);
  const WordpieceModel wp = WordpieceModel::FromPieces(world.pieces);
  const AcousticRealization acoustic(SpellingRules::Default(), wp);
  Corpus corpus = GenCorpus(cfg.corpus, world, wp, acoustic);
  const fs::path dir(cfg.out_dir);
  WriteCorpusDir(corpus, (dir / "corpus").string());
  out << "corpus: " << corpus.utterances.size() << " utterances -> "
      << (dir / "corpus").string() << "\n";
  if (emissions) {
    Models models(std::move(world), cfg);
    EmissionSet set = SimulateEmissions(corpus, models, NoiseFor(models, cfg),
                                        cfg.threads);
    WriteEmissions(set, dir / "emissions");
    out << "emissions: " << set.size() << " matrices -> "
        << (dir / "emissions").string() << "\n";
  }
  return 0;
}

int CmdTokenize(const PipelineConfig& cfg, const std::string& input,
                std::ostream& out) {
  World world = LoadWorld(cfg);
  const WordpieceModel wp = WordpieceModel::FromPieces(world.pieces);
  auto file = OpenOut(fs::path(cfg.out_dir) / "tokens.tsv");
  auto pieces_of = [&](const std::vector<std::string>& words) {
    std::vector<std::string> pieces;
    for (const auto& w : words) {
      for (auto& p : wp.Tokenize(ToLowerAscii(w))) pieces.push_back(std::move(p));
    }
    return Join(pieces, " ");
  };
  size_t n = 0;
  if (input.empty()) {
    for (const auto& u : LoadCorpus(cfg).utterances) {
      file << u.id << '\t' << pieces_of(u.words) << '\n';
      ++n;
    }
  } else {
    for (const auto& line : ReadTextLines(input)) {
      file << pieces_of(line) << '\n';
      ++n;
    }
  }
  out << "tokenized " << n << " lines\n";
  return 0;
}

int CmdTrainNgram(const PipelineConfig& cfg, const std::string& input,
                  std::optional<int> order, double prune, std::ostream& out) {
  NgramModel lm = [&] {
    if (input.empty()) return TrainWordLm(LoadWorld(cfg), order.value_or(cfg.lm_order));
    std::vector<TrainingSentence> sentences;
    for (auto& words : ReadTextLines(input)) {
      TrainingSentence s;
      s.tokens = std::move(words);
      sentences.push_back(std::move(s));
    }
    NgramTrainOptions opt;
    opt.order = order.value_or(cfg.lm_order);
    return TrainNgram(sentences, opt);
  }();
  if (prune > 0.0) lm = EntropyPrune(lm, prune);
  const fs::path path = fs::path(cfg.out_dir) / "lm.arpa";
  auto file = OpenOut(path);
  WriteArpa(lm, file);
  out << "lm: " << lm.NumEntries() << " entries -> " << path.string() << "\n";
  return 0;
}

int CmdTrainJoint(const PipelineConfig& cfg, const std::string& kind,
                  const std::string& input, std::ostream& out) {
  World world = LoadWorld(cfg);
  const WordpieceModel wp = WordpieceModel::FromPieces(world.pieces);
  const bool p2wp = kind == "p2wp";
  std::vector<TrainingPair> pairs;
  if (!input.empty()) {
    pairs = ReadTrainingPairsFile(input, p2wp ? &wp : nullptr);
  } else {
    pairs = p2wp ? world.P2wpPairs(wp) : world.G2pPairs();
  }
  JointModel model = TrainJointModel(pairs, p2wp ? cfg.p2wp : cfg.g2p);
  const fs::path path = fs::path(cfg.out_dir) / (kind + ".model");
  auto file = OpenOut(path);
  WriteJointModel(model, file);
  out << kind << ": " << model.NumUnits() << " units, " << model.NumEntries()
      << " entries -> " << path.string() << "\n";
  return 0;
}

int CmdPrior(const PipelineConfig& cfg, double bin_width, std::ostream& out) {
  World world = LoadWorld(cfg);
  const WordpieceModel wp = WordpieceModel::FromPieces(world.pieces);
  PriorTable prior = EstimatePrior(world, wp);
  const fs::path dir(cfg.out_dir);
  {
    auto file = OpenOut(dir / "prior.tsv");
    prior.Write(file);
  }
  auto hist = PriorHistogram(prior, bin_width);
  auto file = OpenOut(dir / "prior_hist.tsv");
  WriteHistogram(hist, file);
  out << "prior: " << prior.Costs().size() << " pieces -> "
      << (dir / "prior.tsv").string() << ", "
      << (dir / "prior_hist.tsv").string() << "\n";
  return 0;
}

int CmdBuildGraph(const PipelineConfig& cfg, bool normalize, bool no_classes,
                  std::ostream& out) {
  Models models(LoadWorld(cfg), cfg);
  const DecodingGraph& g = models.Graph(!no_classes, normalize);
  const fs::path path = fs::path(cfg.out_dir) / "graph.fst";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  WriteFstFile(g.fst, path.string());
  out << "graph: " << g.fst.NumStates() << " states, " << g.fst.NumArcs()
      << " arcs -> " << path.string() << "\n";
  return 0;
}

int CmdBuildBias(const PipelineConfig& cfg, const SystemOptions& s,
                 std::ostream& out) {
  SystemSpec spec = SelectSystem(s, cfg);
  if (!spec.personalized) {
    throw ConfigError("build-bias needs a personalized system", "no-bias");
  }
  Corpus corpus = LoadCorpus(cfg);
  Models models(LoadWorld(cfg), cfg);
  UserBiases biases = BuildUserBiases(models, corpus, spec, cfg);
  const fs::path dir = fs::path(cfg.out_dir) / "bias";
  size_t n = 0;
  for (const auto& [user, classes] : biases) {
    for (const auto& [cls, b] : classes) {
      fs::create_directories(dir / user);
      WriteBiasFstFile(b, (dir / user / (cls + ".fst")).string());
      ++n;
    }
  }
  out << "bias: " << n << " FSTs for " << biases.size() << " users -> "
      << dir.string() << "\n";
  return 0;
}

int CmdDecode(const PipelineConfig& cfg, const SystemOptions& s,
              const std::string& emissions_dir, std::ostream& out) {
  SystemSpec spec = SelectSystem(s, cfg);
  Corpus corpus = LoadCorpus(cfg);
  Models models(LoadWorld(cfg), cfg);
  EmissionSet set = emissions_dir.empty()
                        ? SimulateEmissions(corpus, models,
                                            NoiseFor(models, cfg), cfg.threads)
                        : ReadEmissionManifest(emissions_dir, models.Wp());
  SystemResult r = RunSystem(models, corpus, set, spec, cfg);
  const fs::path path = fs::path(cfg.out_dir) / "hyps.jsonl";
  WriteHyps(corpus, r, path);
  out << spec.name << ": " << r.hyps.size() << " hypotheses -> "
      << path.string() << "\n";
  return 0;
}

int CmdEvaluate(const PipelineConfig& cfg, const std::string& hyps_path,
                const std::string& system, std::ostream& out) {
  Corpus corpus = LoadCorpus(cfg);
  std::ifstream in(hyps_path);
  if (!in) throw ConfigError("cannot read " + hyps_path, "hyps");
  HypothesisMap hyps = ReadHypothesesJsonl(in);
  EvalReport report = Evaluate(corpus.utterances, hyps);
  const fs::path dir(cfg.out_dir);
  {
    auto file = OpenOut(dir / "report.tsv");
    WriteReportTsv({{system, report}}, file);
  }
  {
    auto file = OpenOut(dir / "report.json");
    WriteReportJson(system, report, file);
  }
  WriteReportTsv({{system, report}}, out);
  return 0;
}

int CmdLadder(const PipelineConfig& cfg, bool compare_lg,
              std::ostream& out) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  auto since = [](Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
  };
  OJson timings;
  Corpus corpus = LoadCorpus(cfg);
  auto t = Clock::now();
  Models models(LoadWorld(cfg), cfg);
  timings["train"] = since(t);
  t = Clock::now();
  EmissionSet emissions =
      SimulateEmissions(corpus, models, NoiseFor(models, cfg), cfg.threads);
  timings["simulate"] = since(t);

  const fs::path dir(cfg.out_dir);
  auto run = [&](const std::vector<SystemSpec>& systems,
                 const std::string& table) {
    std::vector<std::pair<std::string, EvalReport>> rows;
    OJson json = OJson::array();
    for (const auto& spec : systems) {
      SystemResult r = RunSystem(models, corpus, emissions, spec, cfg);
      timings[table + ":" + spec.name] = r.seconds;
      WriteHyps(corpus, r, dir / "hyps" / (Slug(table + " " + spec.name) + ".jsonl"));
      OJson row = ReportRow(spec.name, r.report);
      row["bias_warnings"] = r.bias_warnings;
      json.push_back(row);
      rows.emplace_back(spec.name, std::move(r.report));
    }
    {
      auto file = OpenOut(dir / (table + ".tsv"));
      WriteReportTsv(rows, file);
    }
    WriteReportTsv(rows, out);
    return json;
  };

  OJson summary;
  summary["utterances"] = corpus.utterances.size();
  summary["ladder"] = run(LadderSystems(), "ladder");
  if (compare_lg) {
    out << "\n";
    summary["lg_comparison"] = run(LgComparisonSystems(cfg.lg_compare_n_tok),
                                   "lg_compare");
    const size_t lg_arcs = models.Lg().NumArcs();
    const size_t p2wp_entries = models.P2wp().NumEntries();
    summary["sizes"] = {{"lg_baseline_arcs", lg_arcs},
                        {"p2wp_entries", p2wp_entries}};
    out << "\nsizes\tlg_baseline_arcs=" << lg_arcs
        << "\tp2wp_entries=" << p2wp_entries << "\n";
  }
  OpenOut(dir / "ladder.json") << summary.dump(2) << "\n";
  timings["total"] = since(t0);
  WriteRunManifest(dir, "ladder", cfg, timings);
  return 0;
}

void PrintError(std::ostream& err, const std::string& stage,
                const std::string& kind, const std::string& field,
                const std::string& message) {
  OJson j{{"status", "error"},
          {"stage", stage},
          {"kind", kind},
          {"field", field.empty() ? OJson(nullptr) : OJson(field)},
          {"message", message}};
  err << j.dump() << "\n";
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Contextual biasing for CTC decoding: pipeline driver"};
  app.require_subcommand(1);
  CommonOptions common;
  SystemOptions system;
  std::string input, kind = "p2wp", emissions_dir, hyps_path,
                     system_name = "system";
  std::optional<int> order;
  double prune = 0.0, bin_width = 1.0;
  bool no_emissions = false, normalize = false, no_classes = false,
       compare_lg = false;

  auto* gen_world = app.add_subcommand("gen-world", "synthetic language files");
  auto* simulate = app.add_subcommand("simulate", "corpus and emissions");
  simulate->add_flag("--no-emissions", no_emissions, "write the corpus only");
  auto* tokenize = app.add_subcommand("tokenize", "text to wordpieces");
  tokenize->add_option("--input", input, "text file (default: corpus)");
  auto* train_ngram = app.add_subcommand("train-ngram", "word LM to ARPA");
  train_ngram->add_option("--input", input, "text file (default: LM text)");
  train_ngram->add_option("--order", order, "n-gram order");
  train_ngram->add_option("--prune", prune, "entropy pruning threshold");
  auto* train_joint = app.add_subcommand("train-joint", "P2WP or G2P model");
  train_joint->add_option("--kind", kind, "p2wp or g2p")
      ->check(CLI::IsMember({"p2wp", "g2p"}));
  train_joint->add_option("--input", input, "training TSV (default: world)");
  auto* prior = app.add_subcommand("prior", "wordpiece prior and histogram");
  prior->add_option("--bin-width", bin_width, "histogram bin width (nats)")
      ->check(CLI::PositiveNumber);
  auto* build_graph = app.add_subcommand("build-graph", "T o L o G_uni");
  build_graph->add_flag("--normalize", normalize, "prior-normalized T");
  build_graph->add_flag("--no-classes", no_classes, "omit class loops");
  auto* build_bias = app.add_subcommand("build-bias", "per-user bias FSTs");
  AddSystem(build_bias, system);
  auto* decode = app.add_subcommand("decode", "hypotheses JSONL");
  AddSystem(decode, system);
  decode->add_option("--emissions", emissions_dir,
                     "emission directory with manifest.tsv (default: "
                     "simulate from the corpus)");
  auto* evaluate = app.add_subcommand("evaluate", "WER/CEER report");
  evaluate->add_option("--hyps", hyps_path, "hypotheses JSONL")->required();
  evaluate->add_option("--system", system_name, "row label");
  auto* ladder = app.add_subcommand("ladder", "system ladder comparison");
  ladder->add_flag("--compare-lg", compare_lg,
                   "also compare LG-baseline and P2WP tokenizations");
  for (auto* sub : app.get_subcommands({})) AddCommon(sub, common);

  std::string stage = "cli";
  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(args);
    CLI::App* sub = app.get_subcommands().front();
    stage = sub->get_name();
    PipelineConfig cfg = LoadConfig(common);
    if (sub == gen_world) {
      if (common.out.empty()) cfg.out_dir = cfg.data_dir;
      return CmdGenWorld(cfg, out);
    }
    if (sub == simulate) return CmdSimulate(cfg, !no_emissions, out);
    if (sub == tokenize) return CmdTokenize(cfg, input, out);
    if (sub == train_ngram) return CmdTrainNgram(cfg, input, order, prune, out);
    if (sub == train_joint) return CmdTrainJoint(cfg, kind, input, out);
    if (sub == prior) return CmdPrior(cfg, bin_width, out);
    if (sub == build_graph) return CmdBuildGraph(cfg, normalize, no_classes, out);
    if (sub == build_bias) return CmdBuildBias(cfg, system, out);
    if (sub == decode) return CmdDecode(cfg, system, emissions_dir, out);
    if (sub == evaluate) return CmdEvaluate(cfg, hyps_path, system_name, out);
    if (sub == ladder) return CmdLadder(cfg, compare_lg, out);
    return 2;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    PrintError(err, stage, "usage", "", e.what());
    return 2;
  } catch (const ConfigError& e) {
    PrintError(err, stage, ErrorKindName(e.kind()), e.field(), e.what());
    return 2;
  } catch (const Error& e) {
    PrintError(err, stage, ErrorKindName(e.kind()), "", e.what());
    return 1;
  } catch (const std::exception& e) {
    PrintError(err, stage, "internal", "", e.what());
    return 1;
  }
}

}  // namespace ctcbias
