// simulate.cc
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

#include "ctcbias/simulate.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_map>

#include "ctcbias/errors.h"
#include "ctcbias/text_util.h"

namespace ctcbias {

void NoiseConfig::Validate() const {
  if (frames_min < 1) throw ConfigError("frames_min must be >= 1", "frames_min");
  if (frames_max < frames_min) {
    throw ConfigError("frames_max must be >= frames_min", "frames_max");
  }
  if (!(blank_prob >= 0.0 && blank_prob <= 1.0)) {
    throw ConfigError("blank_prob must lie in [0, 1]", "blank_prob");
  }
  if (!(confusion_temp >= 0.0) || !std::isfinite(confusion_temp)) {
    throw ConfigError("confusion_temp must be finite and >= 0",
                      "confusion_temp");
  }
  if (!(margin > 0.0) || !std::isfinite(margin)) {
    throw ConfigError("margin must be finite and > 0", "margin");
  }
  if (!(internal_lm_weight >= 0.0) || !std::isfinite(internal_lm_weight)) {
    throw ConfigError("internal_lm_weight must be finite and >= 0",
                      "internal_lm_weight");
  }
  for (const auto& [p, c] : label_prior) {
    if (!std::isfinite(c)) {
      throw ConfigError("prior cost of " + p + " is not finite",
                        "label_prior");
    }
  }
  for (const auto& [p, row] : confusion_map) {
    for (const auto& [q, s] : row) {
      if (!(s >= 0.0 && s < 1.0)) {
        throw ConfigError("similarity of " + p + "/" + q + " outside [0, 1)",
                          "confusion_map");
      }
    }
  }
}

uint64_t DeriveSeed(uint64_t base, std::string_view key) {
  // FNV-1a over the key, mixed with the base through splitmix64.
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  uint64_t z = base + 0x9E3779B97F4A7C15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

EmissionMatrix SynthEmissions(const std::vector<std::string>& plan,
                              const std::shared_ptr<const SymbolTable>& labels,
                              const NoiseConfig& cfg) {
  cfg.Validate();
  if (!labels->HasBlank()) {
    throw ConfigError("label table has no blank", "vocab");
  }
  const Label blank = labels->Blank();
  std::vector<Label> ids;
  ids.reserve(plan.size());
  for (const auto& piece : plan) {
    Label id = labels->Find(piece);
    if (id == kNoLabel || id == kEpsilon || id == blank) {
      throw ConfigError("planted piece '" + piece + "' is not in the vocabulary",
                        "plan");
    }
    ids.push_back(id);
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> frames_dist(cfg.frames_min,
                                                 cfg.frames_max);
  std::bernoulli_distribution blank_dist(cfg.blank_prob);
  std::vector<Label> targets;
  Label prev = kNoLabel;
  if (blank_dist(rng)) targets.push_back(blank);
  for (Label id : ids) {
    if (id == prev) targets.push_back(blank);
    for (int i = frames_dist(rng); i > 0; --i) targets.push_back(id);
    if (blank_dist(rng)) {
      targets.push_back(blank);
      prev = kNoLabel;
    } else {
      prev = id;
    }
  }

  EmissionMatrix em(targets.size(), labels);
  const size_t v = em.NumColumns();
  // Noise-free scores per planted label, column c holding label c + 1.
  std::unordered_map<Label, std::vector<double>> base;
  auto base_row = [&](Label target) -> const std::vector<double>& {
    auto it = base.find(target);
    if (it != base.end()) return it->second;
    std::vector<double> row(v, -cfg.margin);
    row[static_cast<size_t>(target - 1)] = 0.0;
    auto m = cfg.confusion_map.find(labels->Symbol(target));
    if (m != cfg.confusion_map.end()) {
      for (const auto& [other, sim] : m->second) {
        Label l = labels->Find(other);
        if (l == kNoLabel || l == kEpsilon || l == target) continue;
        row[static_cast<size_t>(l - 1)] = -cfg.margin * (1.0 - sim);
      }
    }
    if (cfg.internal_lm_weight > 0.0) {
      for (const auto& [piece, cost] : cfg.label_prior) {
        Label l = labels->Find(piece);
        if (l == kNoLabel || l == kEpsilon || l == blank) continue;
        row[static_cast<size_t>(l - 1)] -= cfg.internal_lm_weight * cost;
      }
    }
    return base.emplace(target, std::move(row)).first->second;
  };
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> scores(v);
  for (size_t t = 0; t < targets.size(); ++t) {
    const auto& row = base_row(targets[t]);
    const size_t planted = static_cast<size_t>(targets[t] - 1);
    double max_score = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < v; ++c) {
      scores[c] = row[c];
      if (cfg.confusion_temp > 0.0 && c != planted) {
        scores[c] += cfg.confusion_temp * noise(rng);
      }
      max_score = std::max(max_score, scores[c]);
    }
    double z = 0.0;
    for (double s : scores) z += std::exp(s - max_score);
    const double log_z = max_score + std::log(z);
    float* out = em.MutableRow(t);
    for (size_t c = 0; c < v; ++c) {
      out[c] = static_cast<float>(log_z - scores[c]);
    }
  }
  return em;
}

// ---------------------------------------------------------------------------

SpellingRules SpellingRules::Default() {
  using P = Position;
  SpellingRules r;
  r.consonants = {"p", "b", "t", "d", "k", "g", "f", "v", "s", "z", "m",
                  "n", "l", "r", "w", "y", "hh", "ch", "sh", "th", "jh"};
  r.vowels = {"aa", "eh", "ih", "ow", "uw", "iy", "ey", "ay"};
  auto& s = r.spellings;
  s["p"] = {{"p"}, {"pp", P::kNonInitial}};
  s["b"] = {{"b"}, {"bb", P::kNonInitial}};
  s["t"] = {{"t"}, {"tt", P::kNonInitial}, {"pt", P::kInitial}};
  s["d"] = {{"d"}, {"dd", P::kNonInitial}};
  s["k"] = {{"k"}, {"c"}, {"ck", P::kNonInitial}, {"q"}, {"ch", P::kInitial}};
  s["g"] = {{"g"}, {"gh", P::kInitial}, {"gu", P::kInitial}};
  s["f"] = {{"f"}, {"ph"}, {"ff", P::kNonInitial}};
  s["v"] = {{"v"}, {"w", P::kInitial}};
  s["s"] = {{"s"}, {"c"}, {"ss", P::kNonInitial}, {"sc", P::kInitial}};
  s["z"] = {{"z"}, {"x", P::kInitial}, {"s", P::kNonInitial}};
  s["m"] = {{"m"}, {"mm", P::kNonInitial}};
  s["n"] = {{"n"}, {"kn", P::kInitial}, {"nn", P::kNonInitial}};
  s["l"] = {{"l"}, {"ll", P::kNonInitial}};
  s["r"] = {{"r"}, {"wr", P::kInitial}, {"rr", P::kNonInitial}};
  s["w"] = {{"w"}, {"wh"}};
  s["y"] = {{"y"}};
  s["hh"] = {{"h"}, {"wh", P::kInitial}};
  s["ch"] = {{"ch"}, {"tch", P::kNonInitial}, {"cz"}};
  s["sh"] = {{"sh"}, {"sch"}, {"ch"}};
  s["th"] = {{"th"}};
  s["jh"] = {{"j"}, {"g"}, {"dg", P::kNonInitial}};
  s["aa"] = {{"a"}, {"ah"}, {"o"}};
  s["eh"] = {{"e"}, {"ea"}, {"ae"}};
  s["ih"] = {{"i"}, {"y", P::kNonInitial}};
  s["ow"] = {{"o"}, {"oa"}, {"oe"}, {"ough", P::kNonInitial}, {"eau"}};
  s["uw"] = {{"u"}, {"oo"}, {"ew"}, {"ou"}};
  s["iy"] = {{"ee"}, {"ea"}, {"y", P::kNonInitial}, {"ey"}};
  s["ey"] = {{"ai"}, {"ay"}, {"ei"}, {"eigh"}};
  s["ay"] = {{"ie"}, {"y", P::kNonInitial}, {"igh"}, {"ye"}};
  return r;
}

bool SpellingRules::IsVowel(const std::string& phone) const {
  return std::find(vowels.begin(), vowels.end(), phone) != vowels.end();
}

std::string SpellingRules::Regular(const Pronunciation& pron) const {
  std::string out;
  for (const auto& ph : pron) {
    auto it = spellings.find(ph);
    if (it == spellings.end() || it->second.empty()) {
      throw ConfigError("phone '" + ph + "' has no spelling", "phones");
    }
    out += it->second.front().text;
  }
  return out;
}

Pronunciation SpellingRules::Read(std::string_view letters) const {
  // Grapheme table: regular uses first, then irregular ones.
  std::map<std::string, std::string> reading;
  for (const auto& [ph, alts] : spellings) {
    if (!alts.empty()) reading.emplace(alts.front().text, ph);
  }
  for (const auto& [ph, alts] : spellings) {
    for (size_t i = 1; i < alts.size(); ++i) reading.emplace(alts[i].text, ph);
  }
  size_t longest = 0;
  for (const auto& [g, ph] : reading) longest = std::max(longest, g.size());
  Pronunciation out;
  size_t pos = 0;
  while (pos < letters.size()) {
    size_t len = std::min(longest, letters.size() - pos);
    for (; len > 0; --len) {
      auto it = reading.find(std::string(letters.substr(pos, len)));
      if (it != reading.end()) {
        out.push_back(it->second);
        break;
      }
    }
    pos += std::max<size_t>(len, 1);
  }
  return out;
}

std::vector<std::string> AcousticRealization::Realize(
    const Pronunciation& pron) const {
  return wp_->Tokenize(rules_.Regular(pron));
}

namespace {

size_t EditDistance(const Pronunciation& a, const Pronunciation& b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1,
                         prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

ConfusionMap PhoneticConfusions(const WordpieceModel& wp,
                                const SpellingRules& rules, double max_sim,
                                double min_sim) {
  if (!(max_sim >= 0.0 && max_sim < 1.0)) {
    throw ConfigError("max_sim must lie in [0, 1)", "max_sim");
  }
  struct Read {
    std::string piece;
    bool boundary;
    Pronunciation phones;
  };
  std::vector<Read> reads;
  for (const auto& p : wp.Pieces()) {
    bool boundary = p.rfind(kWordBoundary, 0) == 0;
    std::string letters = boundary ? p.substr(kWordBoundary.size()) : p;
    Pronunciation phones = rules.Read(letters);
    if (!phones.empty()) reads.push_back({p, boundary, std::move(phones)});
  }
  ConfusionMap out;
  for (const auto& a : reads) {
    for (const auto& b : reads) {
      if (a.piece == b.piece) continue;
      const double len =
          static_cast<double>(std::max(a.phones.size(), b.phones.size()));
      double sim =
          max_sim * (1.0 - static_cast<double>(EditDistance(a.phones, b.phones)) / len);
      if (a.boundary != b.boundary) sim *= 0.5;
      if (sim >= min_sim && sim > 0.0) out[a.piece][b.piece] = sim;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void CorpusSpec::Validate() const {
  if (contacts == 0 && subset_a > 0) {
    throw ConfigError("subset A needs contacts", "contacts");
  }
  if (users == 0) throw ConfigError("users must be >= 1", "users");
  if (!(mismatch_fraction >= 0.0 && mismatch_fraction <= 1.0)) {
    throw ConfigError("mismatch_fraction must lie in [0, 1]",
                      "mismatch_fraction");
  }
  if (!(oov_fraction >= 0.0 && oov_fraction <= 1.0)) {
    throw ConfigError("oov_fraction must lie in [0, 1]", "oov_fraction");
  }
  if (!(two_word_rate >= 0.0 && two_word_rate <= 1.0)) {
    throw ConfigError("two_word_rate must lie in [0, 1]", "two_word_rate");
  }
}

std::string ContactSurface(const std::vector<const NameWord*>& words) {
  std::vector<std::string> parts;
  for (const NameWord* w : words) {
    std::string s = w->spelling;
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(s[0]));
    parts.push_back(std::move(s));
  }
  return Join(parts, " ");
}

namespace {

struct Contact {
  std::vector<const NameWord*> words;
  std::string surface;
};

// Draws `count` distinct contacts of which exactly round(count * fraction)
// mismatch / miss the lexicon.
std::vector<Contact> DrawContacts(size_t count, double mismatch_fraction,
                                  double oov_fraction, double two_word_rate,
                                  const World& world,
                                  std::set<std::string>& used,
                                  std::mt19937_64& rng) {
  std::vector<const NameWord*> first, last;
  for (const auto& n : world.names) (n.first ? first : last).push_back(&n);
  if (first.empty()) {
    throw ConfigError("name inventory has no first names", "names");
  }
  const auto n_mis = static_cast<size_t>(std::lround(count * mismatch_fraction));
  const auto n_oov = static_cast<size_t>(std::lround(count * oov_fraction));
  std::vector<bool> want_mis(count, false), want_oov(count, false);
  std::fill(want_mis.begin(), want_mis.begin() + n_mis, true);
  std::fill(want_oov.begin(), want_oov.begin() + n_oov, true);
  std::shuffle(want_mis.begin(), want_mis.end(), rng);
  std::shuffle(want_oov.begin(), want_oov.end(), rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Contact> out;
  for (size_t i = 0; i < count; ++i) {
    bool done = false;
    for (int attempt = 0; attempt < 20000 && !done; ++attempt) {
      Contact c;
      c.words.push_back(first[rng() % first.size()]);
      if (!last.empty() && unit(rng) < two_word_rate) {
        c.words.push_back(last[rng() % last.size()]);
      }
      bool mis = false, oov = false;
      for (const NameWord* w : c.words) {
        mis = mis || w->irregular;
        oov = oov || !w->in_lexicon;
      }
      if (mis != want_mis[i] || oov != want_oov[i]) continue;
      c.surface = ContactSurface(c.words);
      if (!used.insert(c.surface).second) continue;
      out.push_back(std::move(c));
      done = true;
    }
    if (!done) {
      throw ConfigError("name inventory too small for the requested contacts",
                        "contacts");
    }
  }
  return out;
}

}  // namespace

Corpus GenCorpus(const CorpusSpec& spec, const World& world,
                 const WordpieceModel& wp,
                 const AcousticRealization& acoustic) {
  spec.Validate();
  std::vector<std::string> templates;
  for (const auto& t : world.templates) {
    if (t.find("{CONTACT}") == std::string::npos) {
      throw ConfigError("template without {CONTACT} slot: " + t, "templates");
    }
    templates.push_back(t);
  }
  if (spec.subset_a > 0 && templates.empty()) {
    throw ConfigError("no templates for subset A", "templates");
  }
  if (spec.subset_b > 0 && world.heldout.empty()) {
    throw ConfigError("no held-out sentences for subset B", "heldout");
  }
  std::mt19937_64 rng(spec.seed);
  std::set<std::string> used;
  auto mentioned = DrawContacts(spec.contacts, spec.mismatch_fraction,
                                spec.oov_fraction, spec.two_word_rate, world,
                                used, rng);
  auto distractors = DrawContacts(spec.users * spec.distractors,
                                  spec.mismatch_fraction, spec.oov_fraction,
                                  spec.two_word_rate, world, used, rng);

  Corpus corpus;
  auto user_name = [](size_t u) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "user%02zu", u + 1);
    return std::string(buf);
  };
  std::vector<size_t> owner(mentioned.size());
  for (size_t i = 0; i < mentioned.size(); ++i) {
    owner[i] = i % spec.users;
    corpus.user_entities[user_name(owner[i])][world.cls].push_back(
        mentioned[i].surface);
  }
  for (size_t i = 0; i < distractors.size(); ++i) {
    corpus.user_entities[user_name(i % spec.users)][world.cls].push_back(
        distractors[i].surface);
  }
  for (size_t u = 0; u < spec.users; ++u) {
    auto& list = corpus.user_entities[user_name(u)][world.cls];
    std::sort(list.begin(), list.end());
  }

  std::vector<Utterance> utts;
  // Subset A: every contact mentioned in turn, in shuffled order.
  std::vector<size_t> order(mentioned.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (size_t k = 0; k < spec.subset_a; ++k) {
    const size_t ci = order[k % order.size()];
    const Contact& c = mentioned[ci];
    Utterance u;
    u.user = user_name(owner[ci]);
    const std::string& tpl = templates[rng() % templates.size()];
    for (const auto& tok : SplitWhitespace(tpl)) {
      if (tok == "{CONTACT}") {
        EntitySpan span;
        span.cls = world.cls;
        span.surface = c.surface;
        span.begin = u.words.size();
        for (size_t i = 0; i < c.words.size(); ++i) {
          u.words.push_back(SplitWhitespace(c.surface)[i]);
          for (auto& p : acoustic.Realize(c.words[i]->pron)) {
            u.planted.push_back(std::move(p));
          }
        }
        span.end = u.words.size();
        u.entities.push_back(std::move(span));
      } else {
        u.words.push_back(tok);
        for (auto& p : wp.Tokenize(tok)) u.planted.push_back(std::move(p));
      }
    }
    utts.push_back(std::move(u));
  }
  // Subset B: held-out sentences, without replacement while possible.
  std::vector<size_t> pool(world.heldout.size());
  for (size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  std::shuffle(pool.begin(), pool.end(), rng);
  for (size_t k = 0; k < spec.subset_b; ++k) {
    Utterance u;
    u.user = user_name(k % spec.users);
    u.words = world.heldout[pool[k % pool.size()]];
    for (const auto& w : u.words) {
      for (auto& p : wp.Tokenize(w)) u.planted.push_back(std::move(p));
    }
    utts.push_back(std::move(u));
  }
  std::shuffle(utts.begin(), utts.end(), rng);
  for (size_t i = 0; i < utts.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "utt%04zu", i + 1);
    utts[i].id = buf;
  }
  corpus.utterances = std::move(utts);
  ValidateCorpus(corpus);
  return corpus;
}

}  // namespace ctcbias
