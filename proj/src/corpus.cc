// corpus.cc
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

#include "ctcbias/corpus.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"

#include "ctcbias/errors.h"
#include "ctcbias/text_util.h"

namespace ctcbias {

std::string Utterance::Text() const { return Join(words, " "); }

void ValidateCorpus(const Corpus& corpus) {
  std::set<std::string> ids;
  for (const auto& u : corpus.utterances) {
    if (u.id.empty()) throw ConfigError("utterance without id", "id");
    if (!ids.insert(u.id).second) {
      throw ConfigError("duplicate utterance id " + u.id, "id");
    }
    for (const auto& e : u.entities) {
      if (e.begin >= e.end || e.end > u.words.size()) {
        throw ConfigError("utterance " + u.id + ": span out of range",
                          "span");
      }
      std::vector<std::string> spanned(
          u.words.begin() + static_cast<std::ptrdiff_t>(e.begin),
          u.words.begin() + static_cast<std::ptrdiff_t>(e.end));
      if (Join(spanned, " ") != NormalizeWhitespace(e.surface)) {
        throw ConfigError("utterance " + u.id + ": surface \"" + e.surface +
                              "\" does not match its span",
                          "surface");
      }
    }
  }
}

std::vector<Utterance> ReadUtterancesJsonl(std::istream& in) {
  std::vector<Utterance> utts;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (NormalizeWhitespace(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Utterance u;
      u.id = j.at("id").get<std::string>();
      u.words = SplitWhitespace(j.at("text").get<std::string>());
      if (j.contains("entities")) {
        for (const auto& e : j.at("entities")) {
          EntitySpan span;
          span.cls = e.at("class").get<std::string>();
          span.surface = e.at("surface").get<std::string>();
          const auto& s = e.at("span");
          span.begin = s.at(0).get<size_t>();
          span.end = s.at(1).get<size_t>();
          u.entities.push_back(std::move(span));
        }
      }
      if (j.contains("user")) u.user = j.at("user").get<std::string>();
      if (j.contains("planted")) {
        u.planted = j.at("planted").get<std::vector<std::string>>();
      }
      utts.push_back(std::move(u));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kIo, "corpus line " + std::to_string(line_no) +
                                      ": " + e.what());
    }
  }
  return utts;
}

void WriteUtterancesJsonl(const std::vector<Utterance>& utts,
                          std::ostream& out) {
  for (const auto& u : utts) {
    nlohmann::ordered_json j;
    j["id"] = u.id;
    j["text"] = u.Text();
    auto ents = nlohmann::ordered_json::array();
    for (const auto& e : u.entities) {
      nlohmann::ordered_json je;
      je["class"] = e.cls;
      je["surface"] = e.surface;
      je["span"] = {e.begin, e.end};
      ents.push_back(std::move(je));
    }
    j["entities"] = std::move(ents);
    if (!u.user.empty()) j["user"] = u.user;
    if (!u.planted.empty()) j["planted"] = u.planted;
    out << j.dump() << '\n';
  }
}

Corpus ReadCorpusDir(const std::string& dir) {
  namespace fs = std::filesystem;
  Corpus corpus;
  {
    std::ifstream in(fs::path(dir) / "corpus.jsonl");
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + dir + "/corpus.jsonl");
    corpus.utterances = ReadUtterancesJsonl(in);
  }
  fs::path users = fs::path(dir) / "users.json";
  if (fs::exists(users)) {
    std::ifstream in(users);
    try {
      nlohmann::json j;
      in >> j;
      corpus.user_entities = j.get<decltype(corpus.user_entities)>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kIo, "users.json: " + std::string(e.what()));
    }
  }
  ValidateCorpus(corpus);
  return corpus;
}

void WriteCorpusDir(const Corpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "corpus.jsonl");
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + dir);
    WriteUtterancesJsonl(corpus.utterances, out);
  }
  std::ofstream out(fs::path(dir) / "users.json");
  nlohmann::json j = corpus.user_entities;
  out << j.dump(2) << '\n';
}

}  // namespace ctcbias
