// SPDX-License-Identifier: Apache-2.0
//
// The mock reads the rendered prompt back through the template section
// headers, so its output depends on nothing but (purpose, prompt text).

#include <algorithm>
#include <cctype>
#include <regex>
#include <string>

#include <nlohmann/json.hpp>

#include "agentpso/backend.hpp"

namespace agentpso {

namespace {

using json = nlohmann::json;

bool is_word(char c) { return c == '_' || std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Text between `header` and the next `end`, searching from `from`.
std::string_view section(std::string_view prompt, std::string_view header, std::string_view end,
                         std::size_t from = 0) {
  auto start = prompt.find(header, from);
  if (start == std::string_view::npos) {
    throw BackendError("mock backend: prompt lacks section \"" + std::string(trim(header)) + "\"");
  }
  start += header.size();
  auto stop = end.empty() ? std::string_view::npos : prompt.find(end, start);
  if (stop == std::string_view::npos) stop = prompt.size();
  return prompt.substr(start, stop - start);
}

std::string with_blank_line(std::string_view header) { return "\n\n" + std::string(header); }

std::string add_line(const std::set<std::string>& tokens) {
  if (tokens.empty()) return "ADD";
  return "ADD " + join_tokens(tokens);
}

std::set<std::string> minus(std::set<std::string> a, const std::set<std::string>& b) {
  for (const auto& t : b) a.erase(t);
  return a;
}

void add_correct_reasoning_tokens(std::string_view records_json, std::set<std::string>& out) {
  json records;
  try {
    records = json::parse(records_json);
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("mock backend: observation is not JSON: ") + e.what());
  }
  if (!records.is_array()) throw BackendError("mock backend: observation is not a JSON array");
  for (const auto& r : records) {
    if (!r.is_object() || !r.value("correct", false)) continue;
    auto reasoning = r.value("reasoning", std::string{});
    auto tokens = extract_tokens(reasoning);
    out.insert(tokens.begin(), tokens.end());
  }
}

std::string mock_solve(std::string_view prompt) {
  using namespace headers;
  auto skill = section(prompt, kSolveSkill, kSolveSkillEnd);
  auto skill_end = prompt.find(kSolveSkillEnd);
  auto question = trim(section(prompt, kSolveProblem, kSolveProblemEnd, skill_end));

  int agent_id = 0;
  static const std::regex kAgentId(R"re("agent_id":\s*(-?\d+))re");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(prompt.begin(), prompt.end(), m, kAgentId)) {
    agent_id = std::stoi(m[1].str());
  }

  auto result = mock_world_answer(skill, question);
  nlohmann::ordered_json out;
  out["agent_id"] = agent_id;
  out["reasoning"] = result.reasoning;
  out["answer"] = result.answer;
  return out.dump();
}

std::string mock_reflect(std::string_view prompt) {
  using namespace headers;
  auto skill = section(prompt, kReflectSkill, with_blank_line(kReflectOwn));
  auto own = section(prompt, kReflectOwn, with_blank_line(kReflectPeers));
  auto peers = section(prompt, kReflectPeers, with_blank_line(kInstruction));
  std::set<std::string> seen;
  add_correct_reasoning_tokens(own, seen);
  add_correct_reasoning_tokens(peers, seen);
  return add_line(minus(std::move(seen), extract_tokens(skill)));
}

std::string mock_velocity(std::string_view prompt) {
  using namespace headers;
  std::set<std::string> sources;
  for (auto part : {section(prompt, kPreviousVelocity, with_blank_line(kDirection)),
                    section(prompt, kDirection, with_blank_line(kCurrentSkill)),
                    section(prompt, kPersonalBest, with_blank_line(kGlobalBest)),
                    section(prompt, kGlobalBest, with_blank_line(kInstruction))}) {
    auto tokens = extract_tokens(part);
    sources.insert(tokens.begin(), tokens.end());
  }
  auto current = section(prompt, kCurrentSkill, with_blank_line(kPersonalBest));
  return add_line(minus(std::move(sources), extract_tokens(current)));
}

std::string mock_skill_update(std::string_view prompt) {
  using namespace headers;
  auto current = section(prompt, kCurrentSkill, with_blank_line(kVelocity));
  auto velocity = section(prompt, kVelocity, with_blank_line(kInstruction));
  auto fresh = minus(extract_tokens(velocity), extract_tokens(current));

  std::string out(current);
  if (!fresh.empty()) {
    if (!out.empty()) out.push_back(' ');
    out += join_tokens(fresh);
  }

  static const std::regex kBudget(R"(at most (\d+) words)");
  std::match_results<std::string_view::const_iterator> m;
  auto instruction = section(prompt, kInstruction, "");
  if (std::regex_search(instruction.begin(), instruction.end(), m, kBudget)) {
    out = enforce_length(out, std::stoul(m[1].str()));
  }
  return out;
}

}  // namespace

std::set<std::string> extract_tokens(std::string_view text) {
  std::set<std::string> tokens;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != 'T' || (i > 0 && is_word(text[i - 1]))) continue;
    std::size_t j = i + 1;
    while (j < text.size() && is_digit(text[j])) ++j;
    if (j == i + 1 || (j < text.size() && is_word(text[j]))) continue;
    tokens.emplace(text.substr(i, j - i));
  }
  return tokens;
}

std::string join_tokens(const std::set<std::string>& tokens) {
  std::vector<std::string> sorted(tokens.begin(), tokens.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const std::string& a, const std::string& b) {
    // Compare numeric suffixes as numbers: shorter digit strings first,
    // then lexicographically. Leading zeros keep the set ordering.
    auto da = std::string_view(a).substr(1);
    auto db = std::string_view(b).substr(1);
    auto strip = [](std::string_view d) {
      while (d.size() > 1 && d.front() == '0') d.remove_prefix(1);
      return d;
    };
    auto sa = strip(da);
    auto sb = strip(db);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
    return a < b;
  });
  std::string out;
  for (const auto& t : sorted) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

MockAnswer mock_world_answer(std::string_view skill_text, std::string_view question) {
  static const std::regex kQuestion(R"(^MOCK:(T\d+):(-?\d{1,9})\+(-?\d{1,9})$)");
  std::match_results<std::string_view::const_iterator> m;
  auto q = trim(question);
  if (!std::regex_match(q.begin(), q.end(), m, kQuestion)) {
    throw BackendError("malformed mock question: \"" + std::string(q) + "\"");
  }
  const long long a = std::stoll(m[2].str());
  const long long b = std::stoll(m[3].str());
  if (a + b == 0) throw BackendError("malformed mock question: a+b must be non-zero");

  auto tokens = extract_tokens(skill_text);
  MockAnswer result;
  result.reasoning = tokens.empty() ? "USED" : "USED " + join_tokens(tokens);
  result.answer = tokens.contains(m[1].str()) ? std::to_string(a + b) : "0";
  return result;
}

ModelResponse MockBackend::complete(const ModelRequest& request) {
  std::string text;
  switch (request.purpose) {
    case Purpose::kSolve:
      text = mock_solve(request.user_text);
      break;
    case Purpose::kReflect:
      text = mock_reflect(request.user_text);
      break;
    case Purpose::kVelocity:
      text = mock_velocity(request.user_text);
      break;
    case Purpose::kSkillUpdate:
      text = mock_skill_update(request.user_text);
      break;
  }
  if (trim(text).empty()) throw BackendError("mock backend produced an empty completion");
  return ModelResponse{std::move(text), std::chrono::milliseconds{0}, 1};
}

}  // namespace agentpso
