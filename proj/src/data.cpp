// SPDX-License-Identifier: Apache-2.0

#include "agentpso/data.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <unordered_set>

namespace agentpso {

namespace {

using json = nlohmann::json;

constexpr std::uint32_t kSplitTag = 0x73706c74;   // "splt"
constexpr std::uint32_t kTrainTag = 0x7472616e;   // "tran"
constexpr std::uint32_t kMockTag = 0x6d6f636b;    // "mock"

std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); }
std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

// Unbiased draw from [0, bound) by rejection.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  // 2^64 mod bound; draws below it would over-represent small residues.
  const std::uint64_t threshold = (std::uint64_t{0} - bound) % bound;
  for (;;) {
    std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

template <typename T>
void shuffle_in_place(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = bounded(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

std::vector<std::size_t> split_permutation(std::size_t n, std::uint64_t seed) {
  std::seed_seq seq{lo32(seed), hi32(seed), kSplitTag};
  return seeded_permutation(n, seq);
}

std::string field_as_string(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw DataError("line " + std::to_string(line_no) + ": missing \"" + key + "\"");
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number()) return it->dump();
  throw DataError("line " + std::to_string(line_no) + ": \"" + key +
                  "\" must be a string or number");
}

}  // namespace

std::vector<std::size_t> seeded_permutation(std::size_t n, std::seed_seq& seq) {
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  shuffle_in_place(perm, rng);
  return perm;
}

std::vector<Problem> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read dataset file " + path.string());
  std::vector<Problem> problems;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw DataError("line " + std::to_string(line_no) + ": expected an object");
    Problem p{field_as_string(obj, "id", line_no), field_as_string(obj, "question", line_no),
              field_as_string(obj, "answer", line_no)};
    if (p.question.empty() || p.gold_answer.empty()) {
      throw DataError("line " + std::to_string(line_no) + ": question and answer must be non-empty");
    }
    if (!seen.insert(p.id).second) {
      throw DataError("line " + std::to_string(line_no) + ": duplicate id \"" + p.id + "\"");
    }
    problems.push_back(std::move(p));
  }
  return problems;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Problem>& problems) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write dataset file " + path.string());
  for (const auto& p : problems) {
    nlohmann::ordered_json obj;
    obj["id"] = p.id;
    obj["question"] = p.question;
    obj["answer"] = p.gold_answer;
    out << obj.dump() << '\n';
  }
  if (!out) throw DataError("failed while writing " + path.string());
}

DatasetPools split_pools(const std::vector<Problem>& problems, const RunConfig& config,
                         std::uint64_t seed) {
  const auto train = static_cast<std::size_t>(config.train_pool);
  const auto val = static_cast<std::size_t>(config.val_pool);
  const auto test = static_cast<std::size_t>(config.test_pool);
  if (problems.size() < train + val + test) {
    throw DataError("insufficient data: need " + std::to_string(train + val + test) +
                    " problems for train/validation/test pools of " + std::to_string(train) + "/" +
                    std::to_string(val) + "/" + std::to_string(test) + ", have " +
                    std::to_string(problems.size()));
  }
  auto perm = split_permutation(problems.size(), seed);
  DatasetPools pools;
  for (std::size_t k = 0; k < train + val + test; ++k) {
    const auto& p = problems[perm[k]];
    if (k < train) {
      pools.train.push_back(p);
    } else if (k < train + val) {
      pools.validation.push_back(p);
    } else {
      pools.test.push_back(p);
    }
  }
  return pools;
}

std::vector<Problem> sample_train_batch(const DatasetPools& pools, int iteration,
                                        std::uint64_t seed, int batch_size) {
  if (batch_size <= 0 || static_cast<std::size_t>(batch_size) > pools.train.size()) {
    throw DataError("training batch of " + std::to_string(batch_size) +
                    " does not fit a training pool of " + std::to_string(pools.train.size()));
  }
  std::seed_seq seq{lo32(seed), hi32(seed), static_cast<std::uint32_t>(iteration), kTrainTag};
  auto perm = seeded_permutation(pools.train.size(), seq);
  std::vector<Problem> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) batch.push_back(pools.train[perm[static_cast<std::size_t>(i)]]);
  return batch;
}

ValidationScheduler::ValidationScheduler(const std::vector<Problem>& validation, int val_batch,
                                         int cursor)
    : cursor_(cursor) {
  if (val_batch <= 0 || validation.empty() ||
      validation.size() % static_cast<std::size_t>(val_batch) != 0) {
    throw DataError("validation pool of " + std::to_string(validation.size()) +
                    " cannot be divided into subsets of " + std::to_string(val_batch));
  }
  for (std::size_t i = 0; i < validation.size(); i += static_cast<std::size_t>(val_batch)) {
    subsets_.emplace_back(validation.begin() + static_cast<std::ptrdiff_t>(i),
                          validation.begin() + static_cast<std::ptrdiff_t>(i + val_batch));
  }
  if (cursor_ < 0 || cursor_ >= subset_count()) {
    throw DataError("scheduler cursor " + std::to_string(cursor_) + " out of range");
  }
}

ValidationScheduler ValidationScheduler::advanced(bool any_perfect_score) const {
  ValidationScheduler next = *this;
  if (any_perfect_score) next.cursor_ = (cursor_ + 1) % subset_count();
  return next;
}

const std::vector<Problem>& current_val_subset(const ValidationScheduler& scheduler) {
  return scheduler.current();
}

ValidationScheduler advance_scheduler(const ValidationScheduler& scheduler, bool any_perfect_score) {
  return scheduler.advanced(any_perfect_score);
}

nlohmann::ordered_json split_manifest(const DatasetPools& pools, std::uint64_t seed) {
  auto ids = [](const std::vector<Problem>& pool) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : pool) arr.push_back(p.id);
    return arr;
  };
  nlohmann::ordered_json out;
  out["seed"] = seed;
  out["train"] = ids(pools.train);
  out["validation"] = ids(pools.validation);
  out["test"] = ids(pools.test);
  return out;
}

MockWorldSpec mock_world_spec(const RunConfig& config, int num_categories, int per_category) {
  MockWorldSpec spec;
  spec.num_categories = num_categories;
  spec.per_category = per_category;
  spec.seed = config.seed;
  spec.train_pool = config.train_pool;
  spec.val_pool = config.val_pool;
  spec.val_batch = config.val_batch;
  spec.test_pool = config.test_pool;
  return spec;
}

std::vector<Problem> generate_mock_dataset(const MockWorldSpec& spec) {
  const int m = spec.num_categories;
  if (m < 1) throw DataError("mock world needs at least one category");
  if (spec.per_category < 0) throw DataError("per_category must be non-negative");
  if (spec.val_batch <= 0 || spec.val_pool % spec.val_batch != 0) {
    throw DataError("val_pool must be a positive multiple of val_batch");
  }
  if (spec.val_batch % m != 0) {
    throw DataError("val_batch " + std::to_string(spec.val_batch) +
                    " is not divisible by the category count " + std::to_string(m) +
                    "; stratified validation subsets are impossible");
  }
  const auto total = static_cast<std::size_t>(m) * static_cast<std::size_t>(spec.per_category);
  const auto needed =
      static_cast<std::size_t>(spec.train_pool + spec.val_pool + spec.test_pool);
  if (total < needed) {
    throw DataError("mock world of " + std::to_string(total) + " problems cannot fill pools of " +
                    std::to_string(needed));
  }
  const int per_subset = spec.val_batch / m;
  const int subsets = spec.val_pool / spec.val_batch;
  if (per_subset * subsets > spec.per_category) {
    throw DataError("per_category too small for stratified validation subsets");
  }

  std::seed_seq seq{lo32(spec.seed), hi32(spec.seed), kMockTag};
  std::mt19937_64 rng(seq);

  std::vector<std::vector<Problem>> by_category(static_cast<std::size_t>(m));
  for (int k = 1; k <= m; ++k) {
    for (int i = 0; i < spec.per_category; ++i) {
      auto a = 1 + static_cast<int>(bounded(rng, 9));
      auto b = 1 + static_cast<int>(bounded(rng, 9));
      by_category[static_cast<std::size_t>(k - 1)].push_back(
          Problem{"mock-T" + std::to_string(k) + "-" + std::to_string(i),
                  "MOCK:T" + std::to_string(k) + ":" + std::to_string(a) + "+" + std::to_string(b),
                  std::to_string(a + b)});
    }
  }

  std::vector<std::size_t> next(static_cast<std::size_t>(m), 0);
  auto take = [&](std::size_t category) -> Problem& {
    return by_category[category][next[category]++];
  };
  auto take_round_robin = [&](int count) {
    std::vector<Problem> out;
    std::size_t category = 0;
    while (static_cast<int>(out.size()) < count) {
      if (next[category] < by_category[category].size()) out.push_back(take(category));
      category = (category + 1) % by_category.size();
    }
    return out;
  };

  // Validation first, since only it has a hard per-category requirement.
  std::vector<Problem> validation;
  for (int s = 0; s < subsets; ++s) {
    std::vector<Problem> block;
    for (std::size_t c = 0; c < by_category.size(); ++c) {
      for (int i = 0; i < per_subset; ++i) block.push_back(take(c));
    }
    shuffle_in_place(block, rng);
    validation.insert(validation.end(), block.begin(), block.end());
  }
  auto train = take_round_robin(spec.train_pool);
  shuffle_in_place(train, rng);
  auto test = take_round_robin(spec.test_pool);
  shuffle_in_place(test, rng);

  std::vector<Problem> layout;
  layout.reserve(total);
  layout.insert(layout.end(), train.begin(), train.end());
  layout.insert(layout.end(), validation.begin(), validation.end());
  layout.insert(layout.end(), test.begin(), test.end());
  for (std::size_t c = 0; c < by_category.size(); ++c) {
    while (next[c] < by_category[c].size()) layout.push_back(take(c));
  }

  // Invert the split shuffle so split_pools(seed) reproduces the layout.
  auto perm = split_permutation(layout.size(), spec.seed);
  std::vector<Problem> file_order(layout.size());
  for (std::size_t k = 0; k < layout.size(); ++k) file_order[perm[k]] = std::move(layout[k]);
  return file_order;
}

}  // namespace agentpso
