// SPDX-License-Identifier: Apache-2.0
//
// Problems, pool splitting, training-batch sampling, the validation-subset
// scheduler, and the offline "token world" dataset generator.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentpso/core.hpp"

namespace agentpso {

struct Problem {
  std::string id;
  std::string question;
  std::string gold_answer;

  bool operator==(const Problem&) const = default;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetPools {
  std::vector<Problem> train;
  std::vector<Problem> validation;
  std::vector<Problem> test;
};

/// Round-robin over disjoint contiguous blocks of the validation pool.
/// The cursor moves only when some candidate scores perfectly.
class ValidationScheduler {
 public:
  ValidationScheduler(const std::vector<Problem>& validation, int val_batch, int cursor = 0);

  int cursor() const noexcept { return cursor_; }
  int subset_count() const noexcept { return static_cast<int>(subsets_.size()); }
  const std::vector<Problem>& subset(int index) const { return subsets_.at(index); }

  const std::vector<Problem>& current() const { return subsets_.at(cursor_); }

  ValidationScheduler advanced(bool any_perfect_score) const;

 private:
  std::vector<std::vector<Problem>> subsets_;
  int cursor_;
};

/// One JSON object per line with keys id, question, answer. Blank lines are
/// skipped. Numbers are accepted for id and answer.
std::vector<Problem> load_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Problem>& problems);

/// Index permutation used for every seeded shuffle here. Built from
/// std::seed_seq + mt19937_64 and an explicit Fisher-Yates so the result is
/// identical across standard library implementations.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::seed_seq& seq);

/// Shuffles by seed, then slices train | validation | test.
DatasetPools split_pools(const std::vector<Problem>& problems, const RunConfig& config,
                         std::uint64_t seed);

/// Uniform without replacement; a pure function of (seed, iteration).
std::vector<Problem> sample_train_batch(const DatasetPools& pools, int iteration,
                                        std::uint64_t seed, int batch_size);

const std::vector<Problem>& current_val_subset(const ValidationScheduler& scheduler);
ValidationScheduler advance_scheduler(const ValidationScheduler& scheduler, bool any_perfect_score);

/// {"seed", "train": [ids], "validation": [ids], "test": [ids]}
nlohmann::ordered_json split_manifest(const DatasetPools& pools, std::uint64_t seed);

struct MockWorldSpec {
  int num_categories = 5;
  int per_category = 80;
  /// Must equal the run seed: the file is laid out so that split_pools with
  /// this seed yields stratified pools.
  std::uint64_t seed = 0;
  int train_pool = 100;
  int val_pool = 100;
  int val_batch = 20;
  int test_pool = 200;
};

MockWorldSpec mock_world_spec(const RunConfig& config, int num_categories, int per_category);

/// Questions "MOCK:Tk:a+b" with a, b in 1..9 and gold a+b. After
/// split_pools(seed) every validation subset holds val_batch/m problems per
/// category, and train and test are balanced round-robin.
std::vector<Problem> generate_mock_dataset(const MockWorldSpec& spec);

}  // namespace agentpso
