#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cmbert/rng.hpp"
#include "cmbert/special_tokens.hpp"
#include "cmbert/tokenizer.hpp"

namespace cmbert {

inline constexpr std::int32_t kIgnoreLabel = -100;

// Linear corruption-rate decay from start_rate at step 0 to end_rate at
// total_steps, clamped thereafter.
struct MaskingSchedule {
  double start_rate = 0.30;
  double end_rate = 0.15;
  std::int64_t total_steps = 2000;

  void validate() const;  // 0 < end_rate <= start_rate < 1
};

double masking_rate(const MaskingSchedule& schedule, std::int64_t step);

// Per-token selection weights. Special tokens are excluded by the
// never-mask rule before weights apply, so they carry no entry here.
struct TokenPriorityTable {
  std::unordered_map<std::int32_t, double> weights;
  double default_weight = 1.0;

  double weight(std::int32_t id) const {
    auto it = weights.find(id);
    return it == weights.end() ? default_weight : it->second;
  }
};

// Tokenizes each lexicon term and gives every resulting regular token the
// high weight. Separator and special ids never inherit it.
TokenPriorityTable priority_table_from_terms(const std::vector<std::string>& terms,
                                             const Tokenizer& tokenizer, double high_weight);

// Lexicon file: UTF-8, one term per line, '#' starts a comment.
std::vector<std::string> load_lexicon(const std::string& path);

// Weighted sampling without replacement of round(rate * n_eligible)
// positions among non-special, non-padding tokens, inclusion probability
// proportional to token weight. Returns ascending positions.
std::vector<std::size_t> select_mask_positions(const std::vector<std::int32_t>& token_ids,
                                               const TokenPriorityTable& priorities, double rate,
                                               Rng& rng);

// 80% -> [MASK], 10% -> uniform random non-special id, 10% -> unchanged, at
// each selected position.
std::vector<std::int32_t> corrupt(const std::vector<std::int32_t>& token_ids,
                                  const std::vector<std::size_t>& positions,
                                  std::int32_t vocab_size, Rng& rng);

struct MLMBatch {
  std::size_t batch = 0, seq = 0;
  std::vector<std::int32_t> input_ids;  // corrupted, row-major
  std::vector<std::int32_t> labels;     // original id at masked positions, else kIgnoreLabel
  std::vector<std::uint8_t> valid;      // 1 = real token, 0 = padding
  std::vector<std::pair<std::size_t, std::size_t>> mask_positions;  // (row, col), ascending

  std::int32_t id_at(std::size_t r, std::size_t c) const { return input_ids[r * seq + c]; }
};

struct CollateOptions {
  std::int64_t pad_to = 0;  // 0: pad to the longest sequence in the batch
};

// Pads, selects, corrupts and labels one batch. Throws InputError on an
// empty batch or a sequence longer than pad_to.
MLMBatch collate(const std::vector<std::vector<std::int32_t>>& sequences, std::int64_t step,
                 const MaskingSchedule& schedule, const TokenPriorityTable& priorities,
                 std::int32_t vocab_size, Rng& rng, const CollateOptions& options = {});

}  // namespace cmbert
