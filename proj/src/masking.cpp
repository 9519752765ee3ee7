#include "cmbert/masking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cmbert/error.hpp"

namespace cmbert {

void MaskingSchedule::validate() const {
  if (!(0.0 < end_rate && end_rate <= start_rate && start_rate < 1.0))
    throw ConfigError("masking schedule requires 0 < end_rate <= start_rate < 1");
  if (total_steps <= 0) throw ConfigError("masking schedule requires total_steps > 0");
}

double masking_rate(const MaskingSchedule& schedule, std::int64_t step) {
  const double progress =
      std::min(static_cast<double>(step) / static_cast<double>(schedule.total_steps), 1.0);
  const double rate = schedule.start_rate + (schedule.end_rate - schedule.start_rate) * progress;
  return std::clamp(rate, schedule.end_rate, schedule.start_rate);
}

std::vector<std::string> load_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read lexicon file " + path);
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto begin = line.find_first_not_of(" \t\r");
    const auto end = line.find_last_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    terms.push_back(line.substr(begin, end - begin + 1));
  }
  return terms;
}

TokenPriorityTable priority_table_from_terms(const std::vector<std::string>& terms,
                                             const Tokenizer& tokenizer, double high_weight) {
  if (!(high_weight > 0.0)) throw ConfigError("priority weight must be positive");
  TokenPriorityTable table;
  const std::int32_t sep_word = tokenizer.vocab.id_of(special::kWordSep);
  for (const auto& term : terms) {
    for (std::int32_t id : tokenizer.encode(term)) {
      if (special::is_special(id) || id == sep_word) continue;
      table.weights[id] = high_weight;
    }
  }
  return table;
}

std::vector<std::size_t> select_mask_positions(const std::vector<std::int32_t>& token_ids,
                                               const TokenPriorityTable& priorities, double rate,
                                               Rng& rng) {
  if (!(rate > 0.0) || rate > 1.0)
    throw InputError("select_mask_positions: rate must be in (0, 1]");

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    if (!special::is_special(token_ids[i])) eligible.push_back(i);
  }
  if (eligible.empty()) return {};

  // Round-half-up target count.
  const auto target = static_cast<std::size_t>(
      std::floor(rate * static_cast<double>(eligible.size()) + 0.5));
  if (target == 0) return {};
  if (target >= eligible.size()) return eligible;

  // Weighted sampling without replacement via exponential race: position i
  // wins with key Exp(1)/w_i; the target smallest keys form the sample.
  struct Keyed {
    double key;
    std::size_t pos;
  };
  std::vector<Keyed> keys;
  keys.reserve(eligible.size());
  for (std::size_t pos : eligible) {
    const double w = priorities.weight(token_ids[pos]);
    double u;
    do {
      u = rng.uniform();
    } while (u <= 0.0);
    keys.push_back({-std::log(u) / w, pos});
  }
  std::sort(keys.begin(), keys.end(), [](const Keyed& a, const Keyed& b) {
    return a.key != b.key ? a.key < b.key : a.pos < b.pos;
  });
  std::vector<std::size_t> selected;
  selected.reserve(target);
  for (std::size_t i = 0; i < target; ++i) selected.push_back(keys[i].pos);
  std::sort(selected.begin(), selected.end());
  return selected;
}

std::vector<std::int32_t> corrupt(const std::vector<std::int32_t>& token_ids,
                                  const std::vector<std::size_t>& positions,
                                  std::int32_t vocab_size, Rng& rng) {
  if (vocab_size <= special::kCount)
    throw InputError("corrupt: vocabulary holds no regular tokens");
  std::vector<std::int32_t> out = token_ids;
  const auto n_regular = static_cast<std::uint64_t>(vocab_size - special::kCount);
  for (std::size_t pos : positions) {
    if (pos >= out.size() || special::is_special(out[pos]))
      throw InputError("corrupt: position not eligible");
    const double r = rng.uniform();
    if (r < 0.8) {
      out[pos] = special::kMask;
    } else if (r < 0.9) {
      out[pos] = special::kCount + static_cast<std::int32_t>(rng.uniform_below(n_regular));
    }  // else: keep the original token
  }
  return out;
}

MLMBatch collate(const std::vector<std::vector<std::int32_t>>& sequences, std::int64_t step,
                 const MaskingSchedule& schedule, const TokenPriorityTable& priorities,
                 std::int32_t vocab_size, Rng& rng, const CollateOptions& options) {
  if (sequences.empty()) throw InputError("collate: empty batch");
  schedule.validate();

  std::size_t width = 0;
  for (const auto& s : sequences) width = std::max(width, s.size());
  if (options.pad_to > 0) {
    if (width > static_cast<std::size_t>(options.pad_to))
      throw InputError("collate: sequence longer than pad_to");
    width = static_cast<std::size_t>(options.pad_to);
  }

  const double rate = masking_rate(schedule, step);
  MLMBatch batch;
  batch.batch = sequences.size();
  batch.seq = width;
  batch.input_ids.assign(batch.batch * width, special::kPad);
  batch.labels.assign(batch.batch * width, kIgnoreLabel);
  batch.valid.assign(batch.batch * width, 0);

  for (std::size_t r = 0; r < sequences.size(); ++r) {
    const auto& seq = sequences[r];
    const auto positions = select_mask_positions(seq, priorities, rate, rng);
    const auto corrupted = corrupt(seq, positions, vocab_size, rng);
    for (std::size_t c = 0; c < seq.size(); ++c) {
      batch.input_ids[r * width + c] = corrupted[c];
      batch.valid[r * width + c] = 1;
    }
    for (std::size_t pos : positions) {
      batch.labels[r * width + pos] = seq[pos];
      batch.mask_positions.emplace_back(r, pos);
    }
  }
  return batch;
}

}  // namespace cmbert
