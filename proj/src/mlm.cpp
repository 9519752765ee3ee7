#include "cmbert/mlm.hpp"

#include <cmath>

#include "cmbert/error.hpp"
#include "cmbert/threading.hpp"

namespace cmbert {

template <typename T>
double mlm_loss(const Mat<T>& logits, const std::vector<std::int32_t>& labels) {
  if (logits.rows != labels.size()) throw InputError("mlm_loss: logits/labels mismatch");
  if (logits.rows == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const T* row = logits.row(i);
    const std::int32_t label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= logits.cols)
      throw InputError("mlm_loss: label out of range");
    const double m = static_cast<double>(kern::reduce_max(row, logits.cols));
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c)
      z += std::exp(static_cast<double>(row[c]) - m);
    total += (m + std::log(z)) - static_cast<double>(row[static_cast<std::size_t>(label)]);
  }
  return total / static_cast<double>(logits.rows);
}

template <typename T>
Mat<T> mlm_loss_backward(const Mat<T>& logits, const std::vector<std::int32_t>& labels) {
  Mat<T> d(logits.rows, logits.cols);
  if (logits.rows == 0) return d;
  const double inv_n = 1.0 / static_cast<double>(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const T* row = logits.row(i);
    T* drow = d.row(i);
    const double m = static_cast<double>(kern::reduce_max(row, logits.cols));
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c)
      z += std::exp(static_cast<double>(row[c]) - m);
    for (std::size_t c = 0; c < logits.cols; ++c)
      drow[c] = static_cast<T>(std::exp(static_cast<double>(row[c]) - m) / z * inv_n);
    drow[static_cast<std::size_t>(labels[i])] -= static_cast<T>(inv_n);
  }
  return d;
}

template <typename T>
MlmObjectiveResult<T> mlm_objective(const ParameterStore<T>& params, const MLMBatch& batch,
                                    const ForwardOptions& opts, ParameterStore<T>* grads) {
  MlmObjectiveResult<T> result;
  result.n_masked = batch.mask_positions.size();
  result.logits = Mat<T>(result.n_masked, static_cast<std::size_t>(params.config.vocab_size));
  result.labels.resize(result.n_masked);
  if (result.n_masked == 0) return result;  // nothing to predict; no-op gradient

  // Per-row views of the flat batch.
  struct Row {
    std::vector<std::int32_t> ids;
    std::vector<std::uint8_t> valid;
    std::vector<std::int32_t> mask_cols;
    std::size_t logit_offset = 0;  // first row of this sequence in result.logits
  };
  std::vector<Row> rows(batch.batch);
  {
    std::size_t offset = 0;
    std::size_t cursor = 0;
    for (std::size_t r = 0; r < batch.batch; ++r) {
      Row& row = rows[r];
      row.ids.assign(batch.input_ids.begin() + r * batch.seq,
                     batch.input_ids.begin() + (r + 1) * batch.seq);
      row.valid.assign(batch.valid.begin() + r * batch.seq,
                       batch.valid.begin() + (r + 1) * batch.seq);
      row.logit_offset = offset;
      while (cursor < batch.mask_positions.size() && batch.mask_positions[cursor].first == r) {
        row.mask_cols.push_back(static_cast<std::int32_t>(batch.mask_positions[cursor].second));
        ++offset;
        ++cursor;
      }
    }
    if (offset != result.n_masked)
      throw std::logic_error("mlm_objective: mask positions not grouped by row");
  }

  for (std::size_t i = 0; i < result.n_masked; ++i) {
    const auto [r, c] = batch.mask_positions[i];
    result.labels[i] = batch.labels[r * batch.seq + c];
  }

  // Forward all rows (in parallel), fill the gathered logits.
  std::vector<SeqCache<T>> caches(grads ? batch.batch : 0);
  std::vector<Mat<T>> hiddens(batch.batch);
  parallel_for(batch.batch, [&](std::size_t r) {
    const Row& row = rows[r];
    hiddens[r] = encoder_forward_seq(params, std::span<const std::int32_t>(row.ids), row.valid,
                                     opts, grads ? &caches[r] : nullptr);
    const Mat<T> row_logits =
        mlm_logits(hiddens[r], std::span<const std::int32_t>(row.mask_cols),
                   params.token_embedding);
    for (std::size_t i = 0; i < row_logits.rows; ++i)
      std::copy(row_logits.row(i), row_logits.row(i) + row_logits.cols,
                result.logits.row(row.logit_offset + i));
  });

  result.loss = mlm_loss(result.logits, result.labels);

  if (grads) {
    const Mat<T> d_logits = mlm_loss_backward(result.logits, result.labels);
    const std::size_t chunks = chunk_count(batch.batch);
    std::vector<ParameterStore<T>> partials;
    partials.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) partials.push_back(clone_zeroed(*grads));

    parallel_chunks(batch.batch, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
      ParameterStore<T>& acc = partials[chunk];
      for (std::size_t r = begin; r < end; ++r) {
        const Row& row = rows[r];
        Mat<T> d_row_logits(row.mask_cols.size(), d_logits.cols);
        for (std::size_t i = 0; i < d_row_logits.rows; ++i)
          std::copy(d_logits.row(row.logit_offset + i),
                    d_logits.row(row.logit_offset + i) + d_logits.cols, d_row_logits.row(i));
        Mat<T> d_hidden(hiddens[r].rows, hiddens[r].cols);
        mlm_logits_backward(hiddens[r], std::span<const std::int32_t>(row.mask_cols),
                            params.token_embedding, d_row_logits, d_hidden,
                            acc.token_embedding);
        encoder_backward_seq(params, caches[r], d_hidden, acc);
      }
    });

    // Reduce in chunk order: deterministic for a fixed worker count.
    auto targets = grads->named_tensors();
    for (std::size_t c = 0; c < chunks; ++c) {
      auto source = partials[c].named_tensors();
      for (std::size_t t = 0; t < targets.size(); ++t)
        kern::axpy(T(1), source[t].data, targets[t].data, targets[t].size());
    }
  }
  return result;
}

template double mlm_loss(const Mat<float>&, const std::vector<std::int32_t>&);
template double mlm_loss(const Mat<double>&, const std::vector<std::int32_t>&);
template Mat<float> mlm_loss_backward(const Mat<float>&, const std::vector<std::int32_t>&);
template Mat<double> mlm_loss_backward(const Mat<double>&, const std::vector<std::int32_t>&);
template MlmObjectiveResult<float> mlm_objective(const ParameterStore<float>&, const MLMBatch&,
                                                 const ForwardOptions&, ParameterStore<float>*);
template MlmObjectiveResult<double> mlm_objective(const ParameterStore<double>&, const MLMBatch&,
                                                  const ForwardOptions&, ParameterStore<double>*);

}  // namespace cmbert
