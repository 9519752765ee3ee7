#pragma once

#include <cstdint>
#include <vector>

#include "cmbert/encoder.hpp"
#include "cmbert/masking.hpp"

namespace cmbert {

// Mean over masked positions of -log softmax(logits)[label]. Stable
// log-sum-exp. n_masked == 0 yields 0.
template <typename T>
double mlm_loss(const Mat<T>& logits, const std::vector<std::int32_t>& labels);

// d(loss)/d(logits) for the mean-reduction loss: (softmax - onehot) / n.
template <typename T>
Mat<T> mlm_loss_backward(const Mat<T>& logits, const std::vector<std::int32_t>& labels);

template <typename T>
struct MlmObjectiveResult {
  double loss = 0.0;
  std::size_t n_masked = 0;
  Mat<T> logits;                     // [n_masked x vocab], batch mask order
  std::vector<std::int32_t> labels;  // [n_masked]
};

// Full objective over one collated batch: forward every row, gather masked
// logits, compute the loss and, when grads != nullptr, run the reverse pass
// accumulating parameter gradients. Rows are processed in parallel with
// per-chunk gradient buffers reduced in chunk order, so results are
// reproducible for a fixed worker count.
template <typename T>
MlmObjectiveResult<T> mlm_objective(const ParameterStore<T>& params, const MLMBatch& batch,
                                    const ForwardOptions& opts, ParameterStore<T>* grads);

extern template MlmObjectiveResult<float> mlm_objective(const ParameterStore<float>&,
                                                        const MLMBatch&, const ForwardOptions&,
                                                        ParameterStore<float>*);
extern template MlmObjectiveResult<double> mlm_objective(const ParameterStore<double>&,
                                                         const MLMBatch&, const ForwardOptions&,
                                                         ParameterStore<double>*);

}  // namespace cmbert
