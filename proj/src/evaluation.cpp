#include "cmbert/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "cmbert/attention.hpp"
#include "cmbert/error.hpp"
#include "cmbert/rng.hpp"
#include "cmbert/threading.hpp"
#include "cmbert/training.hpp"
#include "cmbert/workspace.hpp"

namespace cmbert {

TopKReport topk_accuracy(const Mat<float>& logits, const std::vector<std::int32_t>& labels,
                         const std::vector<std::int64_t>& ks) {
  if (logits.rows == 0) throw InputError("topk_accuracy: no rows");
  if (logits.rows != labels.size()) throw InputError("topk_accuracy: logits/labels mismatch");
  for (auto k : ks) {
    if (k < 1 || static_cast<std::size_t>(k) > logits.cols)
      throw InputError("topk_accuracy: k=" + std::to_string(k) + " outside [1, vocab]");
  }
  TopKReport report;
  report.k_values = ks;
  report.accuracy.assign(ks.size(), 0.0);
  report.n_masked = logits.rows;

  for (std::size_t i = 0; i < logits.rows; ++i) {
    const float* row = logits.row(i);
    const auto label = static_cast<std::size_t>(labels[i]);
    if (label >= logits.cols) throw InputError("topk_accuracy: label out of range");
    const float ref = row[label];
    // Rank = number of tokens strictly ahead of the label; ties go to the
    // lower token id.
    std::size_t rank = 0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      if (row[j] > ref || (row[j] == ref && j < label)) ++rank;
    }
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      if (rank < static_cast<std::size_t>(ks[ki])) report.accuracy[ki] += 1.0;
    }
  }
  for (auto& a : report.accuracy) a /= static_cast<double>(logits.rows);
  return report;
}

TopKReport mlm_eval(const ParameterStore<float>& params, const Tokenizer& tokenizer,
                    const std::vector<std::string>& heldout, const TokenPriorityTable& priorities,
                    const EvalOptions& options) {
  if (heldout.empty()) throw InputError("mlm_eval: empty held-out set");

  std::vector<std::vector<std::int32_t>> docs(heldout.size());
  parallel_for(heldout.size(), [&](std::size_t i) {
    docs[i] = tokenizer.encode(heldout[i]);
    const auto cap = static_cast<std::size_t>(params.config.max_seq_len);
    if (docs[i].size() > cap) {
      docs[i].resize(cap);
      docs[i].back() = special::kSep;
    }
  });

  MaskingSchedule frozen{options.mask_rate, options.mask_rate, 1};
  double loss_sum = 0.0;
  std::size_t n_masked = 0;
  std::vector<double> hit(options.k_values.size(), 0.0);

  for (std::size_t begin = 0; begin < docs.size();
       begin += static_cast<std::size_t>(options.batch_size)) {
    const std::size_t end =
        std::min(docs.size(), begin + static_cast<std::size_t>(options.batch_size));
    std::vector<std::vector<std::int32_t>> chunk(docs.begin() + begin, docs.begin() + end);
    Rng rng = Rng::stream(options.seed, "eval-mask", begin);
    const MLMBatch batch =
        collate(chunk, /*step=*/0, frozen, priorities, params.config.vocab_size, rng);
    if (batch.mask_positions.empty()) continue;

    const MlmObjectiveResult<float> obj =
        mlm_objective<float>(params, batch, ForwardOptions{}, nullptr);
    const TopKReport part = topk_accuracy(obj.logits, obj.labels, options.k_values);
    for (std::size_t ki = 0; ki < hit.size(); ++ki)
      hit[ki] += part.accuracy[ki] * static_cast<double>(obj.n_masked);
    loss_sum += obj.loss * static_cast<double>(obj.n_masked);
    n_masked += obj.n_masked;
  }
  if (n_masked == 0) throw InputError("mlm_eval: no maskable positions in the held-out set");

  TopKReport report;
  report.k_values = options.k_values;
  report.n_masked = n_masked;
  report.mean_loss = loss_sum / static_cast<double>(n_masked);
  for (auto h : hit) report.accuracy.push_back(h / static_cast<double>(n_masked));
  return report;
}

EmbeddingResult extract_cls_embeddings(const ParameterStore<float>& params,
                                       const Tokenizer& tokenizer,
                                       const std::vector<std::string>& texts) {
  if (texts.empty()) throw InputError("extract_cls_embeddings: no texts");
  EmbeddingResult result;
  result.embeddings = Mat<float>(texts.size(), static_cast<std::size_t>(params.config.d_model));
  std::vector<std::string> warnings(texts.size());
  parallel_for(texts.size(), [&](std::size_t i) {
    auto ids = tokenizer.encode(texts[i]);
    const auto cap = static_cast<std::size_t>(params.config.max_seq_len);
    if (ids.size() > cap) {
      ids.resize(cap);
      ids.back() = special::kSep;
      warnings[i] = "text " + std::to_string(i) + " truncated to " + std::to_string(cap) +
                    " tokens";
    }
    const std::vector<std::uint8_t> valid(ids.size(), 1);
    const Mat<float> hidden = encoder_forward_seq(params, std::span<const std::int32_t>(ids),
                                                  valid, ForwardOptions{});
    std::copy(hidden.row(0), hidden.row(0) + hidden.cols, result.embeddings.row(i));
  });
  for (auto& w : warnings)
    if (!w.empty()) result.warnings.push_back(std::move(w));
  return result;
}

// ---------------------------------------------------------------------------
// PCA (Jacobi eigensolver on the sample covariance)

namespace {

void jacobi_eigen(Mat<double>& a, Mat<double>& vecs) {
  const std::size_t n = a.rows;
  vecs = Mat<double>(n, n);
  for (std::size_t i = 0; i < n; ++i) vecs.at(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off < 1e-26) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a.at(i, p), aiq = a.at(i, q);
          a.at(i, p) = c * aip - s * aiq;
          a.at(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a.at(p, i), aqi = a.at(q, i);
          a.at(p, i) = c * api - s * aqi;
          a.at(q, i) = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = vecs.at(i, p), viq = vecs.at(i, q);
          vecs.at(i, p) = c * vip - s * viq;
          vecs.at(i, q) = s * vip + c * viq;
        }
      }
    }
  }
}

}  // namespace

PcaResult pca(const Mat<double>& x, std::size_t out_dims) {
  const std::size_t n = x.rows, d = x.cols;
  if (n < 2) throw InputError("pca: need at least two points");
  if (out_dims > std::min(n, d)) throw InputError("pca: out_dims exceeds min(n, d)");

  Mat<double> centered = x;
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += x.at(r, c);
    mean /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) centered.at(r, c) -= mean;
  }

  Mat<double> cov(d, d);
  matmul_tn(centered, centered, cov);
  for (auto& v : cov.data) v /= static_cast<double>(n - 1);

  Mat<double> vecs;
  jacobi_eigen(cov, vecs);

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return cov.at(a, a) > cov.at(b, b); });

  PcaResult result;
  for (std::size_t j = 0; j < d; ++j) result.eigenvalues.push_back(cov.at(order[j], order[j]));

  const double lead = std::max(result.eigenvalues.front(), 0.0);
  std::size_t rank = 0;
  for (auto ev : result.eigenvalues)
    if (ev > 1e-12 * std::max(lead, 1e-300)) ++rank;
  std::size_t kept = out_dims;
  if (rank < out_dims) {
    kept = std::max<std::size_t>(rank, 1);
    result.warnings.push_back("data rank " + std::to_string(rank) + " below requested " +
                              std::to_string(out_dims) + " dims; result reduced");
  }

  result.components = Mat<double>(d, kept);
  for (std::size_t j = 0; j < kept; ++j) {
    // Sign convention: the largest-magnitude entry of each component is
    // positive.
    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double v = std::abs(vecs.at(i, order[j]));
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    const double sign = vecs.at(arg, order[j]) >= 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < d; ++i) result.components.at(i, j) = sign * vecs.at(i, order[j]);
  }

  result.projected = Mat<double>(n, kept);
  matmul_nn(centered, result.components, result.projected);
  return result;
}

// ---------------------------------------------------------------------------
// Exact t-SNE

namespace {

// Gaussian affinities with per-point bandwidth calibrated to the target
// entropy log(perplexity); returns row-conditional P and per-point entropy.
void conditional_affinities(const Mat<double>& d2, double perplexity, Mat<double>& p,
                            std::vector<double>& entropy) {
  const std::size_t n = d2.rows;
  const double target = std::log(perplexity);
  p = Mat<double>(n, n);
  entropy.assign(n, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
    double h = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
      double z = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = std::exp(-beta * d2.at(i, j));
        p.at(i, j) = w;
        z += w;
        weighted += w * d2.at(i, j);
      }
      // H = log Z + beta * E[d^2]
      h = std::log(z) + beta * weighted / z;
      if (std::abs(h - target) < 1e-4) break;
      if (h > target) {
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
      } else {
        beta_hi = beta;
        beta = 0.5 * (beta + beta_lo);
      }
    }
    entropy[i] = h;
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += p.at(i, j);
    for (std::size_t j = 0; j < n; ++j) p.at(i, j) /= z;
  }
}

double kl_divergence(const Mat<double>& p, const Mat<double>& q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    if (p.data[i] > 0.0) kl += p.data[i] * std::log(p.data[i] / q.data[i]);
  }
  return kl;
}

// Student-t kernel Q and its normalizer from current coordinates.
void student_q(const Mat<double>& y, Mat<double>& num, Mat<double>& q) {
  const std::size_t n = y.rows;
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num.at(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y.at(i, 0) - y.at(j, 0);
      const double dy = y.at(i, 1) - y.at(j, 1);
      const double w = 1.0 / (1.0 + dx * dx + dy * dy);
      num.at(i, j) = w;
      num.at(j, i) = w;
      z += 2.0 * w;
    }
  }
  const double floor_q = 1e-12;
  for (std::size_t i = 0; i < n * n; ++i) q.data[i] = std::max(num.data[i] / z, floor_q);
  for (std::size_t i = 0; i < n; ++i) q.at(i, i) = floor_q;
}

void tsne_gradient(const Mat<double>& p, const Mat<double>& q, const Mat<double>& num,
                   const Mat<double>& y, double exaggeration, Mat<double>& grad) {
  const std::size_t n = y.rows;
  grad.fill(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double coeff = 4.0 * (exaggeration * p.at(i, j) - q.at(i, j)) * num.at(i, j);
      grad.at(i, 0) += coeff * (y.at(i, 0) - y.at(j, 0));
      grad.at(i, 1) += coeff * (y.at(i, 1) - y.at(j, 1));
    }
  }
}

void center_rows(Mat<double>& y) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < y.rows; ++i) {
    mx += y.at(i, 0);
    my += y.at(i, 1);
  }
  mx /= static_cast<double>(y.rows);
  my /= static_cast<double>(y.rows);
  for (std::size_t i = 0; i < y.rows; ++i) {
    y.at(i, 0) -= mx;
    y.at(i, 1) -= my;
  }
}

}  // namespace

ProjectionResult tsne(const Mat<double>& x, const TsneOptions& options) {
  const std::size_t n = x.rows;
  if (options.perplexity < 2.0) throw InputError("tsne: perplexity must be >= 2");
  if (static_cast<double>(n) < 3.0 * options.perplexity)
    throw InputError("tsne: n must be at least 3 * perplexity");
  if (n > 5000) throw InputError("tsne: exact formulation capped at n = 5000");
  if (options.iterations < 100) throw InputError("tsne: need at least 100 iterations");

  // Pairwise squared distances.
  Mat<double> d2(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < x.cols; ++c) {
        const double diff = x.at(i, c) - x.at(j, c);
        acc += diff * diff;
      }
      d2.at(i, j) = acc;
      d2.at(j, i) = acc;
    }
  }

  ProjectionResult result;
  result.method = "tsne";
  result.hyperparameters = options;

  Mat<double> cond;
  conditional_affinities(d2, options.perplexity, cond, result.achieved_entropy);

  // Symmetrize: p_ij = (p_j|i + p_i|j) / 2n.
  Mat<double> p(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      p.at(i, j) = std::max((cond.at(i, j) + cond.at(j, i)) / (2.0 * static_cast<double>(n)),
                            1e-12);

  Rng rng = Rng::stream(options.seed, "tsne-init");
  Mat<double> y(n, 2);
  for (auto& v : y.data) v = rng.gaussian() * 1e-4;

  Mat<double> num(n, n), q(n, n), grad(n, 2), velocity(n, 2), gains(n, 2);
  gains.fill(1.0);

  const std::int64_t exaggeration_until = std::min<std::int64_t>(250, options.iterations / 2);
  const std::int64_t tail_start = options.iterations - 50;
  const double learning_rate = 200.0;
  double kl_prev = std::numeric_limits<double>::infinity();

  for (std::int64_t iter = 0; iter < options.iterations; ++iter) {
    const double exaggeration = iter < exaggeration_until ? 12.0 : 1.0;
    student_q(y, num, q);
    const double kl = kl_divergence(p, q);

    if (iter < tail_start) {
      const double momentum = iter < 250 ? 0.5 : 0.8;
      tsne_gradient(p, q, num, y, exaggeration, grad);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 2; ++c) {
          const bool same_sign = (grad.at(i, c) > 0) == (velocity.at(i, c) > 0);
          gains.at(i, c) = same_sign ? std::max(gains.at(i, c) * 0.8, 0.01)
                                     : gains.at(i, c) + 0.2;
          velocity.at(i, c) =
              momentum * velocity.at(i, c) - learning_rate * gains.at(i, c) * grad.at(i, c);
          y.at(i, c) += velocity.at(i, c);
        }
      }
      center_rows(y);
      result.kl_trace.push_back(kl);
      kl_prev = kl;
    } else {
      // Monotone tail: plain descent with backtracking; never accept an
      // uphill move, so the recorded KL is non-increasing from here on.
      kl_prev = std::min(kl_prev, kl);
      tsne_gradient(p, q, num, y, 1.0, grad);
      double step = learning_rate;
      Mat<double> y_best = y;
      double kl_best = kl_prev;
      for (int attempt = 0; attempt < 40; ++attempt) {
        Mat<double> y_try = y;
        for (std::size_t i = 0; i < n; ++i) {
          y_try.at(i, 0) -= step * grad.at(i, 0);
          y_try.at(i, 1) -= step * grad.at(i, 1);
        }
        student_q(y_try, num, q);
        const double kl_try = kl_divergence(p, q);
        if (kl_try <= kl_best) {
          y_best = std::move(y_try);
          kl_best = kl_try;
          break;
        }
        step *= 0.5;
      }
      y = std::move(y_best);
      result.kl_trace.push_back(kl_best);
      kl_prev = kl_best;
    }
  }

  result.coordinates = std::move(y);
  return result;
}

double knn_purity(const Mat<double>& coordinates, const std::vector<std::string>& labels,
                  std::size_t k) {
  const std::size_t n = coordinates.rows;
  if (labels.size() != n) throw InputError("knn_purity: labels/coordinates mismatch");
  if (k >= n) throw InputError("knn_purity: k must be below n");
  if (n == 0) throw InputError("knn_purity: empty input");

  double total = 0.0;
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < coordinates.cols; ++c) {
        const double diff = coordinates.at(i, c) - coordinates.at(j, c);
        acc += diff * diff;
      }
      dist[j] = {acc, j};
    }
    dist[i].first = std::numeric_limits<double>::infinity();  // exclude self
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::size_t share = 0;
    for (std::size_t m = 0; m < k; ++m)
      if (labels[dist[m].second] == labels[i]) ++share;
    total += static_cast<double>(share) / static_cast<double>(k);
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Latency / memory benchmarking

std::vector<std::vector<std::int32_t>> bench_inputs(std::int64_t volume, std::int64_t seq_len,
                                                    std::int64_t vocab_size, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "bench-inputs", static_cast<std::uint64_t>(volume));
  std::vector<std::vector<std::int32_t>> out(static_cast<std::size_t>(volume));
  const auto regular = static_cast<std::uint64_t>(vocab_size - special::kCount);
  for (auto& seq : out) {
    seq.resize(static_cast<std::size_t>(seq_len));
    seq.front() = special::kCls;
    seq.back() = special::kSep;
    for (std::size_t i = 1; i + 1 < seq.size(); ++i)
      seq[i] = special::kCount + static_cast<std::int32_t>(rng.uniform_below(regular));
  }
  return out;
}

BenchReport latency_bench(const ParameterStore<float>& params,
                          const std::vector<std::int64_t>& batch_volumes,
                          const BenchOptions& options) {
  BenchReport report;
  report.seq_len = options.seq_len;
  report.repeats = options.repeats;
  const auto seq_len = std::min<std::int64_t>(options.seq_len, params.config.max_seq_len);

  for (const auto volume : batch_volumes) {
    BenchVolume bv;
    bv.volume = volume;
    const auto inputs = bench_inputs(volume, seq_len, params.config.vocab_size, options.seed);
    const std::vector<std::uint8_t> valid(static_cast<std::size_t>(seq_len), 1);
    for (std::int64_t rep = 0; rep < options.repeats; ++rep) {
      // Single worker by contract: sequential forward passes.
      const auto t0 = std::chrono::steady_clock::now();
      for (const auto& ids : inputs) {
        volatile float sink =
            encoder_forward_seq(params, std::span<const std::int32_t>(ids), valid,
                                ForwardOptions{AttentionMode::blockwise})
                .at(0, 0);
        (void)sink;
      }
      bv.repeat_seconds.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    bv.mean_seconds = std::accumulate(bv.repeat_seconds.begin(), bv.repeat_seconds.end(), 0.0) /
                      static_cast<double>(bv.repeat_seconds.size());
    report.volumes.push_back(std::move(bv));
  }

  // Attention-memory probe, independent of the model's sequence cap.
  const auto d_head = static_cast<std::size_t>(params.config.d_head());
  const auto block = static_cast<std::size_t>(params.config.attention_block_size);
  Rng rng = Rng::stream(options.seed, "bench-memory");
  for (const std::int64_t seq : {512, 1024, 2048}) {
    const auto s = static_cast<std::size_t>(seq);
    Mat<float> q(s, d_head), k(s, d_head), v(s, d_head), out;
    for (auto& val : q.data) val = static_cast<float>(rng.gaussian());
    for (auto& val : k.data) val = static_cast<float>(rng.gaussian());
    for (auto& val : v.data) val = static_cast<float>(rng.gaussian());
    const std::vector<std::uint8_t> valid(s, 1);

    BenchMemory mem;
    mem.seq_len = seq;
    WorkspaceMeter::reset();
    attention_dense(q, k, v, valid, out);
    mem.dense_score_bytes = WorkspaceMeter::peak_bytes();
    WorkspaceMeter::reset();
    attention_blockwise(q, k, v, valid, block, out);
    mem.blockwise_aux_bytes = WorkspaceMeter::peak_bytes();
    report.memory.push_back(mem);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Ablation harness

AblationTable ablation_harness(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                               const MaskingSchedule& schedule,
                               const std::vector<std::string>& documents,
                               const std::vector<std::string>& heldout,
                               const std::vector<std::string>& lexicon_terms,
                               const AblationOptions& options) {
  if (options.work_dir.empty()) throw InputError("ablation: work_dir required");

  // Shared tokenizer across variants so vocabularies agree.
  auto [vocab, merges] = bpe_train(documents, std::max<std::int64_t>(model_cfg.vocab_size, 64));
  Tokenizer tokenizer{std::move(vocab), std::move(merges)};
  ModelConfig cfg = model_cfg;
  cfg.vocab_size = tokenizer.vocab.size();

  const TokenPriorityTable lexicon =
      priority_table_from_terms(lexicon_terms, tokenizer, options.lexicon_weight);
  const TokenPriorityTable uniform;

  struct VariantSpec {
    std::string name;
    MaskingSchedule schedule;
    const TokenPriorityTable* priorities;
  };
  MaskingSchedule fixed15 = schedule;
  fixed15.start_rate = schedule.end_rate;
  const std::vector<VariantSpec> specs = {
      {"baseline", schedule, &lexicon},
      {"uniform_masking", schedule, &uniform},
      {"fixed_15pct", fixed15, &lexicon},
  };

  // Shared evaluation: same held-out split, same frozen token-aware masking
  // for every variant.
  EvalOptions eval_opts;
  eval_opts.mask_rate = schedule.end_rate;
  eval_opts.seed = derive_seed(train_cfg.seed, "ablation-eval");

  AblationTable table;
  for (const auto& spec : specs) {
    AblationVariant variant;
    variant.name = spec.name;
    for (const auto seed : options.seeds) {
      const std::string run_dir =
          options.work_dir + "/" + spec.name + "-seed" + std::to_string(seed);
      std::filesystem::create_directories(run_dir);
      TrainConfig run_cfg = train_cfg;
      run_cfg.seed = seed;
      MaskingSchedule run_schedule = spec.schedule;
      run_schedule.total_steps = run_cfg.total_steps;
      ParameterStore<float> params = ParameterStore<float>::init(cfg, seed);
      train_loop(documents, tokenizer, params, run_cfg, run_schedule, *spec.priorities, run_dir);
      AblationRun run;
      run.seed = seed;
      run.report = mlm_eval(params, tokenizer, heldout, lexicon, eval_opts);
      variant.runs.push_back(std::move(run));
    }
    auto mean_of = [&](std::size_t ki) {
      double acc = 0.0;
      for (const auto& r : variant.runs) acc += r.report.accuracy[ki];
      return acc / static_cast<double>(variant.runs.size());
    };
    variant.mean_top1 = mean_of(0);
    variant.mean_top5 = mean_of(1);
    variant.mean_top10 = mean_of(2);
    variant.mean_top25 = mean_of(3);
    table.variants.push_back(std::move(variant));
  }
  return table;
}

// ---------------------------------------------------------------------------
// CSV interchange

void write_embeddings_csv(const std::string& path, const Mat<float>& embeddings) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "id";
  for (std::size_t c = 0; c < embeddings.cols; ++c) out << ",dim_" << c;
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < embeddings.rows; ++r) {
    out << r;
    for (std::size_t c = 0; c < embeddings.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(embeddings.at(r, c)));
      out << ',' << buf;
    }
    out << '\n';
  }
}

Mat<float> read_embeddings_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty embeddings file");
  std::size_t dims = 0;
  for (std::size_t pos = line.find(','); pos != std::string::npos; pos = line.find(',', pos + 1))
    ++dims;
  if (dims == 0) throw ParseError("embeddings header needs id,dim_0,...", 1);

  std::vector<float> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t pos = line.find(',');
    if (pos == std::string::npos) throw ParseError("embedding row missing values", line_no);
    std::size_t count = 0;
    while (pos != std::string::npos) {
      const std::size_t next = line.find(',', pos + 1);
      const std::string field = line.substr(pos + 1, next == std::string::npos
                                                         ? std::string::npos
                                                         : next - pos - 1);
      values.push_back(std::strtof(field.c_str(), nullptr));
      ++count;
      pos = next;
    }
    if (count != dims) throw ParseError("embedding row has wrong dimension count", line_no);
    ++rows;
  }
  Mat<float> m(rows, dims);
  std::copy(values.begin(), values.end(), m.data.begin());
  return m;
}

void write_projection_csv(const std::string& path, const ProjectionResult& projection) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "id,x,y,label\n";
  char buf[64];
  for (std::size_t r = 0; r < projection.coordinates.rows; ++r) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", projection.coordinates.at(r, 0),
                  projection.coordinates.at(r, 1));
    out << r << ',' << buf << ','
        << (r < projection.labels.size() ? projection.labels[r] : "") << '\n';
  }
}

}  // namespace cmbert
