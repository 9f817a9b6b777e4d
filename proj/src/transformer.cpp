#include "threatlens/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "threatlens/errors.hpp"
#include "threatlens/hash.hpp"
#include "threatlens/kernels.hpp"

namespace threatlens {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kMaskScore = -1e30;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double gelu(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

// y = g * (x - mean) / sqrt(var + eps) + b, per row. Caches xhat and the
// inverse stddev for the backward pass.
void layernorm_forward(const Mat& x, const Mat& gain, const Mat& bias,
                       Mat& xhat, std::vector<double>& inv_std, Mat& y) {
  const std::size_t d = x.cols;
  xhat = Mat(x.rows, d);
  y = Mat(x.rows, d);
  inv_std.assign(x.rows, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = xr[j] - mean;
      var += diff * diff;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + kLnEps);
    inv_std[r] = is;
    double* hr = xhat.row(r);
    double* yr = y.row(r);
    for (std::size_t j = 0; j < d; ++j) {
      hr[j] = (xr[j] - mean) * is;
      yr[j] = gain.v[j] * hr[j] + bias.v[j];
    }
  }
}

void layernorm_backward(const Mat& dy, const Mat& xhat,
                        const std::vector<double>& inv_std, const Mat& gain,
                        Mat& dx, Mat& dgain, Mat& dbias) {
  const std::size_t d = dy.cols;
  dx = Mat(dy.rows, d);
  for (std::size_t r = 0; r < dy.rows; ++r) {
    const double* dyr = dy.row(r);
    const double* hr = xhat.row(r);
    double* dxr = dx.row(r);
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double dxhat = dyr[j] * gain.v[j];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * hr[j];
      dgain.v[j] += dyr[j] * hr[j];
      dbias.v[j] += dyr[j];
    }
    const double inv_d = 1.0 / static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double dxhat = dyr[j] * gain.v[j];
      dxr[j] = inv_std[r] *
               (dxhat - sum_dxhat * inv_d - hr[j] * sum_dxhat_xhat * inv_d);
    }
  }
}

// dS_i = A_i * (dA_i - sum_j dA_j A_j), per row.
void softmax_backward_rows(const Mat& a, const Mat& da, Mat& ds) {
  ds = Mat(a.rows, a.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* ar = a.row(r);
    const double* dar = da.row(r);
    const double inner = kernels::dot(dar, ar, a.cols);
    double* dsr = ds.row(r);
    for (std::size_t j = 0; j < a.cols; ++j) {
      dsr[j] = ar[j] * (dar[j] - inner);
    }
  }
}

// Y = X * W + b (b broadcast over rows).
Mat linear_forward(const Mat& x, const Mat& w, const Mat& b) {
  Mat y = matmul_nn(x, w);
  for (std::size_t r = 0; r < y.rows; ++r) {
    kernels::add(y.row(r), b.data(), y.row(r), y.cols);
  }
  return y;
}

void linear_backward(const Mat& x, const Mat& w, const Mat& dy, Mat& dx_accum,
                     Mat& dw, Mat& db) {
  Mat dx = matmul_nt(dy, w);
  add_into(dx_accum, dx);
  Mat dw_local = matmul_tn(x, dy);
  kernels::add(dw.data(), dw_local.data(), dw.data(), dw.numel());
  for (std::size_t r = 0; r < dy.rows; ++r) {
    kernels::add(db.data(), dy.row(r), db.data(), db.cols);
  }
}

void copy_head(const Mat& src, Mat& dst, std::size_t row0, std::size_t len,
               std::size_t col0, std::size_t dh) {
  dst = Mat(len, dh);
  for (std::size_t t = 0; t < len; ++t) {
    const double* s = src.row(row0 + t) + col0;
    std::copy(s, s + dh, dst.row(t));
  }
}

void add_head(Mat& dst, const Mat& src, std::size_t row0, std::size_t col0) {
  for (std::size_t t = 0; t < src.rows; ++t) {
    double* d = dst.row(row0 + t) + col0;
    kernels::add(d, src.row(t), d, src.cols);
  }
}

}  // namespace

struct TinyTransformer::LayerCache {
  Mat x_in;
  Mat q, k, v;
  std::vector<Mat> attn;  // n_rows * n_heads softmaxed score matrices
  Mat ctx;
  Mat res1;
  Mat ln1_xhat;
  std::vector<double> ln1_inv_std;
  Mat x1;
  Mat ff_pre;
  Mat ff_act;
  Mat res2;
  Mat ln2_xhat;
  std::vector<double> ln2_inv_std;
  Mat x2;
};

struct TinyTransformer::Cache {
  const Batch* batch = nullptr;
  Mat x0;
  std::vector<LayerCache> layers;

  const Mat& hidden() const { return layers.empty() ? x0 : layers.back().x2; }
};

TinyTransformer::TinyTransformer(TransformerConfig config, Vocab vocab,
                                 std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
  if (config_.d_model % config_.n_heads != 0) {
    throw ValidationError("d_model must be divisible by n_heads");
  }
  const std::size_t v = vocab_.size();
  const std::size_t d = config_.d_model;
  const std::size_t ff = config_.d_ff;

  Rng rng(seed);
  auto weight = [&rng](std::size_t r, std::size_t c) {
    Mat m(r, c);
    for (double& x : m.v) x = rng.gauss() * 0.02;
    return m;
  };
  auto zeros = [](std::size_t r, std::size_t c) { return Mat(r, c); };
  auto ones = [](std::size_t r, std::size_t c) {
    Mat m(r, c);
    std::fill(m.v.begin(), m.v.end(), 1.0);
    return m;
  };

  auto push = [this](const std::string& name, int group, Mat w) {
    params_.push_back(Param{name, group, std::move(w), Mat()});
    params_.back().g = Mat(params_.back().w.rows, params_.back().w.cols);
  };

  push("tok_emb", 0, weight(v, d));
  push("pos_emb", 0, weight(config_.max_len, d));
  for (std::size_t i = 0; i < config_.n_layers; ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    const int group = static_cast<int>(i) + 1;
    push(p + "wq", group, weight(d, d));
    push(p + "bq", group, zeros(1, d));
    push(p + "wk", group, weight(d, d));
    push(p + "bk", group, zeros(1, d));
    push(p + "wv", group, weight(d, d));
    push(p + "bv", group, zeros(1, d));
    push(p + "wo", group, weight(d, d));
    push(p + "bo", group, zeros(1, d));
    push(p + "ln1_g", group, ones(1, d));
    push(p + "ln1_b", group, zeros(1, d));
    push(p + "w1", group, weight(d, ff));
    push(p + "b1", group, zeros(1, ff));
    push(p + "w2", group, weight(ff, d));
    push(p + "b2", group, zeros(1, d));
    push(p + "ln2_g", group, ones(1, d));
    push(p + "ln2_b", group, zeros(1, d));
  }
  push("lm_bias", -1, zeros(1, v));
  push("cls_w", -1, weight(d, 2));
  push("cls_b", -1, zeros(1, 2));

  freeze_.assign(config_.n_layers + 1, 0);
  lr_scales_.assign(config_.n_layers + 1, 1.0);
}

Param& TinyTransformer::param(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ValidationError("unknown parameter '" + name + "'");
}

void TinyTransformer::set_discriminative_lr_scales(double decay) {
  const std::size_t n_layers = config_.n_layers;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const auto depth_from_top = static_cast<double>(n_layers - 1 - i);
    lr_scales_[i + 1] = 1.0 / std::pow(decay, depth_from_top);
  }
  lr_scales_[0] = 1.0 / std::pow(decay, static_cast<double>(n_layers));
}

void TinyTransformer::reset_lr_scales() {
  std::fill(lr_scales_.begin(), lr_scales_.end(), 1.0);
}

void TinyTransformer::unfreeze_top(std::size_t n_groups) {
  std::fill(freeze_.begin(), freeze_.end(), 1);
  const std::size_t total = freeze_.size();
  n_groups = std::min(n_groups, total);
  for (std::size_t j = 0; j < n_groups; ++j) {
    // top-down: layer n_layers..1, embeddings (group 0) last
    const std::size_t group = j < config_.n_layers ? config_.n_layers - j : 0;
    freeze_[group] = 0;
  }
}

bool TinyTransformer::group_trainable(int group) const {
  if (group < 0) return true;  // heads
  return freeze_[static_cast<std::size_t>(group)] == 0;
}

TinyTransformer::Cache TinyTransformer::forward(const Batch& batch) const {
  const std::size_t d = config_.d_model;
  const std::size_t heads = config_.n_heads;
  const std::size_t dh = d / heads;
  const std::size_t width = batch.width;
  const std::size_t n = batch.n_rows * width;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  const Mat& tok_emb = params_[0].w;
  const Mat& pos_emb = params_[1].w;

  Cache cache;
  cache.batch = &batch;
  cache.x0 = Mat(n, d);
  for (std::size_t r = 0; r < batch.n_rows; ++r) {
    for (std::size_t t = 0; t < width; ++t) {
      const int id = batch.at(r, t);
      kernels::add(tok_emb.row(static_cast<std::size_t>(id)), pos_emb.row(t),
                   cache.x0.row(r * width + t), d);
    }
  }

  const Mat* x = &cache.x0;
  for (std::size_t li = 0; li < config_.n_layers; ++li) {
    const std::size_t base = 2 + li * 16;
    const Mat& wq = params_[base + 0].w;
    const Mat& bq = params_[base + 1].w;
    const Mat& wk = params_[base + 2].w;
    const Mat& bk = params_[base + 3].w;
    const Mat& wv = params_[base + 4].w;
    const Mat& bv = params_[base + 5].w;
    const Mat& wo = params_[base + 6].w;
    const Mat& bo = params_[base + 7].w;
    const Mat& ln1_g = params_[base + 8].w;
    const Mat& ln1_b = params_[base + 9].w;
    const Mat& w1 = params_[base + 10].w;
    const Mat& b1 = params_[base + 11].w;
    const Mat& w2 = params_[base + 12].w;
    const Mat& b2 = params_[base + 13].w;
    const Mat& ln2_g = params_[base + 14].w;
    const Mat& ln2_b = params_[base + 15].w;

    LayerCache lc;
    lc.x_in = *x;
    lc.q = linear_forward(lc.x_in, wq, bq);
    lc.k = linear_forward(lc.x_in, wk, bk);
    lc.v = linear_forward(lc.x_in, wv, bv);

    lc.ctx = Mat(n, d);
    lc.attn.reserve(batch.n_rows * heads);
    for (std::size_t r = 0; r < batch.n_rows; ++r) {
      const std::size_t row0 = r * width;
      const std::size_t len = batch.lengths[r];
      for (std::size_t h = 0; h < heads; ++h) {
        Mat qh, kh, vh;
        copy_head(lc.q, qh, row0, width, h * dh, dh);
        copy_head(lc.k, kh, row0, width, h * dh, dh);
        copy_head(lc.v, vh, row0, width, h * dh, dh);

        Mat scores = matmul_nt(qh, kh);
        kernels::scale(inv_sqrt_dh, scores.data(), scores.numel());
        // padded key positions are excluded from every query's distribution
        for (std::size_t qi = 0; qi < width; ++qi) {
          for (std::size_t kj = len; kj < width; ++kj) {
            scores.at(qi, kj) = kMaskScore;
          }
        }
        kernels::softmax_rows(scores.data(), scores.rows, scores.cols);

        Mat ctx_h = matmul_nn(scores, vh);
        add_head(lc.ctx, ctx_h, row0, h * dh);
        lc.attn.push_back(std::move(scores));
      }
    }

    Mat attn_out = linear_forward(lc.ctx, wo, bo);
    lc.res1 = lc.x_in;
    add_into(lc.res1, attn_out);
    layernorm_forward(lc.res1, ln1_g, ln1_b, lc.ln1_xhat, lc.ln1_inv_std,
                      lc.x1);

    lc.ff_pre = linear_forward(lc.x1, w1, b1);
    lc.ff_act = Mat(lc.ff_pre.rows, lc.ff_pre.cols);
    for (std::size_t i = 0; i < lc.ff_pre.numel(); ++i) {
      lc.ff_act.v[i] = gelu(lc.ff_pre.v[i]);
    }
    Mat ff_out = linear_forward(lc.ff_act, w2, b2);
    lc.res2 = lc.x1;
    add_into(lc.res2, ff_out);
    layernorm_forward(lc.res2, ln2_g, ln2_b, lc.ln2_xhat, lc.ln2_inv_std,
                      lc.x2);

    cache.layers.push_back(std::move(lc));
    x = &cache.layers.back().x2;
  }
  return cache;
}

void TinyTransformer::backward(const Cache& cache, Mat d_hidden) {
  const Batch& batch = *cache.batch;
  const std::size_t d = config_.d_model;
  const std::size_t heads = config_.n_heads;
  const std::size_t dh = d / heads;
  const std::size_t width = batch.width;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  for (std::size_t li = config_.n_layers; li-- > 0;) {
    const LayerCache& lc = cache.layers[li];
    const std::size_t base = 2 + li * 16;
    const Mat& wq = params_[base + 0].w;
    const Mat& wk = params_[base + 2].w;
    const Mat& wv = params_[base + 4].w;
    const Mat& wo = params_[base + 6].w;
    const Mat& ln1_g = params_[base + 8].w;
    const Mat& w1 = params_[base + 10].w;
    const Mat& w2 = params_[base + 12].w;
    const Mat& ln2_g = params_[base + 14].w;

    // LN2
    Mat d_res2;
    layernorm_backward(d_hidden, lc.ln2_xhat, lc.ln2_inv_std, ln2_g, d_res2,
                       params_[base + 14].g, params_[base + 15].g);

    // res2 = x1 + ff_out
    Mat d_x1 = d_res2;
    Mat d_ff_act = matmul_nt(d_res2, w2);
    {
      Mat dw2 = matmul_tn(lc.ff_act, d_res2);
      kernels::add(params_[base + 12].g.data(), dw2.data(),
                   params_[base + 12].g.data(), dw2.numel());
      Mat& db2 = params_[base + 13].g;
      for (std::size_t r = 0; r < d_res2.rows; ++r) {
        kernels::add(db2.data(), d_res2.row(r), db2.data(), db2.cols);
      }
    }

    Mat d_ff_pre(d_ff_act.rows, d_ff_act.cols);
    for (std::size_t i = 0; i < d_ff_pre.numel(); ++i) {
      d_ff_pre.v[i] = d_ff_act.v[i] * gelu_grad(lc.ff_pre.v[i]);
    }
    linear_backward(lc.x1, w1, d_ff_pre, d_x1, params_[base + 10].g,
                    params_[base + 11].g);

    // LN1
    Mat d_res1;
    layernorm_backward(d_x1, lc.ln1_xhat, lc.ln1_inv_std, ln1_g, d_res1,
                       params_[base + 8].g, params_[base + 9].g);

    // res1 = x_in + attn_out
    Mat d_x_in = d_res1;
    Mat d_ctx = matmul_nt(d_res1, wo);
    {
      Mat dwo = matmul_tn(lc.ctx, d_res1);
      kernels::add(params_[base + 6].g.data(), dwo.data(),
                   params_[base + 6].g.data(), dwo.numel());
      Mat& dbo = params_[base + 7].g;
      for (std::size_t r = 0; r < d_res1.rows; ++r) {
        kernels::add(dbo.data(), d_res1.row(r), dbo.data(), dbo.cols);
      }
    }

    Mat d_q(d_res1.rows, d), d_k(d_res1.rows, d), d_v(d_res1.rows, d);
    for (std::size_t r = 0; r < batch.n_rows; ++r) {
      const std::size_t row0 = r * width;
      for (std::size_t h = 0; h < heads; ++h) {
        const Mat& attn = lc.attn[r * heads + h];
        Mat qh, kh, vh, d_ctx_h;
        copy_head(lc.q, qh, row0, width, h * dh, dh);
        copy_head(lc.k, kh, row0, width, h * dh, dh);
        copy_head(lc.v, vh, row0, width, h * dh, dh);
        copy_head(d_ctx, d_ctx_h, row0, width, h * dh, dh);

        Mat d_attn = matmul_nt(d_ctx_h, vh);
        Mat d_vh = matmul_tn(attn, d_ctx_h);

        Mat d_scores;
        softmax_backward_rows(attn, d_attn, d_scores);
        kernels::scale(inv_sqrt_dh, d_scores.data(), d_scores.numel());

        Mat d_qh = matmul_nn(d_scores, kh);
        Mat d_kh = matmul_tn(d_scores, qh);

        add_head(d_q, d_qh, row0, h * dh);
        add_head(d_k, d_kh, row0, h * dh);
        add_head(d_v, d_vh, row0, h * dh);
      }
    }

    linear_backward(lc.x_in, wq, d_q, d_x_in, params_[base + 0].g,
                    params_[base + 1].g);
    linear_backward(lc.x_in, wk, d_k, d_x_in, params_[base + 2].g,
                    params_[base + 3].g);
    linear_backward(lc.x_in, wv, d_v, d_x_in, params_[base + 4].g,
                    params_[base + 5].g);

    d_hidden = std::move(d_x_in);
  }

  // embeddings
  Mat& d_tok = params_[0].g;
  Mat& d_pos = params_[1].g;
  for (std::size_t r = 0; r < batch.n_rows; ++r) {
    for (std::size_t t = 0; t < width; ++t) {
      const auto id = static_cast<std::size_t>(batch.at(r, t));
      const double* src = d_hidden.row(r * width + t);
      kernels::add(d_tok.row(id), src, d_tok.row(id), d);
      kernels::add(d_pos.row(t), src, d_pos.row(t), d);
    }
  }
}

namespace {

// Gathers the final hidden vectors at (row, col) positions.
Mat gather_rows(const Mat& hidden, const std::vector<std::size_t>& rows,
                const std::vector<std::size_t>& cols, std::size_t width) {
  Mat out(rows.size(), hidden.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = hidden.row(rows[i] * width + cols[i]);
    std::copy(src, src + hidden.cols, out.row(i));
  }
  return out;
}

}  // namespace

double TinyTransformer::mlm_loss(const MaskedBatch& mb) const {
  if (mb.n_targets() == 0) return 0.0;
  const Cache cache = forward(mb.corrupted);
  const Mat& tok_emb = params_[0].w;
  const Mat& lm_bias = params_.at(params_.size() - 3).w;

  Mat ht = gather_rows(cache.hidden(), mb.target_rows, mb.target_cols,
                       mb.corrupted.width);
  Mat logits = matmul_nt(ht, tok_emb);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    kernels::add(logits.row(i), lm_bias.data(), logits.row(i), logits.cols);
  }
  kernels::softmax_rows(logits.data(), logits.rows, logits.cols);

  double loss = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    loss -= std::log(logits.at(i, static_cast<std::size_t>(mb.target_ids[i])) +
                     1e-12);
  }
  return loss / static_cast<double>(logits.rows);
}

double TinyTransformer::mlm_loss_grad(const MaskedBatch& mb) {
  if (mb.n_targets() == 0) return 0.0;
  const Cache cache = forward(mb.corrupted);
  const Mat& tok_emb = params_[0].w;
  const std::size_t lm_bias_idx = params_.size() - 3;
  const Mat& lm_bias = params_[lm_bias_idx].w;
  const std::size_t t_count = mb.n_targets();

  Mat ht = gather_rows(cache.hidden(), mb.target_rows, mb.target_cols,
                       mb.corrupted.width);
  Mat probs = matmul_nt(ht, tok_emb);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    kernels::add(probs.row(i), lm_bias.data(), probs.row(i), probs.cols);
  }
  kernels::softmax_rows(probs.data(), probs.rows, probs.cols);

  double loss = 0.0;
  for (std::size_t i = 0; i < t_count; ++i) {
    loss -= std::log(probs.at(i, static_cast<std::size_t>(mb.target_ids[i])) +
                     1e-12);
  }
  loss /= static_cast<double>(t_count);

  // d logits = (softmax - onehot) / T
  Mat d_logits = probs;
  const double inv_t = 1.0 / static_cast<double>(t_count);
  kernels::scale(inv_t, d_logits.data(), d_logits.numel());
  for (std::size_t i = 0; i < t_count; ++i) {
    d_logits.at(i, static_cast<std::size_t>(mb.target_ids[i])) -= inv_t;
  }

  // logits = ht * tok_emb^T + lm_bias
  Mat d_ht = matmul_nn(d_logits, tok_emb);
  Mat d_tok = matmul_tn(d_logits, ht);
  kernels::add(params_[0].g.data(), d_tok.data(), params_[0].g.data(),
               d_tok.numel());
  Mat& d_bias = params_[lm_bias_idx].g;
  for (std::size_t i = 0; i < t_count; ++i) {
    kernels::add(d_bias.data(), d_logits.row(i), d_bias.data(), d_bias.cols);
  }

  Mat d_hidden(cache.hidden().rows, cache.hidden().cols);
  for (std::size_t i = 0; i < t_count; ++i) {
    double* dst =
        d_hidden.row(mb.target_rows[i] * mb.corrupted.width + mb.target_cols[i]);
    kernels::add(dst, d_ht.row(i), dst, d_hidden.cols);
  }
  backward(cache, std::move(d_hidden));
  return loss;
}

double TinyTransformer::cls_loss(const Batch& batch,
                                 const std::vector<int>& labels,
                                 const ClassWeights& weights) const {
  const Cache cache = forward(batch);
  const Mat& cls_w = params_.at(params_.size() - 2).w;
  const Mat& cls_b = params_.at(params_.size() - 1).w;

  std::vector<std::size_t> rows(batch.n_rows), cols(batch.n_rows, 0);
  std::iota(rows.begin(), rows.end(), 0);
  Mat hc = gather_rows(cache.hidden(), rows, cols, batch.width);
  Mat logits = linear_forward(hc, cls_w, cls_b);
  kernels::softmax_rows(logits.data(), logits.rows, logits.cols);

  double loss = 0.0;
  for (std::size_t r = 0; r < batch.n_rows; ++r) {
    const double w =
        labels[r] == 1 ? weights.w_relevant : weights.w_irrelevant;
    loss -= w * std::log(logits.at(r, static_cast<std::size_t>(labels[r])) +
                         1e-12);
  }
  return loss / static_cast<double>(batch.n_rows);
}

double TinyTransformer::cls_loss_grad(const Batch& batch,
                                      const std::vector<int>& labels,
                                      const ClassWeights& weights) {
  const Cache cache = forward(batch);
  const std::size_t cls_w_idx = params_.size() - 2;
  const std::size_t cls_b_idx = params_.size() - 1;
  const Mat& cls_w = params_[cls_w_idx].w;
  const Mat& cls_b = params_[cls_b_idx].w;

  std::vector<std::size_t> rows(batch.n_rows), cols(batch.n_rows, 0);
  std::iota(rows.begin(), rows.end(), 0);
  Mat hc = gather_rows(cache.hidden(), rows, cols, batch.width);
  Mat probs = linear_forward(hc, cls_w, cls_b);
  kernels::softmax_rows(probs.data(), probs.rows, probs.cols);

  double loss = 0.0;
  Mat d_logits(batch.n_rows, 2);
  const double inv_n = 1.0 / static_cast<double>(batch.n_rows);
  for (std::size_t r = 0; r < batch.n_rows; ++r) {
    const double w =
        labels[r] == 1 ? weights.w_relevant : weights.w_irrelevant;
    loss -= w * std::log(probs.at(r, static_cast<std::size_t>(labels[r])) +
                         1e-12);
    for (std::size_t c = 0; c < 2; ++c) {
      const double onehot = static_cast<std::size_t>(labels[r]) == c ? 1.0 : 0.0;
      d_logits.at(r, c) = w * (probs.at(r, c) - onehot) * inv_n;
    }
  }
  loss *= inv_n;

  Mat d_hc(batch.n_rows, config_.d_model);
  d_hc.zero();
  linear_backward(hc, cls_w, d_logits, d_hc, params_[cls_w_idx].g,
                  params_[cls_b_idx].g);

  Mat d_hidden(cache.hidden().rows, cache.hidden().cols);
  for (std::size_t r = 0; r < batch.n_rows; ++r) {
    double* dst = d_hidden.row(r * batch.width);
    kernels::add(dst, d_hc.row(r), dst, d_hidden.cols);
  }
  backward(cache, std::move(d_hidden));
  return loss;
}

void TinyTransformer::zero_grads() {
  for (auto& p : params_) p.g.zero();
}

void TinyTransformer::sgd_step(double lr, double clip_norm) {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (group_trainable(p.group)) {
      sq += kernels::sum_squares(p.g.data(), p.g.numel());
    }
  }
  const double norm = std::sqrt(sq);
  double scale = 1.0;
  if (clip_norm > 0.0 && norm > clip_norm) scale = clip_norm / norm;

  for (auto& p : params_) {
    if (!group_trainable(p.group)) continue;
    const double group_scale =
        p.group < 0 ? 1.0 : lr_scales_[static_cast<std::size_t>(p.group)];
    kernels::axpy(-lr * group_scale * scale, p.g.data(), p.w.data(),
                  p.w.numel());
  }
}

void TinyTransformer::optimizer_step(OptimizerState& state,
                                     const TrainConfig& cfg) {
  if (cfg.optimizer == Optimizer::sgd) {
    sgd_step(cfg.learning_rate, cfg.clip_norm);
    return;
  }

  if (state.m.empty()) {
    state.m.reserve(params_.size());
    state.v.reserve(params_.size());
    for (const auto& p : params_) {
      state.m.emplace_back(p.w.rows, p.w.cols);
      state.v.emplace_back(p.w.rows, p.w.cols);
    }
  }

  double sq = 0.0;
  for (const auto& p : params_) {
    if (group_trainable(p.group)) {
      sq += kernels::sum_squares(p.g.data(), p.g.numel());
    }
  }
  const double norm = std::sqrt(sq);
  const double clip_scale =
      cfg.clip_norm > 0.0 && norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  ++state.t;
  const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.t));

  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = params_[i];
    if (!group_trainable(p.group)) continue;
    const double group_scale =
        p.group < 0 ? 1.0 : lr_scales_[static_cast<std::size_t>(p.group)];
    if (clip_scale != 1.0) {
      kernels::scale(clip_scale, p.g.data(), p.g.numel());
    }
    kernels::adam_update(p.w.data(), p.g.data(), state.m[i].data(),
                         state.v[i].data(), p.w.numel(),
                         cfg.learning_rate * group_scale, kBeta1, kBeta2, kEps,
                         bias1, bias2);
  }
}

std::vector<double> TinyTransformer::predict_probs(const Batch& batch) const {
  const Cache cache = forward(batch);
  const Mat& cls_w = params_.at(params_.size() - 2).w;
  const Mat& cls_b = params_.at(params_.size() - 1).w;

  std::vector<std::size_t> rows(batch.n_rows), cols(batch.n_rows, 0);
  std::iota(rows.begin(), rows.end(), 0);
  Mat hc = gather_rows(cache.hidden(), rows, cols, batch.width);
  Mat logits = linear_forward(hc, cls_w, cls_b);
  kernels::softmax_rows(logits.data(), logits.rows, logits.cols);

  std::vector<double> probs(batch.n_rows);
  for (std::size_t r = 0; r < batch.n_rows; ++r) probs[r] = logits.at(r, 1);
  return probs;
}

std::vector<int> TinyTransformer::predict_masked(const MaskedBatch& mb) const {
  const Cache cache = forward(mb.corrupted);
  const Mat& tok_emb = params_[0].w;
  const Mat& lm_bias = params_.at(params_.size() - 3).w;

  Mat ht = gather_rows(cache.hidden(), mb.target_rows, mb.target_cols,
                       mb.corrupted.width);
  Mat logits = matmul_nt(ht, tok_emb);
  std::vector<int> out(mb.n_targets());
  for (std::size_t i = 0; i < logits.rows; ++i) {
    kernels::add(logits.row(i), lm_bias.data(), logits.row(i), logits.cols);
    const double* row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t jv = 1; jv < logits.cols; ++jv) {
      if (row[jv] > row[best]) best = jv;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<Mat> TinyTransformer::attention_matrices(const Batch& batch) const {
  const Cache cache = forward(batch);
  std::vector<Mat> out;
  for (const auto& lc : cache.layers) {
    out.insert(out.end(), lc.attn.begin(), lc.attn.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// staged training

namespace {

std::vector<std::vector<const Sentence*>> make_batches(
    const std::vector<Sentence>& sentences, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  std::vector<std::vector<const Sentence*>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    std::vector<const Sentence*> batch;
    const std::size_t end = std::min(order.size(), i + batch_size);
    for (std::size_t j = i; j < end; ++j) batch.push_back(&sentences[order[j]]);
    batches.push_back(std::move(batch));
  }
  return batches;
}

void check_divergence(const std::vector<double>& losses, const char* what) {
  if (losses.empty()) return;
  const double current = losses.back();
  if (!std::isfinite(current) || current > losses.front() * 10.0) {
    throw DivergenceError(std::string(what) + ": loss diverged (epoch " +
                          std::to_string(losses.size()) + ", loss " +
                          std::to_string(current) + ")");
  }
}

TrainLog run_mlm_epochs(TinyTransformer& model,
                        const std::vector<Sentence>& corpus,
                        const TrainConfig& cfg, const char* tag) {
  if (!(cfg.mask_prob > 0.0 && cfg.mask_prob < 1.0)) {
    throw ValidationError("mask_prob must be in (0, 1)");
  }
  if (corpus.empty()) {
    throw ValidationError(std::string(tag) + ": empty corpus");
  }

  TrainLog log;
  Rng rng(derive_seed(cfg.seed, tag));
  TinyTransformer::OptimizerState opt;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t target_count = 0;
    for (auto& batch_sentences :
         make_batches(corpus, cfg.batch_size, rng)) {
      const Batch clean =
          encode_batch(model.vocab(), batch_sentences, model.config().max_len);
      const MaskedBatch mb = mask_batch(clean, model.vocab(), cfg.mask_prob, rng);
      if (mb.n_targets() == 0) continue;
      model.zero_grads();
      const double loss = model.mlm_loss_grad(mb);
      model.optimizer_step(opt, cfg);
      loss_sum += loss * static_cast<double>(mb.n_targets());
      target_count += mb.n_targets();
    }
    const double epoch_loss =
        target_count > 0 ? loss_sum / static_cast<double>(target_count) : 0.0;
    log.epoch_losses.push_back(epoch_loss);
    check_divergence(log.epoch_losses, tag);
  }
  return log;
}

}  // namespace

TrainLog pretrain_lm(TinyTransformer& model,
                     const std::vector<Sentence>& corpus,
                     const TrainConfig& cfg) {
  TrainLog log = run_mlm_epochs(model, corpus, cfg, "pretrain");
  model.set_stage(std::max(model.stage(), kStagePretrained));
  return log;
}

TrainLog finetune_lm(TinyTransformer& model,
                     const std::vector<Sentence>& task_corpus,
                     const TrainConfig& cfg) {
  if (model.stage() < kStagePretrained) {
    throw ValidationError(
        "finetune_lm: stage 2 requires a stage-1 pretrained model");
  }
  TrainLog log = run_mlm_epochs(model, task_corpus, cfg, "finetune-lm");
  model.set_stage(std::max(model.stage(), kStageLmFinetuned));
  return log;
}

TrainLog finetune_classifier(TinyTransformer& model,
                             const std::vector<Sentence>& labeled,
                             const ClassWeights& weights,
                             const TrainConfig& cfg) {
  TrainLog log;
  if (model.stage() < kStageLmFinetuned) {
    if (!cfg.allow_stage_skip) {
      throw ValidationError(
          "finetune_classifier: stages 1-2 incomplete (rerun with the "
          "stage-skip flag to train from scratch)");
    }
    log.notes.push_back("LM stages skipped: classifier trained from stage " +
                        std::to_string(model.stage()));
  }
  if (labeled.empty()) {
    throw ValidationError("finetune_classifier: empty training set");
  }
  bool has_pos = false, has_neg = false;
  for (const auto& s : labeled) {
    (s.label == Label::relevant ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) {
    throw ValidationError(
        "finetune_classifier: need at least one example per class");
  }

  model.set_discriminative_lr_scales(cfg.lr_decay_per_layer);
  const std::size_t n_groups = model.config().n_layers + 1;

  Rng rng(derive_seed(cfg.seed, "classifier"));
  TinyTransformer::OptimizerState opt;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    model.unfreeze_top(
        std::min(n_groups, (epoch + 1) * cfg.unfreeze_per_epoch));

    double loss_sum = 0.0;
    std::size_t example_count = 0;
    for (auto& batch_sentences : make_batches(labeled, cfg.batch_size, rng)) {
      const Batch batch =
          encode_batch(model.vocab(), batch_sentences, model.config().max_len);
      std::vector<int> labels;
      labels.reserve(batch_sentences.size());
      for (const Sentence* s : batch_sentences) {
        labels.push_back(s->label == Label::relevant ? 1 : 0);
      }
      model.zero_grads();
      const double loss = model.cls_loss_grad(batch, labels, weights);
      model.optimizer_step(opt, cfg);
      loss_sum += loss * static_cast<double>(batch.n_rows);
      example_count += batch.n_rows;
    }
    log.epoch_losses.push_back(loss_sum /
                               static_cast<double>(example_count));
    check_divergence(log.epoch_losses, "finetune_classifier");
  }
  model.set_stage(kStageClassifier);
  return log;
}

double masked_accuracy(const TinyTransformer& model,
                       const std::vector<Sentence>& corpus, double mask_prob,
                       std::uint64_t seed) {
  Rng rng(derive_seed(seed, "mlm-eval"));
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < corpus.size(); i += 32) {
    std::vector<const Sentence*> chunk;
    for (std::size_t j = i; j < std::min(corpus.size(), i + 32); ++j) {
      chunk.push_back(&corpus[j]);
    }
    const Batch clean = encode_batch(model.vocab(), chunk, model.config().max_len);
    const MaskedBatch mb = mask_batch(clean, model.vocab(), mask_prob, rng);
    if (mb.n_targets() == 0) continue;
    const std::vector<int> predicted = model.predict_masked(mb);
    for (std::size_t t = 0; t < predicted.size(); ++t) {
      if (predicted[t] == mb.target_ids[t]) ++correct;
    }
    total += predicted.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) /
                                static_cast<double>(total);
}

}  // namespace threatlens
