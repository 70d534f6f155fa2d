#include "seqrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "binary_io.hpp"

namespace seqrl {

namespace {

constexpr std::string_view kPolicyMagic = "SQRLPOL1";
constexpr std::uint32_t kPolicyFormatVersion = 1;

// log-softmax of logits / temperature, written into out.
void log_softmax(const std::vector<double>& logits, double temperature,
                 std::vector<double>& out) {
  out.resize(logits.size());
  double max_v = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = logits[i] / temperature;
    max_v = std::max(max_v, out[i]);
  }
  double sum = 0.0;
  for (double v : out) sum += std::exp(v - max_v);
  const double log_z = max_v + std::log(sum);
  for (double& v : out) v -= log_z;
}

void validate_shape(const PolicyShape& s) {
  if (s.vocab < 1 || s.embed_dim < 1 || s.window < 1 || s.hidden < 1) {
    throw ContractError("policy shape dimensions must be positive");
  }
}

}  // namespace

std::size_t PolicyShape::parameter_count() const {
  const std::size_t v = vocab, d = embed_dim, w = window, h = hidden;
  return v * d + h * w * d + h + v * h + v + h + 1;
}

PolicyParams::PolicyParams(const PolicyShape& shape)
    : shape_(shape), data_(shape.parameter_count(), 0.0) {
  validate_shape(shape);
}

PolicyParams PolicyParams::initialize(const PolicyShape& shape,
                                      std::uint64_t seed) {
  PolicyParams p(shape);
  Rng rng(seed);
  for (double& x : p.group(kEmbedding)) x = rng.uniform(-0.05, 0.05);
  for (double& x : p.group(kHiddenWeight)) x = rng.uniform(-0.05, 0.05);
  return p;
}

std::size_t PolicyParams::length(Group g) const {
  const std::size_t v = shape_.vocab, d = shape_.embed_dim, w = shape_.window,
                    h = shape_.hidden;
  switch (g) {
    case kEmbedding: return v * d;
    case kHiddenWeight: return h * w * d;
    case kHiddenBias: return h;
    case kOutputWeight: return v * h;
    case kOutputBias: return v;
    case kValueWeight: return h;
    case kValueBias: return 1;
    default: throw ContractError("bad parameter group");
  }
}

std::size_t PolicyParams::offset(Group g) const {
  std::size_t off = 0;
  for (int i = 0; i < g; ++i) off += length(static_cast<Group>(i));
  return off;
}

std::span<double> PolicyParams::group(Group g) {
  return std::span<double>(data_).subspan(offset(g), length(g));
}

std::span<const double> PolicyParams::group(Group g) const {
  return std::span<const double>(data_).subspan(offset(g), length(g));
}

const char* PolicyParams::group_name(Group g) {
  static constexpr const char* kNames[] = {
      "embedding",    "hidden_weight", "hidden_bias", "output_weight",
      "output_bias",  "value_weight",  "value_bias"};
  return kNames[g];
}

bool PolicyParams::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------

PolicyEvaluator::PolicyEvaluator(const PolicyParams& params)
    : params_(&params) {
  const PolicyShape& s = params.shape();
  const int d = s.embed_dim, w = s.window, v = s.vocab, h = s.hidden;
  const int in = w * d;
  table_.assign(static_cast<std::size_t>(w) * v * h, 0.0);
  auto weight = params.group(PolicyParams::kHiddenWeight);
  for (int p = 0; p < w; ++p) {
    for (int tok = 0; tok < v; ++tok) {
      const double* e = params.embedding_row(tok);
      double* row = table_.data() + (static_cast<std::size_t>(p) * v + tok) * h;
      for (int j = 0; j < h; ++j) {
        const double* wrow = weight.data() + static_cast<std::size_t>(j) * in + p * d;
        double acc = 0.0;
        for (int k = 0; k < d; ++k) acc += wrow[k] * e[k];
        row[j] = acc;
      }
    }
  }
}

void PolicyEvaluator::context(std::span<const TokenId> sequence,
                              std::size_t end, std::vector<int>& out) const {
  const int w = params_->shape().window;
  // The last id pads the context. In the standard vocabulary that is '_',
  // and it keeps small test vocabularies in range.
  const int pad = params_->shape().vocab - 1;
  out.resize(w);
  for (int p = 0; p < w; ++p) {
    const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(end) - w + p;
    out[p] = idx < 0 ? pad : sequence[static_cast<std::size_t>(idx)];
  }
}

void PolicyEvaluator::hidden(const std::vector<int>& ctx,
                             std::vector<double>& out) const {
  const PolicyShape& s = params_->shape();
  const int h = s.hidden, v = s.vocab;
  auto bias = params_->group(PolicyParams::kHiddenBias);
  out.assign(bias.begin(), bias.end());
  for (int p = 0; p < s.window; ++p) {
    const double* row =
        table_.data() + (static_cast<std::size_t>(p) * v + ctx[p]) * h;
    for (int j = 0; j < h; ++j) out[j] += row[j];
  }
  for (double& x : out) x = std::tanh(x);
}

void PolicyEvaluator::logits(const std::vector<double>& h,
                             std::vector<double>& out) const {
  const PolicyShape& s = params_->shape();
  auto weight = params_->group(PolicyParams::kOutputWeight);
  auto bias = params_->group(PolicyParams::kOutputBias);
  out.resize(s.vocab);
  for (int v = 0; v < s.vocab; ++v) {
    const double* row = weight.data() + static_cast<std::size_t>(v) * s.hidden;
    double acc = bias[v];
    for (int j = 0; j < s.hidden; ++j) acc += row[j] * h[j];
    out[v] = acc;
  }
}

double PolicyEvaluator::value(const std::vector<double>& h) const {
  auto weight = params_->group(PolicyParams::kValueWeight);
  double acc = params_->group(PolicyParams::kValueBias)[0];
  for (std::size_t j = 0; j < h.size(); ++j) acc += weight[j] * h[j];
  return acc;
}

Trajectory PolicyEvaluator::sample(std::span<const TokenId> question,
                                   const GenerationConfig& gen) const {
  if (!(gen.temperature > 0.0)) {
    throw ContractError("temperature must be positive");
  }
  if (gen.max_length < 1) throw ContractError("max_length must be >= 1");
  const TokenId eos = Vocabulary::standard().eos();
  Rng rng(gen.seed);

  Trajectory traj;
  traj.question.assign(question.begin(), question.end());
  TokenSeq seq(question.begin(), question.end());
  std::vector<int> ctx;
  std::vector<double> h, z, logp;
  for (int t = 0; t < gen.max_length; ++t) {
    context(seq, seq.size(), ctx);
    hidden(ctx, h);
    logits(h, z);
    log_softmax(z, gen.temperature, logp);
    int pick = 0;
    if (gen.greedy) {
      pick = static_cast<int>(std::max_element(logp.begin(), logp.end()) -
                              logp.begin());
    } else {
      const double u = rng.uniform();
      double cum = 0.0;
      pick = static_cast<int>(logp.size()) - 1;
      for (std::size_t i = 0; i < logp.size(); ++i) {
        cum += std::exp(logp[i]);
        if (u < cum) {
          pick = static_cast<int>(i);
          break;
        }
      }
    }
    const auto tok = static_cast<TokenId>(pick);
    seq.push_back(tok);
    traj.response.push_back(tok);
    traj.logprobs_old.push_back(logp[pick]);
    if (tok == eos) break;
  }
  return traj;
}

TokenEvaluation PolicyEvaluator::evaluate(std::span<const TokenId> question,
                                          std::span<const TokenId> response,
                                          double temperature) const {
  TokenSeq seq(question.begin(), question.end());
  seq.insert(seq.end(), response.begin(), response.end());
  TokenEvaluation out;
  out.logprobs.reserve(response.size());
  out.values.reserve(response.size() + 1);
  std::vector<int> ctx;
  std::vector<double> h, z, logp;
  for (std::size_t t = 0; t <= response.size(); ++t) {
    context(seq, question.size() + t, ctx);
    hidden(ctx, h);
    out.values.push_back(value(h));
    if (t == response.size()) break;
    logits(h, z);
    log_softmax(z, temperature, logp);
    out.logprobs.push_back(logp[response[t]]);
  }
  return out;
}

std::vector<double> PolicyEvaluator::next_token_probs(
    std::span<const TokenId> prefix, double temperature) const {
  std::vector<int> ctx;
  std::vector<double> h, z, logp;
  context(prefix, prefix.size(), ctx);
  hidden(ctx, h);
  logits(h, z);
  log_softmax(z, temperature, logp);
  for (double& x : logp) x = std::exp(x);
  return logp;
}

Trajectory sample(const PolicyParams& params, std::span<const TokenId> question,
                  const GenerationConfig& gen) {
  return PolicyEvaluator(params).sample(question, gen);
}

TokenEvaluation logprob_and_value(const PolicyParams& params,
                                  const Trajectory& trajectory,
                                  double temperature) {
  return PolicyEvaluator(params).evaluate(trajectory.question,
                                          trajectory.response, temperature);
}

// ---------------------------------------------------------------------------

namespace {

void check_alignment(std::span<const Trajectory> batch,
                     const TokenTensor& tensor, const char* what) {
  if (tensor.size() != batch.size()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(tensor.size()) +
                     " rows for " + std::to_string(batch.size()) +
                     " trajectories");
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (tensor[i].size() != batch[i].response.size()) {
      throw ShapeError(std::string(what) + ": row " + std::to_string(i) +
                       " has " + std::to_string(tensor[i].size()) +
                       " entries for a response of " +
                       std::to_string(batch[i].response.size()) + " tokens");
    }
  }
}

// Shared forward (and optional backward) pass over the surrogate objective.
SurrogateResult run_surrogate(const PolicyParams& params,
                              std::span<const Trajectory> batch,
                              const TokenTensor& advantages,
                              const SurrogateOptions& opt,
                              const PolicyParams* ref_params,
                              const TokenTensor* value_targets,
                              bool want_gradient) {
  check_alignment(batch, advantages, "advantages");
  if (value_targets) check_alignment(batch, *value_targets, "value targets");
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].logprobs_old.size() != batch[i].response.size()) {
      throw ShapeError("trajectory " + std::to_string(i) +
                       ": logprobs_old length differs from response length");
    }
  }
  if (!(opt.clip_eps > 0.0 && opt.clip_eps < 1.0)) {
    throw ContractError("clip epsilon must lie in (0, 1)");
  }
  if (opt.kl_beta < 0.0) throw ContractError("kl beta must be >= 0");
  if (!(opt.temperature > 0.0)) throw ContractError("temperature must be > 0");
  const bool use_kl = opt.kl_beta > 0.0;
  if (use_kl && !ref_params) {
    throw ContractError("kl beta > 0 requires reference parameters");
  }
  if (use_kl && !(ref_params->shape() == params.shape())) {
    throw ShapeError("reference parameters have a different shape");
  }

  const PolicyShape& s = params.shape();
  const int V = s.vocab, H = s.hidden, D = s.embed_dim, W = s.window;
  PolicyEvaluator eval(params);
  std::optional<PolicyEvaluator> ref_eval;
  if (use_kl) ref_eval.emplace(*ref_params);

  SurrogateResult res;
  if (want_gradient) res.gradient = PolicyParams(s);

  std::size_t sequences = 0, tokens = 0;
  for (const Trajectory& t : batch) {
    if (!t.response.empty()) {
      ++sequences;
      tokens += t.response.size();
    }
  }
  res.tokens = tokens;
  if (tokens == 0) return res;

  std::span<double> g_out_w, g_out_b, g_val_w, g_val_b, g_hid_b;
  std::vector<double> table_grad;
  if (want_gradient) {
    g_out_w = res.gradient.group(PolicyParams::kOutputWeight);
    g_out_b = res.gradient.group(PolicyParams::kOutputBias);
    g_val_w = res.gradient.group(PolicyParams::kValueWeight);
    g_val_b = res.gradient.group(PolicyParams::kValueBias);
    g_hid_b = res.gradient.group(PolicyParams::kHiddenBias);
    table_grad.assign(static_cast<std::size_t>(W) * V * H, 0.0);
  }
  auto out_w = params.group(PolicyParams::kOutputWeight);
  auto val_w = params.group(PolicyParams::kValueWeight);

  std::vector<int> ctx;
  std::vector<double> h, z, logp, ref_h, ref_z, ref_logp, dlogits(V), dh(H);
  std::size_t clipped = 0;
  double kl_sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Trajectory& traj = batch[i];
    const std::size_t len = traj.response.size();
    if (len == 0) continue;
    const double weight = opt.aggregation == LossAggregation::kSequenceMean
                              ? 1.0 / (static_cast<double>(sequences) * len)
                              : 1.0 / static_cast<double>(tokens);
    TokenSeq seq(traj.question);
    seq.insert(seq.end(), traj.response.begin(), traj.response.end());
    for (std::size_t t = 0; t < len; ++t) {
      const int tok = traj.response[t];
      eval.context(seq, traj.question.size() + t, ctx);
      eval.hidden(ctx, h);
      eval.logits(h, z);
      log_softmax(z, opt.temperature, logp);
      const double lp = logp[tok];
      const double adv = advantages[i][t];
      const double ratio = std::exp(lp - traj.logprobs_old[t]);
      const double lo = 1.0 - opt.clip_eps, hi = 1.0 + opt.clip_eps;
      const double clipped_ratio = std::clamp(ratio, lo, hi);
      const double surrogate = std::min(ratio * adv, clipped_ratio * adv);
      const bool active = adv >= 0.0 ? ratio <= hi : ratio >= lo;
      if (!active) ++clipped;
      double d_obj_d_lp = active ? ratio * adv : 0.0;
      double objective = surrogate;
      if (use_kl) {
        ref_eval->hidden(ctx, ref_h);
        ref_eval->logits(ref_h, ref_z);
        log_softmax(ref_z, opt.temperature, ref_logp);
        const double x = ref_logp[tok] - lp;
        const double kl = std::exp(x) - x - 1.0;
        kl_sum += kl;
        objective -= opt.kl_beta * kl;
        d_obj_d_lp -= opt.kl_beta * (1.0 - std::exp(x));
      }
      res.policy_loss -= weight * objective;

      double d_value = 0.0;
      if (value_targets) {
        const double v = eval.value(h);
        const double err = v - (*value_targets)[i][t];
        res.value_loss += weight * 0.5 * err * err;
        d_value = opt.value_coef * weight * err;
      }
      if (!want_gradient) continue;

      // d loss / d logits = -weight * dJ/dlp * (onehot - p) / T
      const double scale = -weight * d_obj_d_lp / opt.temperature;
      for (int v = 0; v < V; ++v) {
        dlogits[v] = scale * ((v == tok ? 1.0 : 0.0) - std::exp(logp[v]));
      }
      std::fill(dh.begin(), dh.end(), 0.0);
      for (int v = 0; v < V; ++v) {
        if (dlogits[v] == 0.0) continue;
        g_out_b[v] += dlogits[v];
        double* gw = g_out_w.data() + static_cast<std::size_t>(v) * H;
        const double* w = out_w.data() + static_cast<std::size_t>(v) * H;
        for (int j = 0; j < H; ++j) {
          gw[j] += dlogits[v] * h[j];
          dh[j] += dlogits[v] * w[j];
        }
      }
      if (d_value != 0.0) {
        g_val_b[0] += d_value;
        for (int j = 0; j < H; ++j) {
          g_val_w[j] += d_value * h[j];
          dh[j] += d_value * val_w[j];
        }
      }
      for (int j = 0; j < H; ++j) {
        const double dpre = dh[j] * (1.0 - h[j] * h[j]);
        dh[j] = dpre;
        g_hid_b[j] += dpre;
      }
      for (int p = 0; p < W; ++p) {
        double* tg =
            table_grad.data() + (static_cast<std::size_t>(p) * V + ctx[p]) * H;
        for (int j = 0; j < H; ++j) tg[j] += dh[j];
      }
    }
  }
  res.clip_fraction = static_cast<double>(clipped) / static_cast<double>(tokens);
  res.mean_kl = use_kl ? kl_sum / static_cast<double>(tokens) : 0.0;
  res.loss = res.policy_loss + opt.value_coef * res.value_loss;

  if (want_gradient) {
    // Fold the per-(position, token) hidden-input gradients back into the
    // hidden weights and the embedding table.
    auto hid_w = params.group(PolicyParams::kHiddenWeight);
    auto g_hid_w = res.gradient.group(PolicyParams::kHiddenWeight);
    auto g_emb = res.gradient.group(PolicyParams::kEmbedding);
    const int in = W * D;
    for (int p = 0; p < W; ++p) {
      for (int tok = 0; tok < V; ++tok) {
        const double* tg =
            table_grad.data() + (static_cast<std::size_t>(p) * V + tok) * H;
        bool any = false;
        for (int j = 0; j < H && !any; ++j) any = tg[j] != 0.0;
        if (!any) continue;
        const double* e = params.embedding_row(tok);
        double* ge = g_emb.data() + static_cast<std::size_t>(tok) * D;
        for (int j = 0; j < H; ++j) {
          const double g = tg[j];
          if (g == 0.0) continue;
          double* gw = g_hid_w.data() + static_cast<std::size_t>(j) * in + p * D;
          const double* w = hid_w.data() + static_cast<std::size_t>(j) * in + p * D;
          for (int k = 0; k < D; ++k) {
            gw[k] += g * e[k];
            ge[k] += g * w[k];
          }
        }
      }
    }
  }
  return res;
}

}  // namespace

SurrogateResult gradients(const PolicyParams& params,
                          std::span<const Trajectory> batch,
                          const TokenTensor& advantages,
                          const SurrogateOptions& options,
                          const PolicyParams* ref_params,
                          const TokenTensor* value_targets) {
  return run_surrogate(params, batch, advantages, options, ref_params,
                       value_targets, true);
}

double surrogate_loss(const PolicyParams& params,
                      std::span<const Trajectory> batch,
                      const TokenTensor& advantages,
                      const SurrogateOptions& options,
                      const PolicyParams* ref_params,
                      const TokenTensor* value_targets) {
  return run_surrogate(params, batch, advantages, options, ref_params,
                       value_targets, false)
      .loss;
}

void apply_gradient(PolicyParams& params, const PolicyParams& gradient,
                    double learning_rate) {
  if (!(params.shape() == gradient.shape())) {
    throw ShapeError("gradient shape does not match parameters");
  }
  auto p = params.flat();
  auto g = gradient.flat();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= learning_rate * g[i];
}

void AdamOptimizer::step(PolicyParams& params, const PolicyParams& gradient,
                         double learning_rate) {
  if (!(params.shape() == gradient.shape())) {
    throw ShapeError("gradient shape does not match parameters");
  }
  auto p = params.flat();
  auto g = gradient.flat();
  if (m_.size() != p.size()) {
    m_.assign(p.size(), 0.0);
    v_.assign(p.size(), 0.0);
    t_ = 0;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g[i] * g[i];
    p[i] -= learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

// ---------------------------------------------------------------------------

namespace {

void write_policy_header(detail::BinaryWriter& w, const PolicyShape& s,
                         CheckpointKind kind) {
  w.magic(kPolicyMagic);
  w.u32(kPolicyFormatVersion);
  w.u32(static_cast<std::uint32_t>(kind));
  w.u32(static_cast<std::uint32_t>(s.vocab));
  w.u32(static_cast<std::uint32_t>(s.embed_dim));
  w.u32(static_cast<std::uint32_t>(s.window));
  w.u32(1);  // hidden layer count
  w.u32(static_cast<std::uint32_t>(s.hidden));
}

struct PolicyHeader {
  PolicyShape shape;
  CheckpointKind kind;
};

PolicyHeader read_policy_header(detail::BinaryReader& r,
                                const std::string& path) {
  r.expect_magic(kPolicyMagic);
  const std::uint32_t version = r.u32();
  if (version != kPolicyFormatVersion) {
    throw IoError("unsupported policy checkpoint version " +
                  std::to_string(version) + " in " + path);
  }
  PolicyHeader hdr;
  const std::uint32_t kind = r.u32();
  if (kind > 1) throw IoError("unknown checkpoint kind in " + path);
  hdr.kind = static_cast<CheckpointKind>(kind);
  hdr.shape.vocab = static_cast<int>(r.u32());
  hdr.shape.embed_dim = static_cast<int>(r.u32());
  hdr.shape.window = static_cast<int>(r.u32());
  if (r.u32() != 1) throw IoError("expected one hidden layer in " + path);
  hdr.shape.hidden = static_cast<int>(r.u32());
  if (hdr.shape.vocab < 1 || hdr.shape.vocab > 64 || hdr.shape.embed_dim < 1 ||
      hdr.shape.window < 1 || hdr.shape.hidden < 1) {
    throw IoError("implausible policy shape in " + path);
  }
  return hdr;
}

}  // namespace

void save_policy(const std::string& path, const PolicyParams& params,
                 CheckpointKind kind) {
  detail::BinaryWriter w(path);
  write_policy_header(w, params.shape(), kind);
  if (kind == CheckpointKind::kPolicy) {
    w.u64(params.size());
    w.f64s(params.flat());
  } else {
    auto vw = params.group(PolicyParams::kValueWeight);
    auto vb = params.group(PolicyParams::kValueBias);
    w.u64(vw.size() + vb.size());
    w.f64s(vw);
    w.f64s(vb);
  }
  w.finish();
}

PolicyParams load_policy(const std::string& path) {
  detail::BinaryReader r(path);
  const PolicyHeader hdr = read_policy_header(r, path);
  if (hdr.kind != CheckpointKind::kPolicy) {
    throw IoError(path + " is a value-head checkpoint, not a policy");
  }
  PolicyParams params(hdr.shape);
  if (r.u64() != params.size()) {
    throw IoError("parameter count mismatch in " + path);
  }
  r.f64s(params.flat());
  r.expect_end();
  return params;
}

void load_value_head(const std::string& path, PolicyParams& params) {
  detail::BinaryReader r(path);
  const PolicyHeader hdr = read_policy_header(r, path);
  if (hdr.kind != CheckpointKind::kValueHead) {
    throw IoError(path + " is not a value-head checkpoint");
  }
  if (!(hdr.shape == params.shape())) {
    throw ShapeError("value-head checkpoint shape differs from policy");
  }
  auto vw = params.group(PolicyParams::kValueWeight);
  auto vb = params.group(PolicyParams::kValueBias);
  if (r.u64() != vw.size() + vb.size()) {
    throw IoError("value-head size mismatch in " + path);
  }
  r.f64s(vw);
  r.f64s(vb);
  r.expect_end();
}

}  // namespace seqrl
