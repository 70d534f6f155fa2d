#include "seqrl/exploration.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"

namespace seqrl {

namespace {

constexpr int kD = NoveltyNet::kEmbedDim;
constexpr int kH1 = NoveltyNet::kWidths[0];
constexpr int kH2 = NoveltyNet::kWidths[1];
constexpr std::string_view kExplorationMagic = "SQRLEXP1";
constexpr std::uint32_t kExplorationFormatVersion = 1;

struct Activations {
  NoveltyNet::Feature x{};
  std::array<double, kH1> a1{};
  std::array<double, kH2> a2{};
  double out = 0.0;
};

void forward_cached(const NoveltyNet& net, Activations& act) {
  auto w1 = net.group(NoveltyNet::kW1);
  auto b1 = net.group(NoveltyNet::kB1);
  auto w2 = net.group(NoveltyNet::kW2);
  auto b2 = net.group(NoveltyNet::kB2);
  auto w3 = net.group(NoveltyNet::kW3);
  auto b3 = net.group(NoveltyNet::kB3);
  for (int j = 0; j < kH1; ++j) {
    double z = b1[j];
    for (int k = 0; k < kD; ++k) z += w1[j * kD + k] * act.x[k];
    act.a1[j] = std::tanh(z);
  }
  for (int j = 0; j < kH2; ++j) {
    double z = b2[j];
    for (int k = 0; k < kH1; ++k) z += w2[j * kH1 + k] * act.a1[k];
    act.a2[j] = std::tanh(z);
  }
  double z = b3[0];
  for (int k = 0; k < kH2; ++k) z += w3[k] * act.a2[k];
  act.out = z;
}

}  // namespace

NoveltyNet::NoveltyNet(int vocab) : vocab_(vocab) {
  if (vocab < 1) throw ContractError("novelty net vocabulary must be >= 1");
  std::size_t total = 0;
  for (int g = 0; g < kGroupCount; ++g) total += length(static_cast<Group>(g));
  data_.assign(total, 0.0);
}

NoveltyNet NoveltyNet::random(int vocab, std::uint64_t seed) {
  NoveltyNet net(vocab);
  Rng rng(seed);
  const double embed_bound = std::sqrt(3.0);
  for (double& x : net.group(kEmbedding)) x = rng.uniform(-embed_bound, embed_bound);
  const std::array<std::pair<Group, int>, 3> dense = {
      std::pair{kW1, kD}, std::pair{kW2, kH1}, std::pair{kW3, kH2}};
  for (auto [g, fan_in] : dense) {
    const double bound = std::sqrt(3.0 / fan_in);
    for (double& x : net.group(g)) x = rng.uniform(-bound, bound);
  }
  return net;
}

std::size_t NoveltyNet::length(Group g) const {
  switch (g) {
    case kEmbedding: return static_cast<std::size_t>(vocab_) * kD;
    case kW1: return kH1 * kD;
    case kB1: return kH1;
    case kW2: return kH2 * kH1;
    case kB2: return kH2;
    case kW3: return kH2;
    case kB3: return 1;
    default: throw ContractError("bad novelty net group");
  }
}

std::size_t NoveltyNet::offset(Group g) const {
  std::size_t off = 0;
  for (int i = 0; i < g; ++i) off += length(static_cast<Group>(i));
  return off;
}

std::span<double> NoveltyNet::group(Group g) {
  return std::span<double>(data_).subspan(offset(g), length(g));
}

std::span<const double> NoveltyNet::group(Group g) const {
  return std::span<const double>(data_).subspan(offset(g), length(g));
}

NoveltyNet::Feature NoveltyNet::featurize(
    std::span<const TokenId> question,
    std::span<const TokenId> response) const {
  const std::size_t n = question.size() + response.size();
  if (n == 0) throw ContractError("featurize: empty sequence");
  // Pool from token counts: each row is weighted by count / n, so a
  // sequence of one repeated token reproduces that row exactly.
  std::vector<std::size_t> counts(static_cast<std::size_t>(vocab_), 0);
  auto count = [&](TokenId t) {
    if (t >= vocab_) throw ContractError("featurize: token outside vocabulary");
    ++counts[t];
  };
  for (TokenId t : question) count(t);
  for (TokenId t : response) count(t);
  Feature mean{};
  auto emb = group(kEmbedding);
  for (int t = 0; t < vocab_; ++t) {
    if (counts[static_cast<std::size_t>(t)] == 0) continue;
    const double w = static_cast<double>(counts[static_cast<std::size_t>(t)]) /
                     static_cast<double>(n);
    const double* row = emb.data() + static_cast<std::size_t>(t) * kD;
    for (int k = 0; k < kD; ++k) mean[k] += w * row[k];
  }
  return mean;
}

double NoveltyNet::forward(const Feature& x) const {
  Activations act;
  act.x = x;
  forward_cached(*this, act);
  return act.out;
}

std::vector<SequenceRef> sequence_refs(std::span<const Trajectory> batch) {
  std::vector<SequenceRef> out;
  out.reserve(batch.size());
  for (const Trajectory& t : batch) out.push_back({t.question, t.response});
  return out;
}

// ---------------------------------------------------------------------------

ExplorationNets::ExplorationNets(int vocab, std::uint64_t seed,
                                 double learning_rate)
    : target_(NoveltyNet::random(vocab, derive_seed(seed, 1))),
      predictor_(NoveltyNet::random(vocab, derive_seed(seed, 2))),
      learning_rate_(learning_rate) {}

ExplorationNets ExplorationNets::with_copied_predictor(int vocab,
                                                       std::uint64_t seed,
                                                       double learning_rate) {
  ExplorationNets nets(vocab, seed, learning_rate);
  nets.predictor_ = nets.target_;
  return nets;
}

void ExplorationNets::restore(NoveltyNet target, NoveltyNet predictor) {
  if (target.size() != predictor.size()) {
    throw ShapeError("target and predictor shapes differ");
  }
  target_ = std::move(target);
  predictor_ = std::move(predictor);
}

NoveltyEval novelty_raw(const ExplorationNets& nets,
                        std::span<const TokenId> question,
                        std::span<const TokenId> response) {
  const double diff = nets.predictor()(question, response) -
                      nets.target()(question, response);
  NoveltyEval out;
  out.raw_error = diff * diff;
  out.predictor_loss = out.raw_error;
  return out;
}

PredictorGradient predictor_gradient(const ExplorationNets& nets,
                                     std::span<const SequenceRef> batch) {
  if (batch.empty()) throw ContractError("predictor update on empty batch");
  const NoveltyNet& net = nets.predictor();
  PredictorGradient res;
  res.gradient = NoveltyNet(net.vocab());
  auto w1 = net.group(NoveltyNet::kW1);
  auto w2 = net.group(NoveltyNet::kW2);
  auto w3 = net.group(NoveltyNet::kW3);
  auto gE = res.gradient.group(NoveltyNet::kEmbedding);
  auto gW1 = res.gradient.group(NoveltyNet::kW1);
  auto gB1 = res.gradient.group(NoveltyNet::kB1);
  auto gW2 = res.gradient.group(NoveltyNet::kW2);
  auto gB2 = res.gradient.group(NoveltyNet::kB2);
  auto gW3 = res.gradient.group(NoveltyNet::kW3);
  auto gB3 = res.gradient.group(NoveltyNet::kB3);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  Activations act;
  for (const SequenceRef& seq : batch) {
    act.x = net.featurize(seq.question, seq.response);
    forward_cached(net, act);
    const double diff = act.out - nets.target()(seq.question, seq.response);
    res.mean_loss += diff * diff * inv_batch;

    const double dout = 2.0 * diff * inv_batch;
    gB3[0] += dout;
    std::array<double, kH2> dz2{};
    for (int k = 0; k < kH2; ++k) {
      gW3[k] += dout * act.a2[k];
      dz2[k] = dout * w3[k] * (1.0 - act.a2[k] * act.a2[k]);
    }
    std::array<double, kH1> da1{};
    for (int j = 0; j < kH2; ++j) {
      gB2[j] += dz2[j];
      for (int k = 0; k < kH1; ++k) {
        gW2[j * kH1 + k] += dz2[j] * act.a1[k];
        da1[k] += dz2[j] * w2[j * kH1 + k];
      }
    }
    NoveltyNet::Feature dx{};
    for (int j = 0; j < kH1; ++j) {
      const double dz1 = da1[j] * (1.0 - act.a1[j] * act.a1[j]);
      gB1[j] += dz1;
      for (int k = 0; k < kD; ++k) {
        gW1[j * kD + k] += dz1 * act.x[k];
        dx[k] += dz1 * w1[j * kD + k];
      }
    }
    const double inv_len =
        1.0 / static_cast<double>(seq.question.size() + seq.response.size());
    auto scatter = [&](TokenId t) {
      double* row = gE.data() + static_cast<std::size_t>(t) * kD;
      for (int k = 0; k < kD; ++k) row[k] += dx[k] * inv_len;
    };
    for (TokenId t : seq.question) scatter(t);
    for (TokenId t : seq.response) scatter(t);
  }
  return res;
}

double update_predictor(ExplorationNets& nets,
                        std::span<const SequenceRef> batch) {
  PredictorGradient g = predictor_gradient(nets, batch);
  auto p = nets.mutable_predictor().flat();
  auto d = g.gradient.flat();
  const double lr = nets.learning_rate();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * d[i];
  return g.mean_loss;
}

// ---------------------------------------------------------------------------

RewardMode parse_reward_mode(const std::string& text) {
  if (text == "minmax_decay") return RewardMode::kMinMaxDecay;
  if (text == "rnd_std") return RewardMode::kRndStd;
  throw ConfigError("reward_mode",
                    "expected 'minmax_decay' or 'rnd_std', got '" + text + "'");
}

const char* to_string(RewardMode mode) {
  return mode == RewardMode::kMinMaxDecay ? "minmax_decay" : "rnd_std";
}

double ExplorationSchedule::decay_factor() const {
  return attenuation / (attenuation + static_cast<double>(step));
}

double ExplorationSchedule::running_std() const {
  if (!stats_initialized) return 0.0;
  return std::sqrt(std::max(running_sq - running_mean * running_mean, 0.0));
}

void ExplorationSchedule::observe(std::span<const double> raw_errors) {
  if (raw_errors.empty()) return;
  double mean = 0.0, sq = 0.0;
  for (double r : raw_errors) {
    mean += r;
    sq += r * r;
  }
  mean /= static_cast<double>(raw_errors.size());
  sq /= static_cast<double>(raw_errors.size());
  if (!stats_initialized) {
    running_mean = mean;
    running_sq = sq;
    stats_initialized = true;
    return;
  }
  running_mean = momentum * running_mean + (1.0 - momentum) * mean;
  running_sq = momentum * running_sq + (1.0 - momentum) * sq;
}

std::vector<NoveltyRecord> exploration_reward_from_errors(
    std::span<const double> raw_errors, std::span<const Trajectory> batch,
    ExplorationSchedule& schedule, bool training) {
  if (raw_errors.size() != batch.size()) {
    throw ShapeError("exploration_reward: one raw error per trajectory");
  }
  if (batch.empty()) throw ContractError("exploration_reward: empty batch");
  if (schedule.alpha < 0.0 || !(schedule.attenuation > 0.0)) {
    throw ContractError("exploration schedule needs alpha >= 0, gamma > 0");
  }

  std::vector<NoveltyRecord> out(batch.size());
  const auto [lo_it, hi_it] =
      std::minmax_element(raw_errors.begin(), raw_errors.end());
  const double lo = *lo_it, hi = *hi_it;
  if (schedule.mode == RewardMode::kRndStd && training) {
    schedule.observe(raw_errors);
  }
  const double std_dev = schedule.running_std();
  const double decay = schedule.decay_factor();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    NoveltyRecord& rec = out[i];
    rec.problem_id = batch[i].problem_id;
    rec.trajectory_index = i;
    rec.raw_error = raw_errors[i];
    if (schedule.mode == RewardMode::kMinMaxDecay) {
      rec.normalized =
          hi > lo ? schedule.alpha * (raw_errors[i] - lo) / (hi - lo) : 0.0;
    } else {
      rec.normalized = std_dev > 0.0 ? raw_errors[i] / std_dev : 0.0;
    }
    rec.conditioned = batch[i].outcome.correct ? 0.0 : rec.normalized;
    rec.reward = decay * rec.conditioned;
  }
  return out;
}

std::vector<NoveltyRecord> exploration_reward(const ExplorationNets& nets,
                                              ExplorationSchedule& schedule,
                                              std::span<const Trajectory> batch,
                                              bool training) {
  std::vector<double> raw;
  raw.reserve(batch.size());
  for (const Trajectory& t : batch) {
    raw.push_back(novelty_raw(nets, t.question, t.response).raw_error);
  }
  return exploration_reward_from_errors(raw, batch, schedule, training);
}

TokenTensor inject(const TokenTensor& advantages_old,
                   std::span<const NoveltyRecord> records, Algo algo) {
  if (records.size() != advantages_old.size()) {
    throw ShapeError("inject: " + std::to_string(records.size()) +
                     " records for " + std::to_string(advantages_old.size()) +
                     " trajectories");
  }
  TokenTensor out = advantages_old;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (records[i].trajectory_index != i) {
      throw ShapeError("inject: record " + std::to_string(i) +
                       " refers to trajectory " +
                       std::to_string(records[i].trajectory_index));
    }
    const double bonus = records[i].reward;
    if (bonus == 0.0 || out[i].empty()) continue;
    if (algo == Algo::kPpo) {
      out[i].back() += bonus;
    } else {
      for (double& a : out[i]) a += bonus;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void save_exploration(const std::string& path, const ExplorationNets& nets,
                      const ExplorationSchedule& schedule) {
  detail::BinaryWriter w(path);
  w.magic(kExplorationMagic);
  w.u32(kExplorationFormatVersion);
  w.u32(static_cast<std::uint32_t>(nets.target().vocab()));
  w.u32(NoveltyNet::kEmbedDim);
  w.u32(static_cast<std::uint32_t>(NoveltyNet::kWidths.size()));
  for (int width : NoveltyNet::kWidths) w.u32(static_cast<std::uint32_t>(width));
  w.u64(nets.target().size());
  w.f64s(nets.target().flat());
  w.f64s(nets.predictor().flat());
  w.f64(schedule.alpha);
  w.f64(schedule.attenuation);
  w.u64(schedule.step);
  w.u32(schedule.mode == RewardMode::kMinMaxDecay ? 0 : 1);
  w.f64(schedule.momentum);
  w.u32(schedule.stats_initialized ? 1 : 0);
  w.f64(schedule.running_mean);
  w.f64(schedule.running_sq);
  w.f64(schedule.running_std());
  w.f64(nets.learning_rate());
  w.finish();
}

void load_exploration(const std::string& path, ExplorationNets& nets,
                      ExplorationSchedule& schedule) {
  detail::BinaryReader r(path);
  r.expect_magic(kExplorationMagic);
  if (r.u32() != kExplorationFormatVersion) {
    throw IoError("unsupported exploration checkpoint version in " + path);
  }
  const auto vocab = static_cast<int>(r.u32());
  if (vocab < 1 || vocab > 64) throw IoError("bad vocabulary size in " + path);
  if (r.u32() != NoveltyNet::kEmbedDim) throw IoError("embed dim mismatch in " + path);
  if (r.u32() != NoveltyNet::kWidths.size()) throw IoError("layer count mismatch in " + path);
  for (int width : NoveltyNet::kWidths) {
    if (r.u32() != static_cast<std::uint32_t>(width)) {
      throw IoError("layer width mismatch in " + path);
    }
  }
  NoveltyNet target(vocab), predictor(vocab);
  if (r.u64() != target.size()) throw IoError("parameter count mismatch in " + path);
  r.f64s(target.flat());
  r.f64s(predictor.flat());
  ExplorationSchedule s;
  s.alpha = r.f64();
  s.attenuation = r.f64();
  s.step = r.u64();
  s.mode = r.u32() == 0 ? RewardMode::kMinMaxDecay : RewardMode::kRndStd;
  s.momentum = r.f64();
  s.stats_initialized = r.u32() != 0;
  s.running_mean = r.f64();
  s.running_sq = r.f64();
  (void)r.f64();  // running std, derived
  const double lr = r.f64();
  r.expect_end();
  nets.restore(std::move(target), std::move(predictor));
  nets.set_learning_rate(lr);
  schedule = s;
}

}  // namespace seqrl
