#include "seqrl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include "json.hpp"

namespace seqrl {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Stream tags for derive_seed; each consumer owns its own stream so that
// toggling one feature never shifts another's random draws.
enum StreamTag : std::uint64_t {
  kPolicyInitStream = 1,
  kDataOrderStream = 2,
  kSamplingStream = 3,
  kExplorationStream = 4,
  kEvalStream = 5,
  kWarmStartStream = 6,
};

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
}

double binomial_ratio(int n_minus_c, int n, int j) {
  // C(n - c, j) / C(n, j) as a running product.
  if (n_minus_c < j) return 0.0;
  double r = 1.0;
  for (int i = 0; i < j; ++i) {
    r *= static_cast<double>(n_minus_c - i) / static_cast<double>(n - i);
  }
  return r;
}

class BatchSampler {
 public:
  BatchSampler(std::size_t size, std::uint64_t seed)
      : order_(size), rng_(seed), cursor_(size) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
      if (cursor_ == order_.size()) reshuffle();
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          rng_.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order_[i - 1], order_[j]);
    }
    cursor_ = 0;
  }

  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t cursor_;
};

void check_step_invariants(const TrainConfig& cfg, std::span<const Trajectory> trajs,
                           std::span<const double> group_adv,
                           const TokenTensor& adv_old, const TokenTensor& adv_new,
                           std::span<const NoveltyRecord> records, int step) {
  auto fail = [step](const std::string& what) {
    throw InvariantError("step " + std::to_string(step) + ": " + what);
  };
  if (cfg.algo == Algo::kGrpo) {
    const std::size_t g = static_cast<std::size_t>(cfg.effective_group_size());
    for (std::size_t start = 0; start < group_adv.size(); start += g) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t i = start; i < start + g; ++i) mean += group_adv[i];
      mean /= static_cast<double>(g);
      for (std::size_t i = start; i < start + g; ++i) {
        sq += (group_adv[i] - mean) * (group_adv[i] - mean);
      }
      const double sd = std::sqrt(sq / static_cast<double>(g));
      if (std::abs(mean) > 1e-9) fail("group advantage mean is not 0");
      if (sd != 0.0 && std::abs(sd - 1.0) > 1e-6) {
        fail("group advantage std is neither 0 nor 1");
      }
    }
  }
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const NoveltyRecord& rec = records[i];
    if (!(rec.reward >= 0.0)) fail("negative exploration reward");
    if (cfg.reward_mode == RewardMode::kMinMaxDecay &&
        rec.reward > cfg.alpha * (1.0 + 1e-12)) {
      fail("exploration reward above alpha");
    }
    if (trajs[i].outcome.correct && rec.reward != 0.0) {
      fail("correct trajectory received an exploration reward");
    }
    if (adv_new[i].size() != adv_old[i].size()) fail("advantage shape changed");
    for (std::size_t t = 0; t < adv_old[i].size(); ++t) {
      if (adv_new[i][t] < adv_old[i][t]) fail("injection lowered an advantage");
    }
    if (trajs[i].outcome.correct && adv_new[i] != adv_old[i]) {
      fail("correct trajectory advantages changed");
    }
  }
}

void write_nan_dump(const TrainConfig& cfg, int step, const std::string& what,
                    const SurrogateResult* grad, const PolicyParams& params) {
  if (cfg.out_dir.empty()) return;
  json dump;
  dump["step"] = step;
  dump["reason"] = what;
  dump["params_finite"] = params.all_finite();
  if (grad) {
    dump["loss"] = std::isfinite(grad->loss) ? json(grad->loss) : json("non-finite");
    dump["policy_loss"] =
        std::isfinite(grad->policy_loss) ? json(grad->policy_loss) : json("non-finite");
    dump["value_loss"] =
        std::isfinite(grad->value_loss) ? json(grad->value_loss) : json("non-finite");
    dump["gradient_finite"] = grad->gradient.all_finite();
    dump["tokens"] = grad->tokens;
  }
  dump["config"] = to_config_text(cfg);
  fs::create_directories(cfg.out_dir);
  std::ofstream(fs::path(cfg.out_dir) / "nan_dump.json") << dump.dump(2) << '\n';
}

void write_checkpoint(const TrainConfig& cfg, int step, const PolicyParams& params,
                      const ExplorationNets& nets,
                      const ExplorationSchedule& schedule) {
  const fs::path dir = fs::path(cfg.out_dir) / ("step_" + std::to_string(step));
  fs::create_directories(dir);
  save_policy((dir / "policy.ckpt").string(), params, CheckpointKind::kPolicy);
  save_policy((dir / "value_head.ckpt").string(), params,
              CheckpointKind::kValueHead);
  save_exploration((dir / "exploration.ckpt").string(), nets, schedule);
  std::ofstream cfg_out(dir / "config.toml");
  cfg_out << to_config_text(cfg);
  if (!cfg_out) throw IoError("cannot write " + (dir / "config.toml").string());
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_json_line(const MetricRow& row) {
  json j;
  j["step"] = row.step;
  j["train_accuracy"] = row.train_accuracy;
  j["eval_accuracy"] = row.eval_accuracy ? json(*row.eval_accuracy) : json(nullptr);
  j["mean_response_length"] = row.mean_response_length;
  j["mean_outcome_reward"] = row.mean_outcome_reward;
  j["max_outcome_reward"] = row.max_outcome_reward;
  j["mean_predictor_loss"] = row.mean_predictor_loss;
  j["mean_exploration_reward"] = row.mean_exploration_reward;
  j["decay_factor"] = row.decay_factor;
  j["wall_clock_seconds"] = row.wall_clock_seconds;
  return j.dump();
}

MetricRow parse_metric_row(const std::string& line) {
  try {
    const auto j = json::parse(line);
    MetricRow row;
    row.step = j.at("step").get<int>();
    row.train_accuracy = j.at("train_accuracy").get<double>();
    if (!j.at("eval_accuracy").is_null()) {
      row.eval_accuracy = j.at("eval_accuracy").get<double>();
    }
    row.mean_response_length = j.at("mean_response_length").get<double>();
    row.mean_outcome_reward = j.at("mean_outcome_reward").get<double>();
    row.max_outcome_reward = j.at("max_outcome_reward").get<double>();
    row.mean_predictor_loss = j.at("mean_predictor_loss").get<double>();
    row.mean_exploration_reward = j.at("mean_exploration_reward").get<double>();
    row.decay_factor = j.at("decay_factor").get<double>();
    row.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    return row;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed metric row: ") + e.what());
  }
}

void write_metric_log(const std::string& path, std::span<const MetricRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metric log: " + path);
  for (const MetricRow& r : rows) out << to_json_line(r) << '\n';
}

std::vector<MetricRow> read_metric_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metric log: " + path);
  std::vector<MetricRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      rows.push_back(parse_metric_row(line));
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------

Datasets load_datasets(const TrainConfig& cfg) {
  Datasets d;
  if (cfg.train_path.empty() != cfg.test_path.empty()) {
    throw ConfigError(cfg.train_path.empty() ? "train_path" : "test_path",
                      "set both dataset paths or neither");
  }
  if (!cfg.train_path.empty()) {
    d.train = read_dataset(cfg.train_path);
    d.test = read_dataset(cfg.test_path);
  } else {
    DatasetLimits limits;
    limits.max_operand = cfg.max_operand;
    limits.max_target = cfg.max_target;
    auto all = generate_dataset(
        cfg.data_seed,
        static_cast<std::size_t>(cfg.train_count) + cfg.test_count,
        cfg.dataset_mode, limits);
    d.train.assign(all.begin(), all.begin() + cfg.train_count);
    d.test.assign(all.begin() + cfg.train_count, all.end());
  }
  if (d.train.empty()) throw ConfigError("train_path", "training set is empty");
  if (d.test.empty()) throw ConfigError("test_path", "test set is empty");
  return d;
}

double pass_at_estimate(int k, int c, int j) {
  if (k < 1 || c < 0 || c > k || j < 1 || j > k) {
    throw ContractError("pass_at_estimate: need 0 <= c <= k and 1 <= j <= k");
  }
  return 1.0 - binomial_ratio(k - c, k, j);
}

EvalResult summarize_counts(std::span<const int> correct_counts, int k) {
  if (correct_counts.empty()) throw ContractError("summarize_counts: no problems");
  EvalResult res;
  res.k = k;
  res.correct_counts.assign(correct_counts.begin(), correct_counts.end());
  const double n = static_cast<double>(correct_counts.size());
  res.pass_at.assign(static_cast<std::size_t>(k), 0.0);
  double total_correct = 0.0;
  for (int c : correct_counts) {
    total_correct += c;
    for (int j = 1; j <= k; ++j) {
      res.pass_at[static_cast<std::size_t>(j - 1)] += pass_at_estimate(k, c, j) / n;
    }
  }
  res.avg_at_k = total_correct / (n * k);
  return res;
}

EvalResult evaluate(const PolicyParams& params, std::span<const Problem> problems,
                    const GenerationConfig& gen, int k, int threads) {
  if (k < 1) throw ContractError("evaluate: k must be >= 1");
  if (problems.empty()) throw ContractError("evaluate: no problems");
  const PolicyEvaluator eval(params);
  Rng seeds(gen.seed);
  std::vector<std::uint64_t> sample_seeds(problems.size() * k);
  for (auto& s : sample_seeds) s = seeds.next_u64();

  EvalResult res;
  res.k = k;
  res.correct_counts.assign(problems.size(), 0);
  std::vector<char> correct(sample_seeds.size(), 0);
  std::vector<TokenSeq> questions(problems.size());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    questions[i] = question_tokens(problems[i]);
  }
  parallel_for(sample_seeds.size(), threads, [&](std::size_t idx) {
    const std::size_t p = idx / k;
    GenerationConfig g = gen;
    g.seed = sample_seeds[idx];
    const Trajectory t = eval.sample(questions[p], g);
    correct[idx] = verify(t.response, problems[p]).correct ? 1 : 0;
  });
  for (std::size_t idx = 0; idx < correct.size(); ++idx) {
    res.correct_counts[idx / k] += correct[idx];
  }
  return summarize_counts(res.correct_counts, k);
}

// ---------------------------------------------------------------------------

double warm_start(PolicyParams& params, std::span<const Problem> problems,
                  const TrainConfig& cfg) {
  if (cfg.warmstart_steps <= 0) return 0.0;
  const Vocabulary& vocab = Vocabulary::standard();
  std::vector<TokenSeq> questions, demos;
  for (const Problem& p : problems) {
    auto solution = find_solution(p);
    if (!solution) continue;
    TokenSeq demo = vocab.tokenize(std::string(1, Vocabulary::kAnswerOpen) +
                                   *solution +
                                   std::string(1, Vocabulary::kAnswerClose) +
                                   std::string(1, Vocabulary::kEos));
    if (static_cast<int>(demo.size()) > cfg.max_response_length) continue;
    questions.push_back(question_tokens(p));
    demos.push_back(std::move(demo));
  }
  if (demos.empty()) throw ConfigError("warmstart_steps", "no usable demonstrations");

  // With logprobs_old equal to the current logprobs the ratio is 1 and the
  // surrogate gradient at advantage 1 is the gradient of -mean log-likelihood.
  SurrogateOptions opts;
  opts.aggregation = LossAggregation::kSequenceMean;
  BatchSampler sampler(demos.size(), derive_seed(cfg.seed, kWarmStartStream));
  AdamOptimizer adam;
  double nll = 0.0;
  for (int step = 0; step < cfg.warmstart_steps; ++step) {
    const auto idx = sampler.next(static_cast<std::size_t>(cfg.warmstart_batch));
    std::vector<Trajectory> batch(idx.size());
    TokenTensor ones(idx.size());
    const PolicyEvaluator eval(params);
    double token_nll = 0.0;
    std::size_t tokens = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      batch[i].question = questions[idx[i]];
      batch[i].response = demos[idx[i]];
      batch[i].logprobs_old = eval.evaluate(batch[i].question, batch[i].response).logprobs;
      ones[i].assign(batch[i].response.size(), 1.0);
      for (double lp : batch[i].logprobs_old) token_nll -= lp;
      tokens += batch[i].response.size();
    }
    SurrogateResult g = gradients(params, batch, ones, opts);
    if (!g.gradient.all_finite()) {
      throw NumericalError("warm start: non-finite gradient");
    }
    adam.step(params, g.gradient, cfg.warmstart_lr);
    nll = token_nll / static_cast<double>(tokens);
  }
  return nll;
}

namespace {

PolicyShape configured_shape(const TrainConfig& cfg) {
  PolicyShape shape;
  shape.vocab = Vocabulary::standard().size();
  shape.embed_dim = cfg.embed_dim;
  shape.window = cfg.window;
  shape.hidden = cfg.hidden;
  return shape;
}

}  // namespace

PolicyParams initial_policy(const TrainConfig& cfg, const Datasets& data) {
  validate(cfg);
  PolicyParams params = PolicyParams::initialize(
      configured_shape(cfg), derive_seed(cfg.seed, kPolicyInitStream));
  warm_start(params, data.train, cfg);
  return params;
}

TrainResult train(const TrainConfig& cfg, const Datasets& data,
                  const StepObserver& observer, const PolicyParams* initial) {
  validate(cfg);
  if (data.train.empty() || data.test.empty()) {
    throw ConfigError("train_path", "datasets must be non-empty");
  }
  const Vocabulary& vocab = Vocabulary::standard();
  const auto start_time = std::chrono::steady_clock::now();
  const int group = cfg.effective_group_size();

  TrainResult result;
  if (initial != nullptr) {
    if (initial->shape() != configured_shape(cfg)) {
      throw ShapeError("initial policy does not match the configured shape");
    }
    result.params = *initial;
  } else {
    result.params = initial_policy(cfg, data);
  }
  const PolicyParams reference = result.params;
  result.nets = ExplorationNets(vocab.size(),
                                derive_seed(cfg.seed, kExplorationStream),
                                cfg.predictor_lr);
  result.schedule.alpha = cfg.alpha;
  result.schedule.attenuation = cfg.attenuation;
  result.schedule.mode = cfg.reward_mode;
  result.schedule.momentum = cfg.momentum;

  BatchSampler sampler(data.train.size(), derive_seed(cfg.seed, kDataOrderStream));
  Rng sampling_rng(derive_seed(cfg.seed, kSamplingStream));

  std::vector<TokenSeq> train_questions(data.train.size());
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    train_questions[i] = question_tokens(data.train[i]);
  }
  std::span<const Problem> eval_set = data.test;
  if (cfg.eval_problems > 0 &&
      static_cast<std::size_t>(cfg.eval_problems) < eval_set.size()) {
    eval_set = eval_set.first(static_cast<std::size_t>(cfg.eval_problems));
  }

  std::ofstream log_file;
  if (!cfg.out_dir.empty() || !cfg.log_path.empty()) {
    if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);
    const std::string path = cfg.log_path.empty()
                                 ? (fs::path(cfg.out_dir) / "metrics.jsonl").string()
                                 : cfg.log_path;
    log_file.open(path);
    if (!log_file) throw IoError("cannot write metric log: " + path);
  }

  SurrogateOptions opts;
  opts.clip_eps = cfg.clip_eps;
  opts.kl_beta = cfg.kl_beta;
  opts.temperature = cfg.temperature;
  opts.value_coef = cfg.value_coef;
  opts.aggregation = cfg.algo == Algo::kGrpo ? LossAggregation::kSequenceMean
                                             : LossAggregation::kTokenMean;

  AdamOptimizer adam;
  for (int step = 1; step <= cfg.steps; ++step) {
    // 1. Rollouts from a frozen snapshot.
    const auto batch = sampler.next(static_cast<std::size_t>(cfg.batch_size));
    const std::size_t n_traj = batch.size() * group;
    std::vector<std::uint64_t> seeds(n_traj);
    for (auto& s : seeds) s = sampling_rng.next_u64();
    std::vector<Trajectory> trajs(n_traj);
    {
      const PolicyEvaluator snapshot(result.params);
      parallel_for(n_traj, cfg.threads, [&](std::size_t i) {
        const std::size_t p = batch[i / group];
        GenerationConfig gen;
        gen.temperature = cfg.temperature;
        gen.max_length = cfg.max_response_length;
        gen.seed = seeds[i];
        trajs[i] = snapshot.sample(train_questions[p], gen);
        trajs[i].problem_id = data.train[p].id;
        trajs[i].outcome = verify(trajs[i].response, data.train[p]);
      });
    }

    // 2. Outcome advantages.
    TokenTensor adv_old;
    TokenTensor returns;
    std::vector<double> group_adv;
    if (cfg.algo == Algo::kGrpo) {
      adv_old.reserve(n_traj);
      for (std::size_t b = 0; b < batch.size(); ++b) {
        RolloutGroup rg;
        rg.problem_id = data.train[batch[b]].id;
        for (int g = 0; g < group; ++g) {
          const Trajectory& t = trajs[b * group + g];
          rg.outcome_rewards.push_back(t.outcome.reward);
        }
        rg.advantages = group_normalize(rg.outcome_rewards);
        for (int g = 0; g < group; ++g) {
          adv_old.emplace_back(trajs[b * group + g].response.size(),
                               rg.advantages[g]);
        }
        group_adv.insert(group_adv.end(), rg.advantages.begin(),
                         rg.advantages.end());
      }
    } else {
      adv_old.resize(n_traj);
      returns.resize(n_traj);
      const PolicyEvaluator snapshot(result.params);
      parallel_for(n_traj, cfg.threads, [&](std::size_t i) {
        const Trajectory& t = trajs[i];
        const TokenEvaluation ev =
            snapshot.evaluate(t.question, t.response, cfg.temperature);
        GaeResult g = gae(terminal_rewards(t.response.size(), t.outcome.reward),
                          ev.values, cfg.gae);
        adv_old[i] = std::move(g.advantages);
        returns[i] = std::move(g.returns);
      });
    }

    // 3. Exploration: update the predictor on the whole batch, then score the
    // batch with the updated predictor.
    const auto refs = sequence_refs(trajs);
    const double predictor_loss = update_predictor(result.nets, refs);
    if (!std::isfinite(predictor_loss)) {
      write_nan_dump(cfg, step, "non-finite predictor loss", nullptr, result.params);
      throw NumericalError("step " + std::to_string(step) +
                           ": non-finite predictor loss");
    }
    std::vector<double> raw(n_traj);
    parallel_for(n_traj, cfg.threads, [&](std::size_t i) {
      raw[i] = novelty_raw(result.nets, refs[i].question, refs[i].response).raw_error;
    });
    const double decay = result.schedule.decay_factor();
    auto records =
        exploration_reward_from_errors(raw, trajs, result.schedule, true);

    // 4. Advantage-preserving injection.
    TokenTensor adv_new = cfg.imagine ? inject(adv_old, records, cfg.algo) : adv_old;
    if (!cfg.imagine) {
      for (NoveltyRecord& r : records) r.reward = 0.0;
    }
    if (cfg.check_invariants) {
      check_step_invariants(cfg, trajs, group_adv, adv_old, adv_new, records, step);
      ++result.invariant_checks;
    }
    if (observer) {
      StepRecord rec;
      rec.step = step;
      rec.algo = cfg.algo;
      rec.group_size = group;
      rec.trajectories = trajs;
      rec.advantages_old = &adv_old;
      rec.advantages_new = &adv_new;
      rec.records = records;
      rec.group_advantages = group_adv;
      rec.predictor_loss = predictor_loss;
      observer(rec);
    }

    // 5. Policy (and value) update.
    for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
      SurrogateResult g = gradients(
          result.params, trajs, adv_new, opts,
          cfg.kl_beta > 0.0 ? &reference : nullptr,
          cfg.algo == Algo::kPpo ? &returns : nullptr);
      if (!std::isfinite(g.loss) || !g.gradient.all_finite()) {
        write_nan_dump(cfg, step, "non-finite policy loss or gradient", &g,
                       result.params);
        throw NumericalError("step " + std::to_string(step) +
                             ": non-finite policy loss or gradient");
      }
      if (cfg.optimizer == "adam") {
        adam.step(result.params, g.gradient, cfg.policy_lr);
      } else {
        apply_gradient(result.params, g.gradient, cfg.policy_lr);
      }
      if (!result.params.all_finite()) {
        write_nan_dump(cfg, step, "non-finite parameters after update", &g,
                       result.params);
        throw NumericalError("step " + std::to_string(step) +
                             ": non-finite parameters after update");
      }
    }
    result.schedule.advance();

    // 6. Metrics, evaluation, checkpoints.
    MetricRow row;
    row.step = step;
    double correct = 0.0, length = 0.0, reward = 0.0, bonus = 0.0;
    for (std::size_t i = 0; i < n_traj; ++i) {
      correct += trajs[i].outcome.correct ? 1.0 : 0.0;
      length += static_cast<double>(trajs[i].response.size());
      reward += trajs[i].outcome.reward;
      row.max_outcome_reward = std::max(row.max_outcome_reward, trajs[i].outcome.reward);
      bonus += records[i].reward;
    }
    const double n = static_cast<double>(n_traj);
    row.train_accuracy = correct / n;
    row.mean_response_length = length / n;
    row.mean_outcome_reward = reward / n;
    row.mean_predictor_loss = predictor_loss;
    row.mean_exploration_reward = bonus / n;
    row.decay_factor = decay;

    const bool eval_now = step % cfg.eval_interval == 0 || step == cfg.steps;
    if (eval_now) {
      GenerationConfig gen;
      gen.temperature = cfg.eval_temperature;
      gen.max_length = cfg.max_response_length;
      gen.seed = derive_seed(derive_seed(cfg.seed, kEvalStream),
                             static_cast<std::uint64_t>(step));
      row.eval_accuracy =
          evaluate(result.params, eval_set, gen, cfg.eval_k, cfg.threads).avg_at_k;
      if (!cfg.out_dir.empty()) {
        write_checkpoint(cfg, step, result.params, result.nets, result.schedule);
      }
    }
    if (cfg.record_wall_clock) {
      row.wall_clock_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time)
              .count();
    }
    if (log_file.is_open()) {
      log_file << to_json_line(row) << '\n';
      log_file.flush();
    }
    result.log.push_back(row);
  }
  return result;
}

// ---------------------------------------------------------------------------

LossSeries load_loss_series(const std::string& path, const std::string& label) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metric log: " + path);
  LossSeries series;
  series.label = label;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("mean_predictor_loss") || !j.contains("step")) {
      throw Error(path + ":" + std::to_string(line_no) +
                  ": missing column mean_predictor_loss");
    }
    series.steps.push_back(j["step"].get<double>());
    series.losses.push_back(j["mean_predictor_loss"].get<double>());
  }
  if (series.losses.empty()) throw Error(path + ": empty metric log");
  return series;
}

DiagnosticReport exploration_diagnostic(std::span<const LossSeries> runs) {
  if (runs.size() < 2) {
    throw ContractError("exploration_diagnostic needs at least two runs");
  }
  DiagnosticReport report;
  for (const LossSeries& s : runs) {
    if (s.steps.size() != s.losses.size() || s.losses.size() < 2) {
      throw ContractError("series '" + s.label + "' needs >= 2 aligned points");
    }
    const double n = static_cast<double>(s.steps.size());
    double mx = 0.0, my = 0.0;
    std::vector<double> y(s.losses.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = std::log(std::max(s.losses[i], 1e-300));
      mx += s.steps[i];
      my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      sxy += (s.steps[i] - mx) * (y[i] - my);
      sxx += (s.steps[i] - mx) * (s.steps[i] - mx);
    }
    if (sxx == 0.0) throw ContractError("series '" + s.label + "' has one step value");
    RunSlope r;
    r.label = s.label;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    report.runs.push_back(r);
  }
  std::vector<RunSlope> sorted = report.runs;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const RunSlope& a, const RunSlope& b) { return a.slope < b.slope; });
  for (const RunSlope& r : sorted) report.fastest_decay_first.push_back(r.label);
  return report;
}

}  // namespace seqrl
