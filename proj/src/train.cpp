#include "rmf/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rmf/checkpoint.hpp"
#include "rmf/error.hpp"
#include "rmf/eval.hpp"
#include "rmf/objective.hpp"
#include "rmf/sampler.hpp"

namespace rmf {
namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct StepGrad {
  Vec g;
  LogRow row;
};

StepGrad step_gradient(const RunConfig& cfg, const VelocityNet& net, const TrainBatch& batch,
                       const Schedule& schedule, Rng& rng) {
  StepGrad out;
  LogRow& row = out.row;
  auto two_task = [&](RmfTerms terms, bool surgery) {
    const Vec g1 = net.backward(terms.tape, terms.l1.grad_u);
    const Vec g2 = net.backward(terms.tape, terms.l2.grad_u);
    row.l1 = terms.l1.value;
    row.l2 = terms.l2.value;
    row.total = terms.l1.value + terms.l2.value;
    if (surgery) {
      PcgradResult pc = pcgrad_combine(g1, g2);
      out.g = std::move(pc.g);
      row.grad_cosine = pc.cosine;
      row.pcgrad_applied = pc.applied;
    } else {
      out.g = g1 + g2;
      row.grad_cosine = cosine_similarity(g1, g2);
      row.pcgrad_applied = false;
    }
  };
  auto single = [&](SingleLoss loss) {
    out.g = net.backward(loss.tape, loss.loss.grad_u);
    row.l1 = loss.loss.value;
    row.total = loss.loss.value;
  };
  switch (cfg.objective) {
    case Objective::RmfMt: two_task(rmf_losses(net, batch), true); break;
    case Objective::RmfSum: two_task(rmf_losses(net, batch), false); break;
    case Objective::Cfg: two_task(cfg_losses(net, batch, cfg.train.p_drop, rng), true); break;
    case Objective::RmfDirect: single(rmf_direct_loss(net, batch)); break;
    case Objective::AlphaRmf: single(alpha_rmf_loss(net, batch, cfg.train.alpha, schedule)); break;
    case Objective::Imf: single(imf_loss(net, batch)); break;
    case Objective::Rfm: single(rfm_loss(net, batch)); break;
  }
  return out;
}

bool parse_opt_double(const std::string& s, std::optional<double>& out) {
  if (s.empty()) {
    out.reset();
    return true;
  }
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

}  // namespace

std::string format_log_row(const LogRow& r) {
  std::string s = std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + fmt(r.lr) + "," + fmt(r.l1) + ",";
  if (r.l2) s += fmt(*r.l2);
  s += "," + fmt(r.total) + ",";
  if (r.grad_cosine) s += fmt(*r.grad_cosine);
  s += ",";
  if (r.pcgrad_applied) s += *r.pcgrad_applied ? "1" : "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", r.wallclock_ms);
  s += ",";
  s += buf;
  return s;
}

std::vector<LogRow> read_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open log " + path);
  std::vector<LogRow> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("step,", 0) == 0) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 9) throw LineError(ErrorCode::ParseError, line_no, path + ": expected 9 fields");
    LogRow r;
    std::optional<double> step, epoch, lr, l1, total, ms;
    bool ok = parse_opt_double(f[0], step) && parse_opt_double(f[1], epoch) && parse_opt_double(f[2], lr) &&
              parse_opt_double(f[3], l1) && parse_opt_double(f[4], r.l2) && parse_opt_double(f[5], total) &&
              parse_opt_double(f[6], r.grad_cosine) && parse_opt_double(f[8], ms);
    ok = ok && step && epoch && lr && l1 && total;
    if (ok && !f[7].empty()) {
      if (f[7] == "1") r.pcgrad_applied = true;
      else if (f[7] == "0") r.pcgrad_applied = false;
      else ok = false;
    }
    if (!ok) throw LineError(ErrorCode::ParseError, line_no, path + ": malformed log row");
    r.step = static_cast<std::uint64_t>(*step);
    r.epoch = static_cast<int>(*epoch);
    r.lr = *lr;
    r.l1 = *l1;
    r.total = *total;
    r.wallclock_ms = ms.value_or(0.0);
    rows.push_back(r);
  }
  return rows;
}

TrainResult train(const RunConfig& cfg, const Splits& data, const TrainOptions& opts) {
  cfg.validate();
  const Manifold m = cfg.dataset.manifold();
  const Dataset& train_set = data.train;
  const int n_train = train_set.size();
  if (n_train < 1) throw Error(ErrorCode::InvalidArgument, "training split is empty");
  if (cfg.objective == Objective::Cfg && !train_set.labeled()) {
    throw Error(ErrorCode::ConfigError, "objective cfg needs a labeled dataset");
  }
  for (int c : train_set.labels) {
    if (c >= cfg.net.num_classes && cfg.net.num_classes > 0) {
      throw Error(ErrorCode::ConfigError, "dataset label " + std::to_string(c) + " exceeds net.num_classes");
    }
  }
  const bool use_labels = cfg.net.num_classes > 0 && train_set.labeled();
  const Schedule schedule = Schedule::parse(cfg.train.schedule);
  const TimeSampler sampler{cfg.train.p_eq};
  const int batch_size = std::min(cfg.train.batch_size, n_train);
  const std::uint64_t steps_per_epoch = static_cast<std::uint64_t>((n_train + batch_size - 1) / batch_size);
  const std::uint64_t total_steps = steps_per_epoch * static_cast<std::uint64_t>(cfg.train.epochs);
  const AdamWConfig adam_base{cfg.train.lr, cfg.train.weight_decay, cfg.train.beta1, cfg.train.beta2, cfg.train.eps};

  TrainResult result{VelocityNet(m, cfg.net), {}, {}};
  VelocityNet& net = result.net;
  Rng rng(cfg.train.seed);

  const bool to_disk = !opts.out_dir.empty();
  const std::string last_path = to_disk ? (fs::path(opts.out_dir) / "last.ckpt").string() : "";
  const std::string log_path = to_disk ? (fs::path(opts.out_dir) / "train_log.csv").string() : "";
  if (to_disk) fs::create_directories(opts.out_dir);

  int start_epoch = 0;
  if (opts.resume) {
    if (!to_disk) throw Error(ErrorCode::InvalidArgument, "resume needs an output directory");
    Checkpoint ck = load_checkpoint(last_path, m);
    if (!(ck.net.config() == cfg.net)) throw Error(ErrorCode::ConfigMismatch, "last.ckpt was written by a different net config");
    net = std::move(ck.net);
    rng.set_state(ck.rng_state);
    const std::uint64_t done = net.optimizer_state().step;
    if (done % steps_per_epoch != 0) throw Error(ErrorCode::FormatError, "last.ckpt is not at an epoch boundary");
    start_epoch = static_cast<int>(done / steps_per_epoch);
    if (fs::exists(log_path)) {
      for (const LogRow& r : read_log(log_path)) {
        if (r.step <= done) result.log.push_back(r);
      }
    }
  }

  std::FILE* log_file = nullptr;
  if (to_disk) {
    log_file = std::fopen(log_path.c_str(), "w");
    if (!log_file) throw Error(ErrorCode::IoError, "cannot open " + log_path);
    std::fprintf(log_file, "%s\n", kLogHeader);
    for (const LogRow& r : result.log) std::fprintf(log_file, "%s\n", format_log_row(r).c_str());
    std::fflush(log_file);
  }
  struct Closer {
    std::FILE* f;
    ~Closer() {
      if (f) std::fclose(f);
    }
  } closer{log_file};

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<int> order(n_train);
  Mat batch_points(m.ambient_dim(), batch_size);
  std::vector<int> batch_labels;

  for (int epoch = start_epoch; epoch < cfg.train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (int i = n_train - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }
    for (int begin = 0; begin < n_train; begin += batch_size) {
      const int count = std::min(batch_size, n_train - begin);
      batch_points.resize(m.ambient_dim(), count);
      batch_labels.clear();
      for (int k = 0; k < count; ++k) {
        batch_points.col(k) = train_set.points.col(order[begin + k]);
        if (use_labels) batch_labels.push_back(train_set.labels[order[begin + k]]);
      }
      const TrainBatch batch = make_batch(m, batch_points, batch_labels, rng, sampler, schedule, cfg.net.orientation);
      const std::uint64_t step = net.optimizer_state().step;
      AdamWConfig adam = adam_base;
      adam.lr = cosine_lr(cfg.train.lr, step, total_steps);
      StepGrad sg;
      try {
        sg = step_gradient(cfg, net, batch, schedule, rng);
        adamw_step(net, sg.g, adam);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NonFinite && to_disk) save_checkpoint(last_path, net, rng.state());
        throw;
      }
      LogRow& row = sg.row;
      row.step = step + 1;
      row.epoch = epoch + 1;
      row.lr = adam.lr;
      row.wallclock_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (log_file) std::fprintf(log_file, "%s\n", format_log_row(row).c_str());
      if (opts.on_step) opts.on_step(row);
      result.log.push_back(row);
    }
    if (log_file) std::fflush(log_file);
    if (to_disk) save_checkpoint(last_path, net, rng.state());
    if (cfg.train.track_val && data.val.size() >= 2) {
      Rng val_rng = Rng::substream(cfg.train.seed, 0xba1);
      const int n = std::min(cfg.train.val_samples, data.val.size());
      const Mat samples = sample_one_step(net, n, val_rng);
      MmdConfig mc = cfg.eval.mmd;
      mc.seed = cfg.train.seed;
      const double v = mmd_v(m, samples, data.val.points, mc);
      if (!result.best_val_mmd || v < *result.best_val_mmd) {
        result.best_val_mmd = v;
        if (to_disk) save_checkpoint((fs::path(opts.out_dir) / "best.ckpt").string(), net, rng.state());
      }
    }
    if (opts.on_epoch) opts.on_epoch(epoch + 1, net);
  }
  if (to_disk) save_checkpoint((fs::path(opts.out_dir) / "final.ckpt").string(), net, rng.state());
  return result;
}

}  // namespace rmf
