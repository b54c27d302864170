#include "rmf/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "rmf/checkpoint.hpp"
#include "rmf/config.hpp"
#include "rmf/data.hpp"
#include "rmf/error.hpp"
#include "rmf/eval.hpp"
#include "rmf/sampler.hpp"
#include "rmf/train.hpp"

namespace rmf {
namespace {

namespace fs = std::filesystem;

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonFinite:
    case ErrorCode::CutLocus:
    case ErrorCode::ScheduleSingularity:
      return kExitNumeric;
    case ErrorCode::IoError:
    case ErrorCode::FormatError:
    case ErrorCode::ParseError:
    case ErrorCode::InvariantViolation:
      return kExitIo;
    default:
      return kExitConfig;
  }
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path);
}

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = load_run_config(args.config);
    if (args.out) cfg.output_dir = *args.out;
    if (args.seed) cfg.train.seed = *args.seed;
    if (args.track_val) cfg.train.track_val = true;
    cfg.validate();
    fs::create_directories(cfg.output_dir);
    write_text((fs::path(cfg.output_dir) / "config.resolved").string(), to_json(cfg).dump(2) + "\n");

    const Splits data = make_splits(cfg.dataset);
    TrainOptions opts;
    opts.out_dir = cfg.output_dir;
    opts.resume = args.resume;
    if (!args.quiet) {
      opts.on_epoch = [&](int epoch, const VelocityNet&) {
        out << "epoch " << epoch << "/" << cfg.train.epochs << "\n" << std::flush;
      };
    }
    const TrainResult r = train(cfg, data, opts);
    if (!r.log.empty()) {
      const LogRow& last = r.log.back();
      out << "done: " << last.step << " steps, final total loss " << fmt(last.total) << "\n";
    }
    if (r.best_val_mmd) out << "best validation MMD " << fmt(*r.best_val_mmd) << "\n";
    return kExitOk;
  });
}

int cmd_sample(const SampleArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (args.n < 1) throw Error(ErrorCode::InvalidArgument, "--n must be >= 1");
    const Checkpoint ck = load_checkpoint(args.checkpoint);
    const VelocityNet& net = ck.net;
    Rng rng(args.seed);
    const int label = args.label.value_or(kNullLabel);
    Mat x;
    if (args.euler) {
      x = sample_rfm_euler(net, args.steps, args.n, rng);
    } else {
      SamplePlan plan;
      plan.steps = args.steps;
      plan.omega = args.omega;
      plan.label = label;
      x = sample_k_step(net, plan, args.n, rng);
    }
    std::vector<int> labels;
    if (net.config().num_classes > 0) labels.assign(args.n, label);
    write_csv(args.out, x, labels,
              {"manifold=" + net.manifold().name() + ", K=" + std::to_string(args.steps) +
               ", seed=" + std::to_string(args.seed) + ", omega=" + fmt(args.omega) +
               (args.euler ? ", sampler=rfm_euler" : "")});
    out << "wrote " << args.n << " samples to " << args.out << "\n";
    return kExitOk;
  });
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_run_config(args.config);
    const Checkpoint ck = load_checkpoint(args.checkpoint, cfg.dataset.manifold());
    const Splits data = make_splits(cfg.dataset);
    const Mat* test = &data.test.points;
    Dataset filtered;
    if (args.label) {
      if (!data.test.labeled()) throw Error(ErrorCode::InvalidArgument, "--label needs a labeled dataset");
      std::vector<int> idx;
      for (int i = 0; i < data.test.size(); ++i) {
        if (data.test.labels[i] == *args.label) idx.push_back(i);
      }
      filtered = data.test.select(idx);
      test = &filtered.points;
    }
    EvalOptions opts;
    opts.n_samples = args.n.value_or(cfg.eval.n_samples);
    opts.steps = args.steps ? std::vector<int>{*args.steps} : cfg.eval.steps;
    opts.seeds = args.seed ? std::vector<std::uint64_t>{*args.seed} : cfg.eval.seeds;
    opts.label = args.label.value_or(kNullLabel);
    opts.omega = args.omega;
    opts.mmd = cfg.eval.mmd;
    const EvalReport report = eval_run(ck.net, *test, opts);

    std::string csv = "dataset,K,seed,mmd,std,n\n";
    for (const EvalRow& r : report.rows) {
      csv += cfg.dataset.name + "," + std::to_string(r.steps) + "," + std::to_string(r.seed) + "," + fmt(r.mmd) +
             ",," + std::to_string(report.n) + "\n";
    }
    for (const EvalSummary& s : report.summary) {
      const std::string row = cfg.dataset.name + "," + std::to_string(s.steps) + ",mean," + fmt(s.mean) + "," +
                              fmt(s.std) + "," + std::to_string(report.n);
      csv += row + "\n";
      out << row << "\n";
    }
    write_text(args.out, csv);
    return kExitOk;
  });
}

int cmd_diag(const DiagArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::vector<LogRow> rows = read_log(args.log);
    if (rows.empty()) {
      err << "error: " << args.log << " has no rows\n";
      return kExitIo;
    }
    std::vector<double> cosines;
    std::vector<std::uint64_t> steps;
    for (const LogRow& r : rows) {
      if (r.grad_cosine) {
        cosines.push_back(*r.grad_cosine);
        steps.push_back(r.step);
      }
    }
    if (cosines.empty()) {
      out << "grad_cosine: not applicable (single-loss objective)\n";
      return kExitOk;
    }
    const CosineStats s = grad_cosine_stats(cosines);
    std::string csv = "step,grad_cosine,running_mean\n";
    for (std::size_t i = 0; i < cosines.size(); ++i) {
      csv += std::to_string(steps[i]) + "," + fmt(cosines[i]) + "," + fmt(s.running_mean[i]) + "\n";
    }
    write_text(args.out, csv);
    out << "iterations " << s.count << ", mean cosine " << fmt(s.mean) << ", fraction negative "
        << fmt(s.fraction_negative) << "\n";
    return kExitOk;
  });
}

int cmd_gen_data(const GenDataArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = load_run_config(args.config);
    if (args.seed) cfg.dataset.seed = *args.seed;
    const Splits s = make_splits(cfg.dataset);
    fs::create_directories(args.out);
    const std::string header = "manifold=" + cfg.dataset.manifold().name() + ", dataset=" + cfg.dataset.name +
                               ", seed=" + std::to_string(cfg.dataset.seed);
    const std::pair<const char*, const Dataset*> parts[] = {{"train", &s.train}, {"val", &s.val}, {"test", &s.test}};
    for (const auto& [name, set] : parts) {
      const std::string path = (fs::path(args.out) / (std::string(name) + ".csv")).string();
      write_csv(path, set->points, set->labels, {header + ", split=" + name});
      out << name << ": " << set->size() << " rows -> " << path << "\n";
    }
    return kExitOk;
  });
}

}  // namespace rmf
