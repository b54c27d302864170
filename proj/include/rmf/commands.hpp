#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace rmf {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

struct TrainArgs {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool resume = false;
  bool track_val = false;
  bool quiet = false;
};

struct SampleArgs {
  std::string checkpoint;
  std::string out;
  int n = 1000;
  int steps = 1;
  std::uint64_t seed = 0;
  double omega = 0.0;
  std::optional<int> label;
  /// Geodesic Euler on u(x, t, t) instead of interval steps.
  bool euler = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::string out;
  std::optional<int> n;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  std::optional<int> label;
  double omega = 0.0;
};

struct DiagArgs {
  std::string log;
  std::string out;
};

struct GenDataArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

/// Each command returns an exit code and reports errors on `err`.
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_sample(const SampleArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_diag(const DiagArgs& args, std::ostream& out, std::ostream& err);
int cmd_gen_data(const GenDataArgs& args, std::ostream& out, std::ostream& err);

}  // namespace rmf
