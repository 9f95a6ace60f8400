#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace endosight::supervisor {

struct ThermalPolicy {
  double warn_c = 75.0;
  double critical_c = 85.0;
  double warn_pause_s = 30.0;
  double critical_pause_s = 120.0;
  int poll_every_steps = 10;
  int checkpoint_every_steps = 50;
  int chunk_epochs = 5;
  double chunk_break_s = 300.0;
};

ThermalPolicy policy_from_json(const std::string& text);
std::string policy_to_json(const ThermalPolicy& policy);

struct TelemetrySample {
  double temperature_c = 0;
  double power_w = 0;
  double memory_mb = 0;
  double timestamp_s = 0;
};

// Parses one CSV line "temp, power, memory" as produced by
// `nvidia-smi --query-gpu=temperature.gpu,power.draw,memory.used
//  --format=csv,noheader`. Unit suffixes and whitespace are tolerated.
TelemetrySample parse_telemetry(const std::string& line);

enum class ActionKind { none, warn_pause, critical_pause };

struct Action {
  ActionKind kind = ActionKind::none;
  double pause_s = 0;
};

// Thresholds are inclusive: temperature >= critical_c wins over warn.
Action evaluate_policy(const TelemetrySample& sample, const ThermalPolicy& policy);

struct StepGate {
  bool poll = false;
  bool checkpoint = false;
};

// poll iff step % poll_every_steps == 0; checkpoint iff
// step % checkpoint_every_steps == 0. Steps start at 1.
StepGate step_gate(std::int64_t step, const ThermalPolicy& policy);

enum class EventKind {
  poll,
  warn_pause,
  critical_pause,
  checkpoint,
  chunk_start,
  chunk_break,
  resume,
  job_done,
  job_failed,
  telemetry_lost,
};

const char* to_string(EventKind k);

struct SupervisorEvent {
  std::int64_t seq = 0;
  double time_s = 0;  // seconds since the clock epoch
  EventKind kind = EventKind::poll;
  std::int64_t step = 0;
  int epoch = 0;
  std::optional<double> duration_s;
  std::optional<TelemetrySample> sample;
  std::optional<std::string> checkpoint_ref;
  std::optional<int> chunk_index;
  std::optional<int> chunk_epoch_count;
};

// One JSONL line: ISO-8601 timestamp, kind, step/epoch, payload.
std::string event_to_jsonl(const SupervisorEvent& event);
std::string iso8601_utc(double seconds_since_epoch);

// Monotonic time source; the simulated clock makes the whole protocol (and
// its pauses) run in microseconds under test.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() = 0;
  virtual void sleep_for(double seconds) = 0;
};

class SimulatedClock final : public Clock {
 public:
  explicit SimulatedClock(double start_s = 0) : t_(start_s) {}
  double now() override { return t_; }
  void sleep_for(double seconds) override { t_ += seconds; }

 private:
  double t_;
};

class SystemClock final : public Clock {
 public:
  double now() override;
  void sleep_for(double seconds) override;
};

// Returns nullopt on failure; the supervisor then logs telemetry_lost and
// falls back to a conservative warn pause.
class TelemetryProvider {
 public:
  virtual ~TelemetryProvider() = default;
  virtual std::optional<TelemetrySample> sample(std::int64_t step, double now_s) = 0;
};

// Fixed baseline temperature with per-step overrides; the workhorse for
// deterministic protocol tests.
class ScriptedTelemetry final : public TelemetryProvider {
 public:
  explicit ScriptedTelemetry(double baseline_c = 70.0) : baseline_(baseline_c) {}
  void set_override(std::int64_t step, double temperature_c) { overrides_[step] = temperature_c; }
  void fail_at(std::int64_t step) { failures_[step] = true; }
  std::optional<TelemetrySample> sample(std::int64_t step, double now_s) override;

 private:
  double baseline_;
  std::map<std::int64_t, double> overrides_;
  std::map<std::int64_t, bool> failures_;
};

// Replays pre-recorded CSV lines, one per poll; EOF reports failure.
class ReplayTelemetry final : public TelemetryProvider {
 public:
  explicit ReplayTelemetry(std::vector<std::string> lines) : lines_(std::move(lines)) {}
  static ReplayTelemetry from_file(const std::string& path);
  std::optional<TelemetrySample> sample(std::int64_t step, double now_s) override;

 private:
  std::vector<std::string> lines_;
  std::size_t next_ = 0;
};

// Shells out to nvidia-smi per poll.
class NvidiaSmiTelemetry final : public TelemetryProvider {
 public:
  std::optional<TelemetrySample> sample(std::int64_t step, double now_s) override;
};

// Cooperative job protocol: the supervisor grants each step, the job reports
// completion and persists checkpoints on demand.
class SteppableJob {
 public:
  virtual ~SteppableJob() = default;
  virtual int steps_per_epoch() const = 0;
  virtual bool run_step(int epoch, std::int64_t global_step) = 0;
  virtual std::string save_checkpoint(std::int64_t global_step) = 0;
};

// Built-in job used by the CLI and tests: optional per-step work simulated on
// the supervisor clock, checkpoints written as small JSON files when a
// directory is configured.
class DemoJob final : public SteppableJob {
 public:
  DemoJob(int steps_per_epoch, Clock& clock, double step_work_s = 0,
          std::string checkpoint_dir = {});
  int steps_per_epoch() const override { return steps_per_epoch_; }
  bool run_step(int epoch, std::int64_t global_step) override;
  std::string save_checkpoint(std::int64_t global_step) override;
  void fail_at_step(std::int64_t step) { fail_at_ = step; }
  std::int64_t steps_completed() const { return steps_done_; }

 private:
  int steps_per_epoch_;
  Clock& clock_;
  double step_work_s_;
  std::string checkpoint_dir_;
  std::optional<std::int64_t> fail_at_;
  std::int64_t steps_done_ = 0;
  int checkpoints_ = 0;
};

// Epoch indices of each chunk: total epochs partitioned into ceil(total/chunk)
// chunks of at most chunk_epochs.
std::vector<std::pair<int, int>> chunk_plan(int total_epochs, int chunk_epochs);

class Supervisor {
 public:
  Supervisor(ThermalPolicy policy, Clock& clock, TelemetryProvider& telemetry, SteppableJob& job);

  // Invoked on critical pauses before sleeping (the generic form of forced
  // garbage collection / session clearing).
  void add_cleanup_hook(std::function<void()> hook);

  // Streams events as JSONL while running.
  void set_event_stream(std::ostream* out);

  // Runs total_epochs in chunks with cooling breaks, polling and
  // checkpointing per policy; returns the full ordered event log.
  std::vector<SupervisorEvent> run(int total_epochs);

 private:
  SupervisorEvent& emit(EventKind kind, std::int64_t step, int epoch);

  ThermalPolicy policy_;
  Clock& clock_;
  TelemetryProvider& telemetry_;
  SteppableJob& job_;
  std::vector<std::function<void()>> hooks_;
  std::ostream* stream_ = nullptr;
  std::vector<SupervisorEvent> log_;
  std::int64_t seq_ = 0;
  std::string last_checkpoint_;
};

}  // namespace endosight::supervisor
