#include "endosight/supervisor.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace endosight::supervisor {

using ordered_json = nlohmann::ordered_json;

ThermalPolicy policy_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("policy JSON parse error: ") + e.what());
  }
  ThermalPolicy p;
  p.warn_c = j.value("warn_c", p.warn_c);
  p.critical_c = j.value("critical_c", p.critical_c);
  p.warn_pause_s = j.value("warn_pause_s", p.warn_pause_s);
  p.critical_pause_s = j.value("critical_pause_s", p.critical_pause_s);
  p.poll_every_steps = j.value("poll_every_steps", p.poll_every_steps);
  p.checkpoint_every_steps = j.value("checkpoint_every_steps", p.checkpoint_every_steps);
  p.chunk_epochs = j.value("chunk_epochs", p.chunk_epochs);
  p.chunk_break_s = j.value("chunk_break_s", p.chunk_break_s);
  if (p.warn_c >= p.critical_c)
    throw std::runtime_error("policy: warn_c must be below critical_c");
  if (p.warn_pause_s <= 0 || p.critical_pause_s <= 0 || p.chunk_break_s <= 0 ||
      p.poll_every_steps <= 0 || p.checkpoint_every_steps <= 0 || p.chunk_epochs <= 0)
    throw std::runtime_error("policy: durations and cadences must be positive");
  return p;
}

std::string policy_to_json(const ThermalPolicy& p) {
  ordered_json j;
  j["warn_c"] = p.warn_c;
  j["critical_c"] = p.critical_c;
  j["warn_pause_s"] = p.warn_pause_s;
  j["critical_pause_s"] = p.critical_pause_s;
  j["poll_every_steps"] = p.poll_every_steps;
  j["checkpoint_every_steps"] = p.checkpoint_every_steps;
  j["chunk_epochs"] = p.chunk_epochs;
  j["chunk_break_s"] = p.chunk_break_s;
  return j.dump(2) + "\n";
}

namespace {

double parse_numeric_field(const std::string& raw, const std::string& line) {
  std::size_t begin = raw.find_first_not_of(" \t");
  if (begin == std::string::npos)
    throw std::runtime_error("telemetry parse error: empty field in line \"" + line + "\"");
  std::size_t end = begin;
  while (end < raw.size() &&
         (std::isdigit(static_cast<unsigned char>(raw[end])) || raw[end] == '.' ||
          raw[end] == '-' || raw[end] == '+'))
    ++end;
  if (end == begin)
    throw std::runtime_error("telemetry parse error: non-numeric field in line \"" + line + "\"");
  // Anything after the number must be a unit suffix or whitespace.
  try {
    return std::stod(raw.substr(begin, end - begin));
  } catch (const std::exception&) {
    throw std::runtime_error("telemetry parse error: non-numeric field in line \"" + line + "\"");
  }
}

}  // namespace

TelemetrySample parse_telemetry(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  if (fields.size() != 3)
    throw std::runtime_error("telemetry parse error: expected 3 fields, got " +
                             std::to_string(fields.size()) + " in line \"" + line + "\"");
  TelemetrySample s;
  s.temperature_c = parse_numeric_field(fields[0], line);
  s.power_w = parse_numeric_field(fields[1], line);
  s.memory_mb = parse_numeric_field(fields[2], line);
  return s;
}

Action evaluate_policy(const TelemetrySample& sample, const ThermalPolicy& policy) {
  if (sample.temperature_c >= policy.critical_c)
    return {ActionKind::critical_pause, policy.critical_pause_s};
  if (sample.temperature_c >= policy.warn_c) return {ActionKind::warn_pause, policy.warn_pause_s};
  return {ActionKind::none, 0};
}

StepGate step_gate(std::int64_t step, const ThermalPolicy& policy) {
  if (step < 1) throw std::invalid_argument("step_gate: steps start at 1");
  StepGate g;
  g.poll = step % policy.poll_every_steps == 0;
  g.checkpoint = step % policy.checkpoint_every_steps == 0;
  return g;
}

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::poll: return "poll";
    case EventKind::warn_pause: return "warn_pause";
    case EventKind::critical_pause: return "critical_pause";
    case EventKind::checkpoint: return "checkpoint";
    case EventKind::chunk_start: return "chunk_start";
    case EventKind::chunk_break: return "chunk_break";
    case EventKind::resume: return "resume";
    case EventKind::job_done: return "job_done";
    case EventKind::job_failed: return "job_failed";
    case EventKind::telemetry_lost: return "telemetry_lost";
  }
  return "?";
}

std::string iso8601_utc(double seconds_since_epoch) {
  const auto whole = static_cast<std::time_t>(std::floor(seconds_since_epoch));
  const int millis =
      static_cast<int>(std::floor((seconds_since_epoch - static_cast<double>(whole)) * 1000.0 + 0.5));
  std::tm tm{};
  gmtime_r(&whole, &tm);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, millis);
  return buf;
}

std::string event_to_jsonl(const SupervisorEvent& e) {
  ordered_json j;
  j["ts"] = iso8601_utc(e.time_s);
  j["seq"] = e.seq;
  j["kind"] = to_string(e.kind);
  j["step"] = e.step;
  j["epoch"] = e.epoch;
  if (e.duration_s) j["duration_s"] = *e.duration_s;
  if (e.sample) {
    j["temperature_c"] = e.sample->temperature_c;
    j["power_w"] = e.sample->power_w;
    j["memory_mb"] = e.sample->memory_mb;
  }
  if (e.checkpoint_ref) j["checkpoint"] = *e.checkpoint_ref;
  if (e.chunk_index) j["chunk"] = *e.chunk_index;
  if (e.chunk_epoch_count) j["chunk_epochs"] = *e.chunk_epoch_count;
  return j.dump() + "\n";
}

double SystemClock::now() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

void SystemClock::sleep_for(double seconds) {
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

std::optional<TelemetrySample> ScriptedTelemetry::sample(std::int64_t step, double now_s) {
  if (failures_.count(step)) return std::nullopt;
  TelemetrySample s;
  const auto it = overrides_.find(step);
  s.temperature_c = it != overrides_.end() ? it->second : baseline_;
  s.power_w = 90.0;
  s.memory_mb = 4096.0;
  s.timestamp_s = now_s;
  return s;
}

ReplayTelemetry ReplayTelemetry::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open telemetry replay file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return ReplayTelemetry(std::move(lines));
}

std::optional<TelemetrySample> ReplayTelemetry::sample(std::int64_t, double now_s) {
  if (next_ >= lines_.size()) return std::nullopt;
  try {
    TelemetrySample s = parse_telemetry(lines_[next_++]);
    s.timestamp_s = now_s;
    return s;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<TelemetrySample> NvidiaSmiTelemetry::sample(std::int64_t, double now_s) {
  FILE* pipe = popen(
      "nvidia-smi --query-gpu=temperature.gpu,power.draw,memory.used "
      "--format=csv,noheader,nounits 2>/dev/null",
      "r");
  if (!pipe) return std::nullopt;
  char buf[256];
  std::string line;
  if (fgets(buf, sizeof(buf), pipe)) line = buf;
  const int rc = pclose(pipe);
  if (rc != 0 || line.empty()) return std::nullopt;
  if (!line.empty() && line.back() == '\n') line.pop_back();
  try {
    TelemetrySample s = parse_telemetry(line);
    s.timestamp_s = now_s;
    return s;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

DemoJob::DemoJob(int steps_per_epoch, Clock& clock, double step_work_s, std::string checkpoint_dir)
    : steps_per_epoch_(steps_per_epoch),
      clock_(clock),
      step_work_s_(step_work_s),
      checkpoint_dir_(std::move(checkpoint_dir)) {
  if (steps_per_epoch_ < 1) throw std::invalid_argument("DemoJob: steps_per_epoch must be >= 1");
}

bool DemoJob::run_step(int, std::int64_t global_step) {
  if (fail_at_ && global_step == *fail_at_) return false;
  if (step_work_s_ > 0) clock_.sleep_for(step_work_s_);
  ++steps_done_;
  return true;
}

std::string DemoJob::save_checkpoint(std::int64_t global_step) {
  ++checkpoints_;
  char name[64];
  std::snprintf(name, sizeof(name), "ckpt-%06lld.json", static_cast<long long>(global_step));
  if (checkpoint_dir_.empty()) return name;
  std::filesystem::create_directories(checkpoint_dir_);
  const std::string path = checkpoint_dir_ + "/" + name;
  std::ofstream out(path);
  ordered_json j;
  j["step"] = global_step;
  j["steps_completed"] = steps_done_;
  out << j.dump() << "\n";
  return path;
}

std::vector<std::pair<int, int>> chunk_plan(int total_epochs, int chunk_epochs) {
  if (total_epochs < 1) throw std::invalid_argument("chunk_plan: total_epochs must be >= 1");
  if (chunk_epochs < 1) throw std::invalid_argument("chunk_plan: chunk_epochs must be >= 1");
  std::vector<std::pair<int, int>> chunks;
  int first = 1;
  while (first <= total_epochs) {
    const int last = std::min(first + chunk_epochs - 1, total_epochs);
    chunks.emplace_back(first, last);
    first = last + 1;
  }
  return chunks;
}

Supervisor::Supervisor(ThermalPolicy policy, Clock& clock, TelemetryProvider& telemetry,
                       SteppableJob& job)
    : policy_(policy), clock_(clock), telemetry_(telemetry), job_(job) {}

void Supervisor::add_cleanup_hook(std::function<void()> hook) {
  hooks_.push_back(std::move(hook));
}

void Supervisor::set_event_stream(std::ostream* out) { stream_ = out; }

SupervisorEvent& Supervisor::emit(EventKind kind, std::int64_t step, int epoch) {
  SupervisorEvent e;
  e.seq = seq_++;
  e.time_s = clock_.now();
  e.kind = kind;
  e.step = step;
  e.epoch = epoch;
  log_.push_back(e);
  return log_.back();
}

std::vector<SupervisorEvent> Supervisor::run(int total_epochs) {
  log_.clear();
  seq_ = 0;
  last_checkpoint_.clear();

  auto flush = [&](const SupervisorEvent& e) {
    if (stream_) *stream_ << event_to_jsonl(e);
  };

  const auto chunks = chunk_plan(total_epochs, policy_.chunk_epochs);
  std::int64_t step = 0;

  for (std::size_t ci = 0; ci < chunks.size(); ++ci) {
    const auto [first_epoch, last_epoch] = chunks[ci];
    {
      auto& e = emit(EventKind::chunk_start, step, first_epoch);
      e.chunk_index = static_cast<int>(ci);
      e.chunk_epoch_count = last_epoch - first_epoch + 1;
      flush(e);
    }

    for (int epoch = first_epoch; epoch <= last_epoch; ++epoch) {
      for (int s = 0; s < job_.steps_per_epoch(); ++s) {
        ++step;
        if (!job_.run_step(epoch, step)) {
          auto& e = emit(EventKind::job_failed, step, epoch);
          if (!last_checkpoint_.empty()) e.checkpoint_ref = last_checkpoint_;
          flush(e);
          return log_;
        }

        const StepGate gate = step_gate(step, policy_);
        if (gate.checkpoint) {
          last_checkpoint_ = job_.save_checkpoint(step);
          auto& e = emit(EventKind::checkpoint, step, epoch);
          e.checkpoint_ref = last_checkpoint_;
          flush(e);
        }
        if (!gate.poll) continue;

        const auto sample = telemetry_.sample(step, clock_.now());
        Action action;
        if (!sample) {
          flush(emit(EventKind::telemetry_lost, step, epoch));
          action = {ActionKind::warn_pause, policy_.warn_pause_s};
        } else {
          auto& e = emit(EventKind::poll, step, epoch);
          e.sample = sample;
          flush(e);
          action = evaluate_policy(*sample, policy_);
        }

        if (action.kind == ActionKind::critical_pause) {
          last_checkpoint_ = job_.save_checkpoint(step);
          auto& ck = emit(EventKind::checkpoint, step, epoch);
          ck.checkpoint_ref = last_checkpoint_;
          flush(ck);
          auto& e = emit(EventKind::critical_pause, step, epoch);
          e.duration_s = action.pause_s;
          e.sample = sample;
          flush(e);
          for (const auto& hook : hooks_) hook();
          clock_.sleep_for(action.pause_s);
          flush(emit(EventKind::resume, step, epoch));
        } else if (action.kind == ActionKind::warn_pause) {
          auto& e = emit(EventKind::warn_pause, step, epoch);
          e.duration_s = action.pause_s;
          e.sample = sample;
          flush(e);
          clock_.sleep_for(action.pause_s);
          flush(emit(EventKind::resume, step, epoch));
        }
      }
    }

    if (ci + 1 < chunks.size()) {
      auto& e = emit(EventKind::chunk_break, step, last_epoch);
      e.duration_s = policy_.chunk_break_s;
      flush(e);
      clock_.sleep_for(policy_.chunk_break_s);
      flush(emit(EventKind::resume, step, last_epoch));
    }
  }

  flush(emit(EventKind::job_done, step, total_epochs));
  return log_;
}

}  // namespace endosight::supervisor
