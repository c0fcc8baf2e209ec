#include "archspace/evaluators.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include "archspace/error.hpp"
#include "archspace/hashing.hpp"
#include "archspace/surrogate.hpp"
#include "json_util.hpp"

namespace archspace {

namespace {

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

// Standard normal from two hash-derived uniforms (Box-Muller).
double gaussian(std::uint64_t state) {
  const double u1 = unit_interval(splitmix64(state));
  const double u2 = unit_interval(splitmix64(state ^ 0x5bd1e9955bd1e995ULL));
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

double linear_ngram_weight(std::string_view feature_key, std::uint64_t seed) {
  return 2.0 * unit_interval(splitmix64(fnv1a64(feature_key, splitmix64(seed)))) - 1.0;
}

double linear_ngram_score(const GraphIR& graph, std::uint64_t seed, double noise_sigma, int ngram_max) {
  double z = 0.0;
  for (const auto& [key, count] : featurize(graph, ngram_max))
    z += linear_ngram_weight(key, seed) * static_cast<double>(count);
  double score = 1.0 / (1.0 + std::exp(-z));
  if (noise_sigma > 0.0) score += noise_sigma * gaussian(splitmix64(seed) ^ signature_hash(graph));
  return clip01(score);
}

double prefix_tree_bonus(std::string_view site, const Literal& value, std::uint64_t seed) {
  std::uint64_t h = fnv1a64(site, splitmix64(seed ^ 0x7072656669780000ULL));
  h = fnv1a64("=", h);
  h = fnv1a64(format_literal(value), h);
  return 0.1 * unit_interval(splitmix64(h)) - 0.05;
}

double prefix_tree_score(const Path& path, std::uint64_t seed) {
  double score = 0.5;
  for (const auto& step : path.steps) score += prefix_tree_bonus(step.site, step.value, seed);
  return clip01(score);
}

// --- score tables ------------------------------------------------------------

ScoreTable parse_score_table(std::string_view json_text) {
  detail::Json j;
  try {
    j = detail::Json::parse(json_text);
  } catch (const detail::Json::parse_error& e) {
    throw Error(ErrorCode::InvalidValue, std::string("score table: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidValue, "score table must be a JSON object");
  ScoreTable table;
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto hash = from_hex(it.key());
    if (!hash) throw Error(ErrorCode::InvalidValue, "score table key is not a 16-digit hex hash: " + it.key());
    if (!it.value().is_number()) throw Error(ErrorCode::InvalidValue, "score table value is not a number: " + it.key());
    const double v = it.value().get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidValue, "score outside [0, 1] for " + it.key());
    table.emplace(*hash, v);
  }
  return table;
}

std::string score_table_json(const ScoreTable& table) {
  detail::Json j = detail::Json::object();
  for (const auto& [hash, score] : table) j[to_hex(hash)] = score;
  return j.dump(1) + "\n";
}

ScoreTable load_score_table(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidValue, "cannot read score table " + file);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_score_table(ss.str());
}

double table_evaluate(const GraphIR& graph, const ScoreTable& table) {
  const std::uint64_t h = signature_hash(graph);
  auto it = table.find(h);
  if (it == table.end()) throw Error(ErrorCode::UnknownModel, "no score for signature " + to_hex(h));
  return it->second;
}

// --- external process --------------------------------------------------------

namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

struct Fd {
  int fd = -1;
  Fd() = default;
  explicit Fd(int f) : fd(f) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

double parse_score(const std::string& raw) {
  std::string_view text = raw;
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ' || text.back() == '\t'))
    text.remove_suffix(1);
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
    throw EvaluationFailed(EvalFailure::Parse, "expected one decimal, got \"" + raw.substr(0, 80) + "\"");
  if (!(v >= 0.0 && v <= 1.0))
    throw EvaluationFailed(EvalFailure::Parse, "score " + std::string(text) + " outside [0, 1]");
  return v;
}

}  // namespace

double external_evaluate(const GraphIR& graph, const std::string& command, double timeout_s) {
  using Clock = std::chrono::steady_clock;
  ignore_sigpipe();
  const std::string request = to_json(graph) + "\n";

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw EvaluationFailed(EvalFailure::Spawn, std::strerror(errno));
  Fd in_r(in_pipe[0]), in_w(in_pipe[1]);
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw EvaluationFailed(EvalFailure::Spawn, std::strerror(errno));
  Fd out_r(out_pipe[0]), out_w(out_pipe[1]);

  const pid_t pid = ::fork();
  if (pid < 0) throw EvaluationFailed(EvalFailure::Spawn, std::strerror(errno));
  if (pid == 0) {
    // Own process group so a timeout also takes down the shell's children.
    ::setpgid(0, 0);
    if (::dup2(in_r.fd, STDIN_FILENO) < 0 || ::dup2(out_w.fd, STDOUT_FILENO) < 0) ::_exit(127);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  in_r.reset();
  out_w.reset();
  ::fcntl(in_w.fd, F_SETFL, ::fcntl(in_w.fd, F_GETFL) | O_NONBLOCK);

  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout_s));
  auto remaining_ms = [&] {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return static_cast<int>(std::clamp<long long>(left, 0, 60'000));
  };
  auto kill_child = [&] {
    ::kill(-pid, SIGKILL);
    ::kill(pid, SIGKILL);
    int status = 0;
    ::waitpid(pid, &status, 0);
  };

  std::string response;
  std::size_t written = 0;
  bool timed_out = false;
  while (out_r.fd >= 0) {
    if (Clock::now() >= deadline) {
      timed_out = true;
      break;
    }
    pollfd fds[2];
    int n = 0;
    fds[n++] = {out_r.fd, POLLIN, 0};
    if (in_w.fd >= 0) fds[n++] = {in_w.fd, POLLOUT, 0};
    const int rc = ::poll(fds, static_cast<nfds_t>(n), remaining_ms());
    if (rc < 0 && errno != EINTR) {
      kill_child();
      throw EvaluationFailed(EvalFailure::Spawn, std::strerror(errno));
    }
    if (rc <= 0) continue;
    if (n == 2 && fds[1].revents) {
      const ssize_t w = ::write(in_w.fd, request.data() + written, request.size() - written);
      if (w > 0) written += static_cast<std::size_t>(w);
      // The child may legitimately ignore its input and exit early.
      if (w < 0 && errno != EAGAIN && errno != EINTR) in_w.reset();
      if (written == request.size()) in_w.reset();
    }
    if (fds[0].revents) {
      char buf[4096];
      const ssize_t r = ::read(out_r.fd, buf, sizeof buf);
      if (r > 0) {
        response.append(buf, static_cast<std::size_t>(r));
        if (response.size() > (1u << 20)) {
          kill_child();
          throw EvaluationFailed(EvalFailure::Parse, "response exceeds 1 MiB");
        }
      } else if (r == 0 || (errno != EAGAIN && errno != EINTR)) {
        out_r.reset();
      }
    }
  }
  in_w.reset();

  int status = 0;
  while (!timed_out) {
    const pid_t w = ::waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (w < 0 && errno != EINTR) throw EvaluationFailed(EvalFailure::Spawn, std::strerror(errno));
    if (Clock::now() >= deadline) {
      timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  if (timed_out) {
    kill_child();
    throw EvaluationFailed(EvalFailure::Timeout, "no result after " + format_literal(Literal{timeout_s}) + " s");
  }
  if (WIFSIGNALED(status))
    throw EvaluationFailed(EvalFailure::ExitCode, "killed by signal " + std::to_string(WTERMSIG(status)),
                           128 + WTERMSIG(status));
  const int code = WEXITSTATUS(status);
  if (code != 0) throw EvaluationFailed(EvalFailure::ExitCode, "exit status " + std::to_string(code), code);
  return parse_score(response);
}

// --- memoization -------------------------------------------------------------

double CachedEvaluator::evaluate(const GraphIR& graph) {
  const std::uint64_t h = signature_hash(graph);
  {
    std::lock_guard lock(mutex_);
    auto it = memo_.find(h);
    if (it != memo_.end()) {
      ++hits_;
      return it->second;
    }
  }
  // Evaluated outside the lock; two threads racing on one signature both
  // compute, which is harmless for deterministic evaluators.
  const double score = inner_->evaluate(graph);
  std::lock_guard lock(mutex_);
  ++misses_;
  memo_.emplace(h, score);
  return score;
}

std::size_t CachedEvaluator::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::size_t CachedEvaluator::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

std::unique_ptr<Evaluator> cached(std::unique_ptr<Evaluator> inner) {
  return std::make_unique<CachedEvaluator>(std::move(inner));
}

// --- factory -------------------------------------------------------------------

namespace {

std::uint64_t parse_seed(std::string_view text, std::string_view spec) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
    throw Error(ErrorCode::InvalidValue, "bad seed in evaluator spec \"" + std::string(spec) + "\"");
  return v;
}

std::optional<double> parse_double(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

}  // namespace

std::unique_ptr<Evaluator> make_evaluator(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos)
    throw Error(ErrorCode::InvalidValue, "evaluator spec needs <kind>:<args>, got \"" + std::string(spec) + "\"");
  const std::string_view kind = spec.substr(0, colon);
  const std::string_view rest = spec.substr(colon + 1);

  if (kind == "linear") {
    const auto c = rest.find(':');
    const std::uint64_t seed = parse_seed(rest.substr(0, c), spec);
    double sigma = 0.0;
    if (c != std::string_view::npos) {
      auto s = parse_double(rest.substr(c + 1));
      if (!s || !(*s >= 0.0)) throw Error(ErrorCode::InvalidValue, "bad sigma in \"" + std::string(spec) + "\"");
      sigma = *s;
    }
    return std::make_unique<LinearNgramEvaluator>(seed, sigma);
  }
  if (kind == "prefix") return std::make_unique<PrefixTreeEvaluator>(parse_seed(rest, spec));
  if (kind == "table")
    return std::make_unique<TableEvaluator>(std::make_shared<const ScoreTable>(load_score_table(std::string(rest))));
  if (kind == "cmd") {
    // A trailing ":<number>" is the timeout; the program itself may contain colons.
    std::string_view program = rest;
    double timeout = 3600.0;
    if (const auto c = rest.rfind(':'); c != std::string_view::npos) {
      if (auto t = parse_double(rest.substr(c + 1))) {
        if (!(*t > 0.0)) throw Error(ErrorCode::InvalidValue, "timeout must be > 0 in \"" + std::string(spec) + "\"");
        timeout = *t;
        program = rest.substr(0, c);
      }
    }
    if (program.empty()) throw Error(ErrorCode::InvalidValue, "empty command in evaluator spec");
    return std::make_unique<ExternalEvaluator>(std::string(program), timeout);
  }
  throw Error(ErrorCode::InvalidValue, "unknown evaluator kind \"" + std::string(kind) + "\"");
}

}  // namespace archspace
