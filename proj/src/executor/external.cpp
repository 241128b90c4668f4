#include "failsearch/config/json_io.hpp"
#include "failsearch/error.hpp"
#include "failsearch/executor.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace failsearch::exec {

using nlohmann::json;

namespace {

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

void write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ExecutionError(std::string("cannot write to external SUT: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

ExternalSut::ExternalSut(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout), descriptor_(external_sut(command_, timeout)) {
  if (command_.empty()) throw ValidationError("external SUT needs a command");
  if (timeout_.count() <= 0) throw ValidationError("external SUT timeout must be positive");
}

ExternalSut::~ExternalSut() { stop(); }

void ExternalSut::start() {
  // A dead child must surface as a write error, not kill the whole process.
  ::signal(SIGPIPE, SIG_IGN);
  int in[2], out[2], err[2];
  if (::pipe(in) != 0 || ::pipe(out) != 0 || ::pipe(err) != 0)
    throw ExecutionError(std::string("pipe: ") + std::strerror(errno));
  const pid_t pid = ::fork();
  if (pid < 0) throw ExecutionError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in[0], STDIN_FILENO);
    ::dup2(out[1], STDOUT_FILENO);
    ::dup2(err[1], STDERR_FILENO);
    for (int fd : {in[0], in[1], out[0], out[1], err[0], err[1]}) ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in[0]);
  ::close(out[1]);
  ::close(err[1]);
  pid_ = pid;
  to_child_ = in[1];
  from_child_ = out[0];
  err_child_ = err[0];
  ::fcntl(err_child_, F_SETFL, ::fcntl(err_child_, F_GETFL) | O_NONBLOCK);
  buffer_.clear();
}

void ExternalSut::stop() {
  close_fd(to_child_);
  close_fd(from_child_);
  close_fd(err_child_);
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
  buffer_.clear();
}

std::string ExternalSut::stderr_excerpt() {
  if (err_child_ < 0) return {};
  std::string text;
  char buf[512];
  // Give a just-exited child a moment to flush.
  pollfd pfd{err_child_, POLLIN, 0};
  ::poll(&pfd, 1, 50);
  for (;;) {
    const ssize_t n = ::read(err_child_, buf, sizeof buf);
    if (n <= 0) break;
    text.append(buf, static_cast<std::size_t>(n));
    if (text.size() > 2000) break;
  }
  if (text.size() > 500) text = text.substr(text.size() - 500);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

RunResult ExternalSut::run(const EnvConfiguration& config, std::uint64_t seed, int run_index) {
  if (pid_ < 0) start();
  try {
    json request = {{"config", config::to_json(config)}, {"seed", seed}};
    write_all(to_child_, request.dump() + "\n");

    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    std::size_t nl;
    while ((nl = buffer_.find('\n')) == std::string::npos) {
      const auto left =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw TimeoutError(run_index);
      pollfd pfd{from_child_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw ExecutionError(std::string("poll: ") + std::strerror(errno));
      }
      if (ready == 0) throw TimeoutError(run_index);
      char buf[4096];
      const ssize_t n = ::read(from_child_, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        const auto err = stderr_excerpt();
        throw ExecutionError("external SUT exited during run " + std::to_string(run_index) +
                             (err.empty() ? "" : ": " + err));
      }
      buffer_.append(buf, static_cast<std::size_t>(n));
    }
    const std::string line = buffer_.substr(0, nl);
    buffer_.erase(0, nl + 1);

    json reply;
    try {
      reply = json::parse(line);
    } catch (const json::parse_error&) {
      throw ProtocolError("run " + std::to_string(run_index) + ": reply is not JSON: " + line.substr(0, 200));
    }
    if (!reply.is_object() || !reply.contains("failure") || !reply["failure"].is_boolean())
      throw ProtocolError("run " + std::to_string(run_index) + ": reply lacks a boolean \"failure\"");
    if (!reply.contains("trajectory") || !reply["trajectory"].is_array())
      throw ProtocolError("run " + std::to_string(run_index) + ": reply lacks a \"trajectory\" array");
    RunResult r;
    r.failure = reply["failure"].get<bool>();
    try {
      r.trajectory.samples = reply["trajectory"].get<std::vector<std::vector<double>>>();
      r.trajectory.check();
    } catch (const std::exception& e) {
      throw ProtocolError("run " + std::to_string(run_index) + ": bad trajectory: " + e.what());
    }
    return r;
  } catch (const ExecutionError&) {
    // The stream state is unknown after any failure; start afresh next run.
    stop();
    throw;
  }
}

SutDescriptor external_sut(const std::string& command, std::chrono::milliseconds timeout, bool deterministic) {
  SutDescriptor d;
  d.kind = SutDescriptor::Kind::External;
  d.deterministic = deterministic;
  d.runs_per_config = deterministic ? 1 : 10;
  d.params = {{"command", command}, {"timeout_ms", timeout.count()}};
  return d;
}

}  // namespace failsearch::exec
