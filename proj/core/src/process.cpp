#include "wdiv/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>

#include "wdiv/errors.hpp"

extern char** environ;

namespace wdiv {

namespace {

using Clock = std::chrono::steady_clock;

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& other) noexcept : fd_(other.release()) {}
  Fd& operator=(Fd&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = other.release();
    }
    return *this;
  }

  int get() const { return fd_; }
  int release() {
    const int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

void make_pipe(Fd& read_end, Fd& write_end) {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw SpawnError(std::string("pipe2: ") + std::strerror(errno));
  }
  read_end = Fd(fds[0]);
  write_end = Fd(fds[1]);
}

class StreamSink {
 public:
  explicit StreamSink(std::size_t cap) : cap_(cap) {}

  void append(const std::uint8_t* data, std::size_t len) {
    hasher_.update(std::span(data, len));
    size_ += len;
    if (capture_.data.size() < cap_) {
      const std::size_t room = cap_ - capture_.data.size();
      capture_.data.insert(capture_.data.end(), data, data + std::min(room, len));
    }
  }

  StreamCapture finish() {
    capture_.size = size_;
    capture_.digest = hasher_.hex_digest();
    return std::move(capture_);
  }

 private:
  std::size_t cap_;
  std::uint64_t size_ = 0;
  Sha256 hasher_;
  StreamCapture capture_;
};

void set_limit(int resource, rlim_t value) {
  struct rlimit lim {};
  lim.rlim_cur = value;
  lim.rlim_max = value;
  ::setrlimit(resource, &lim);
}

}  // namespace

ProcessResult run_process(const ProcessSpec& spec) {
  if (spec.argv.empty()) throw SpawnError("empty argv");

  const auto resolved = find_executable(spec.argv.front());
  if (!resolved) throw SpawnError("executable not found: " + spec.argv.front());
  const std::string program = resolved->string();

  // Everything the child touches is prepared before fork: only
  // async-signal-safe calls are allowed between fork and exec.
  std::vector<char*> argv;
  argv.reserve(spec.argv.size() + 1);
  for (const auto& arg : spec.argv) argv.push_back(const_cast<char*>(arg.c_str()));
  argv.push_back(nullptr);

  std::vector<char*> envp;
  if (spec.env) {
    for (const auto& kv : *spec.env) envp.push_back(const_cast<char*>(kv.c_str()));
    envp.push_back(nullptr);
  }
  char** child_env = spec.env ? envp.data() : environ;
  const std::string cwd = spec.cwd.string();

  Fd out_r, out_w, err_r, err_w, status_r, status_w;
  make_pipe(out_r, out_w);
  make_pipe(err_r, err_w);
  make_pipe(status_r, status_w);

  const Clock::time_point start = Clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) throw SpawnError(std::string("fork: ") + std::strerror(errno));

  if (pid == 0) {
    ::setsid();
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::dup2(out_w.get(), STDOUT_FILENO);
    ::dup2(err_w.get(), STDERR_FILENO);
    set_limit(RLIMIT_CORE, 0);
    if (spec.address_space_limit) set_limit(RLIMIT_AS, *spec.address_space_limit);
    if (spec.file_size_limit) set_limit(RLIMIT_FSIZE, *spec.file_size_limit);
    for (int sig : {SIGPIPE, SIGINT, SIGTERM, SIGCHLD}) ::signal(sig, SIG_DFL);
    if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) {
      const int err = errno;
      [[maybe_unused]] auto n = ::write(status_w.get(), &err, sizeof err);
      ::_exit(127);
    }
    ::execve(program.c_str(), argv.data(), child_env);
    const int err = errno;
    [[maybe_unused]] auto n = ::write(status_w.get(), &err, sizeof err);
    ::_exit(127);
  }

  out_w.reset();
  err_w.reset();
  status_w.reset();

  int exec_errno = 0;
  const ssize_t status_len = ::read(status_r.get(), &exec_errno, sizeof exec_errno);
  if (status_len == static_cast<ssize_t>(sizeof exec_errno)) {
    int ignored = 0;
    ::waitpid(pid, &ignored, 0);
    throw SpawnError("cannot start " + program + ": " + std::strerror(exec_errno));
  }

  StreamSink out_sink(spec.capture_cap);
  StreamSink err_sink(spec.capture_cap);
  const Clock::time_point deadline = start + spec.timeout;
  bool timed_out = false;
  // Once the group is killed, stray descendants holding the pipes get a short grace period.
  Clock::time_point drain_deadline = Clock::time_point::max();

  std::array<std::uint8_t, 65536> buffer{};
  while (out_r.get() >= 0 || err_r.get() >= 0) {
    const Clock::time_point now = Clock::now();
    if (!timed_out && now >= deadline) {
      timed_out = true;
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      drain_deadline = now + std::chrono::milliseconds(500);
    }
    if (timed_out && now >= drain_deadline) break;

    const Clock::time_point wake = timed_out ? drain_deadline : deadline;
    const auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(wake - now).count();
    std::array<pollfd, 2> fds{};
    fds[0] = {out_r.get(), POLLIN, 0};
    fds[1] = {err_r.get(), POLLIN, 0};
    const int ready = ::poll(fds.data(), fds.size(), static_cast<int>(std::max<long long>(wait_ms, 1)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (std::size_t k = 0; k < fds.size(); ++k) {
      if (fds[k].fd < 0 || (fds[k].revents & (POLLIN | POLLHUP | POLLERR)) == 0) continue;
      const ssize_t n = ::read(fds[k].fd, buffer.data(), buffer.size());
      if (n > 0) {
        (k == 0 ? out_sink : err_sink).append(buffer.data(), static_cast<std::size_t>(n));
      } else if (n == 0 || (errno != EINTR && errno != EAGAIN)) {
        (k == 0 ? out_r : err_r).reset();
      }
    }
  }

  int status = 0;
  if (!timed_out) {
    // Pipes closed; the child may still be running (it closed its own stdout).
    while (true) {
      const pid_t w = ::waitpid(pid, &status, WNOHANG);
      if (w == pid) break;
      if (w < 0 && errno != EINTR) break;
      if (Clock::now() >= deadline) {
        timed_out = true;
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        break;
      }
      ::usleep(1000);
    }
  } else {
    ::waitpid(pid, &status, 0);
  }
  // Leftover descendants of a finished child are not our business, but a timed-out group is.
  if (timed_out) ::kill(-pid, SIGKILL);

  ProcessResult result;
  result.wall_time =
      std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
  result.out = out_sink.finish();
  result.err = err_sink.finish();
  if (timed_out) {
    result.kind = ProcessResult::Kind::timed_out;
  } else if (WIFSIGNALED(status)) {
    result.kind = ProcessResult::Kind::signaled;
    result.signal = WTERMSIG(status);
  } else {
    result.kind = ProcessResult::Kind::exited;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  return result;
}

}  // namespace wdiv
