#pragma once

#include <cerrno>
#include <csignal>
#include <cstdio>
#include <string>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "boxseg/error.hpp"

namespace boxseg {

/// A child process driven by one-line requests and one-line replies over
/// its stdin/stdout. Strictly one request in flight; not thread-safe.
class LineProcess {
 public:
  LineProcess(std::string command, std::string identity)
      : command_(std::move(command)), identity_(std::move(identity)) {
    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw BackendError(identity_, "pipe() failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw BackendError(identity_, "pipe() failed");
    }
    pid_ = ::fork();
    if (pid_ < 0) throw BackendError(identity_, "fork() failed");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    reader_ = ::fdopen(from_child[0], "r");
  }

  LineProcess(const LineProcess&) = delete;
  LineProcess& operator=(const LineProcess&) = delete;

  ~LineProcess() { shutdown(); }

  /// Send one line and block for exactly one reply line.
  std::string request(const std::string& line) {
    if (write_fd_ < 0 || reader_ == nullptr) throw BackendError(identity_, "process not running");
    std::string msg = line + "\n";
    const char* p = msg.data();
    std::size_t left = msg.size();
    while (left > 0) {
      const ssize_t n = ::write(write_fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BackendError(identity_, "process closed its input" + exit_note());
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    std::string reply;
    for (int c; (c = std::fgetc(reader_)) != EOF;) {
      if (c == '\n') return reply;
      reply.push_back(static_cast<char>(c));
    }
    throw BackendError(identity_, "process ended without a reply" + exit_note(), reply);
  }

  const std::string& identity() const noexcept { return identity_; }

 private:
  std::string exit_note() {
    if (pid_ <= 0) return {};
    // The child usually exits right after closing stdout; give it a moment.
    for (int attempt = 0; attempt < 20; ++attempt) {
      int status = 0;
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        if (WIFEXITED(status)) return " (exit code " + std::to_string(WEXITSTATUS(status)) + ")";
        if (WIFSIGNALED(status)) return " (signal " + std::to_string(WTERMSIG(status)) + ")";
        return {};
      }
      ::usleep(10'000);
    }
    return {};
  }

  void shutdown() noexcept {
    if (write_fd_ >= 0) ::close(write_fd_);
    write_fd_ = -1;
    if (reader_ != nullptr) std::fclose(reader_);
    reader_ = nullptr;
    if (pid_ > 0) {
      int status = 0;
      ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  std::string command_;
  std::string identity_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  std::FILE* reader_ = nullptr;
};

}  // namespace boxseg
