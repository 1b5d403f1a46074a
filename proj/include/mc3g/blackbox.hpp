#ifndef MC3G_BLACKBOX_HPP
#define MC3G_BLACKBOX_HPP

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mc3g/csv.hpp"
#include "mc3g/dataset.hpp"
#include "mc3g/error.hpp"
#include "mc3g/rules.hpp"
#include "mc3g/schema.hpp"

namespace mc3g {

enum class ModelKind { internal_rules, subprocess, predictions_file };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::internal_rules:
      return "internal-rules";
    case ModelKind::subprocess:
      return "subprocess";
    case ModelKind::predictions_file:
      return "predictions-file";
  }
  return "?";
}

/// The classifier being explained. Only labels cross this boundary.
///
/// A model that returns its rules from `rules()` is treated as rule-based
/// and its rules are used verbatim; otherwise a surrogate is learned from
/// its predictions.
class BlackBox {
 public:
  virtual ~BlackBox() = default;
  virtual ModelKind kind() const = 0;
  virtual const DecisionRuleSet* rules() const { return nullptr; }
  virtual std::vector<std::string> predict(std::span<const State> batch) = 0;
};

using BlackBoxHandle = std::unique_ptr<BlackBox>;

// Evaluates a rule set in process. With `transparent = false` the rules are
// hidden, so the model behaves like any statistical classifier.
class RuleModel final : public BlackBox {
 public:
  explicit RuleModel(DecisionRuleSet rules, bool transparent = true)
      : rules_(std::move(rules)), transparent_(transparent) {}

  ModelKind kind() const override { return ModelKind::internal_rules; }
  const DecisionRuleSet* rules() const override { return transparent_ ? &rules_ : nullptr; }

  std::vector<std::string> predict(std::span<const State> batch) override {
    std::vector<std::string> out;
    out.reserve(batch.size());
    for (const auto& s : batch)
      out.push_back(is_decision_compliant(s, rules_) ? rules_.undesired : rules_.favorable);
    return out;
  }

 private:
  DecisionRuleSet rules_;
  bool transparent_;
};

// Replays recorded labels for dataset rows (CSV with row_id,label).
class PredictionsFileModel final : public BlackBox {
 public:
  PredictionsFileModel(const Dataset& data, std::istream& predictions) {
    auto records = csv::read(predictions);
    if (records.empty()) throw ParseError("predictions file is empty");
    const auto& header = records.front();
    if (header.size() < 2 || header[0] != "row_id" || header[1] != "label")
      throw ParseError("predictions file header must be 'row_id,label'");
    std::map<std::size_t, std::string> by_row;
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto& rec = records[r];
      if (rec.size() < 2) throw ParseError("short predictions record", r + 1, 1);
      auto id = parse_number(rec[0]);
      if (!id || *id < 0 || *id != static_cast<double>(static_cast<std::size_t>(*id)))
        throw ParseError("bad row_id '" + rec[0] + "'", r + 1, 1);
      by_row[static_cast<std::size_t>(*id)] = rec[1];
    }
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
      auto it = by_row.find(i);
      if (it != by_row.end()) remember(data.rows[i], it->second);
    }
  }

  // Labels given in row order, e.g. a dataset's own label column.
  PredictionsFileModel(const Dataset& data, std::span<const std::string> labels) {
    if (labels.size() != data.rows.size())
      throw ConfigError("got " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(data.rows.size()) + " rows");
    for (std::size_t i = 0; i < data.rows.size(); ++i) remember(data.rows[i], labels[i]);
  }

  ModelKind kind() const override { return ModelKind::predictions_file; }

  std::vector<std::string> predict(std::span<const State> batch) override {
    std::vector<std::string> out;
    out.reserve(batch.size());
    for (const auto& s : batch) {
      std::vector<double> key(s.values().begin(), s.values().end());
      auto it = labels_.find(key);
      if (it == labels_.end())
        throw MissingPrediction("no recorded prediction for state " + s.to_string());
      out.push_back(it->second);
    }
    return out;
  }

 private:
  void remember(const State& row, const std::string& label) {
    labels_.try_emplace(std::vector<double>(row.values().begin(), row.values().end()), label);
  }

  std::map<std::vector<double>, std::string> labels_;
};

/// Talks to an external scorer over JSON lines.
///
/// Each state is written to the child's stdin as {"values": [...]} (numbers
/// for numeric features, level names otherwise); the child answers one
/// {"label": "..."} line per state. The scorer must be deterministic.
class SubprocessModel final : public BlackBox {
 public:
  explicit SubprocessModel(std::string command,
                           std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : command_(std::move(command)), timeout_(timeout) {}

  ~SubprocessModel() override { stop(); }

  SubprocessModel(const SubprocessModel&) = delete;
  SubprocessModel& operator=(const SubprocessModel&) = delete;

  ModelKind kind() const override { return ModelKind::subprocess; }

  std::vector<std::string> predict(std::span<const State> batch) override {
    if (batch.empty()) return {};
    if (pid_ < 0) start();

    std::string request;
    for (const auto& s : batch) {
      nlohmann::json values = nlohmann::json::array();
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& f = s.schema()[i];
        if (f.kind == FeatureKind::numeric)
          values.push_back(s[i]);
        else
          values.push_back(f.format(s[i]));
      }
      request += nlohmann::json{{"values", std::move(values)}}.dump();
      request.push_back('\n');
    }

    std::vector<std::string> labels;
    labels.reserve(batch.size());
    std::size_t written = 0;
    const auto deadline = std::chrono::steady_clock::now() + timeout_;

    while (labels.size() < batch.size()) {
      auto now = std::chrono::steady_clock::now();
      if (now >= deadline) {
        stop();
        throw Timeout("model '" + command_ + "' did not answer within " +
                      std::to_string(timeout_.count()) + " ms");
      }
      const int wait_ms = static_cast<int>(
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count()) + 1;

      pollfd fds[2];
      fds[0] = {fd_, POLLIN, 0};
      fds[1] = {fd_, static_cast<short>(written < request.size() ? POLLOUT : 0), 0};
      int rc = ::poll(fds, written < request.size() ? 2 : 1, wait_ms);
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw BlackBoxFailure(std::string("poll failed: ") + std::strerror(errno), labels.size());
      }

      if (written < request.size() && (fds[1].revents & POLLOUT)) {
        ssize_t n = ::send(fd_, request.data() + written, request.size() - written,
                           MSG_NOSIGNAL | MSG_DONTWAIT);
        if (n > 0) {
          written += static_cast<std::size_t>(n);
        } else if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
          // The child stopped reading; collect what it did answer first.
          written = request.size();
        }
      }

      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        char buf[4096];
        ssize_t n = ::recv(fd_, buf, sizeof(buf), MSG_DONTWAIT);
        if (n > 0) {
          pending_.append(buf, static_cast<std::size_t>(n));
          drain_lines(labels, batch.size());
        } else if (n == 0) {
          fail_child("model closed its output", labels.size());
        } else if (errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
          fail_child(std::string("read failed: ") + std::strerror(errno), labels.size());
        }
      }
    }
    return labels;
  }

 private:
  void drain_lines(std::vector<std::string>& labels, std::size_t wanted) {
    std::size_t nl;
    while (labels.size() < wanted && (nl = pending_.find('\n')) != std::string::npos) {
      std::string line = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      nlohmann::json reply;
      try {
        reply = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        stop();
        throw ProtocolError("malformed reply for row " + std::to_string(labels.size()) + ": " +
                            line);
      }
      if (!reply.is_object() || !reply.contains("label")) {
        stop();
        throw ProtocolError("reply for row " + std::to_string(labels.size()) +
                            " lacks a \"label\" field");
      }
      const auto& label = reply.at("label");
      labels.push_back(label.is_string() ? label.get<std::string>() : label.dump());
    }
  }

  [[noreturn]] void fail_child(const std::string& what, std::size_t row) {
    int status = stop();
    std::string detail = what;
    if (status >= 0 && WIFEXITED(status))
      detail += ", exit status " + std::to_string(WEXITSTATUS(status));
    else if (status >= 0 && WIFSIGNALED(status))
      detail += ", killed by signal " + std::to_string(WTERMSIG(status));
    throw BlackBoxFailure(detail, row);
  }

  void start() {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
      throw BlackBoxFailure(std::string("socketpair: ") + std::strerror(errno), 0);
    pid_t pid = ::fork();
    if (pid < 0) {
      ::close(sv[0]);
      ::close(sv[1]);
      throw BlackBoxFailure(std::string("fork: ") + std::strerror(errno), 0);
    }
    if (pid == 0) {
      ::dup2(sv[1], STDIN_FILENO);
      ::dup2(sv[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(sv[1]);
    fd_ = sv[0];
    pid_ = pid;
    pending_.clear();
  }

  // Closes the channel and reaps the child; returns its wait status or -1.
  int stop() {
    if (pid_ < 0) return -1;
    ::shutdown(fd_, SHUT_WR);
    int status = -1;
    const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(500);
    pid_t r = 0;
    while ((r = ::waitpid(pid_, &status, WNOHANG)) == 0 &&
           std::chrono::steady_clock::now() < until)
      ::usleep(2000);
    if (r == 0) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    ::close(fd_);
    fd_ = -1;
    pid_ = -1;
    return status;
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int fd_ = -1;
  std::string pending_;
};

}  // namespace mc3g

#endif  // MC3G_BLACKBOX_HPP
