#include "maskgen/remote.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <unordered_set>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <pthread.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "maskgen/error.hpp"

namespace maskgen {
namespace {

class FdChannel final : public LineChannel {
public:
    FdChannel(int read_fd, int write_fd, pid_t child) : read_fd_(read_fd), write_fd_(write_fd), child_(child) {}

    ~FdChannel() override {
        if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
        if (read_fd_ >= 0) ::close(read_fd_);
        if (child_ > 0) {
            int status = 0;
            // Closing stdin normally ends a well-behaved server; give it a moment.
            for (int i = 0; i < 50; ++i) {
                if (::waitpid(child_, &status, WNOHANG) == child_) return;
                ::usleep(2000);
            }
            ::kill(child_, SIGKILL);
            ::waitpid(child_, &status, 0);
        }
    }

    FdChannel(const FdChannel&) = delete;
    FdChannel& operator=(const FdChannel&) = delete;

    void write_line(std::string_view line) override {
        std::string buf(line);
        buf.push_back('\n');
        std::size_t off = 0;
        while (off < buf.size()) {
            ssize_t n = ::send(write_fd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
            if (n < 0 && errno == ENOTSOCK) n = pipe_write(buf.data() + off, buf.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ConnectionError(std::string("write to predictor failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string read_line(std::chrono::milliseconds timeout) override {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        while (true) {
            if (auto nl = pending_.find('\n'); nl != std::string::npos) {
                std::string line = pending_.substr(0, nl);
                pending_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) throw ConnectionError("predictor timed out");
            pollfd pfd{read_fd_, POLLIN, 0};
            int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw ConnectionError(std::string("poll failed: ") + std::strerror(errno));
            }
            if (rc == 0) throw ConnectionError("predictor timed out");
            char buf[4096];
            ssize_t n = ::read(read_fd_, buf, sizeof buf);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ConnectionError(std::string("read from predictor failed: ") + std::strerror(errno));
            }
            if (n == 0) throw ConnectionError("predictor closed the connection");
            pending_.append(buf, static_cast<std::size_t>(n));
        }
    }

private:
    // write(2) on a pipe whose reader has exited raises SIGPIPE; block it for
    // this thread and swallow the pending signal so EPIPE is reported instead.
    ssize_t pipe_write(const char* data, std::size_t size) {
        sigset_t pipe_set, old_set;
        sigemptyset(&pipe_set);
        sigaddset(&pipe_set, SIGPIPE);
        pthread_sigmask(SIG_BLOCK, &pipe_set, &old_set);
        ssize_t n = ::write(write_fd_, data, size);
        const int saved = errno;
        if (n < 0 && saved == EPIPE) {
            const timespec zero{0, 0};
            while (sigtimedwait(&pipe_set, nullptr, &zero) == -1 && errno == EINTR) {
            }
        }
        pthread_sigmask(SIG_SETMASK, &old_set, nullptr);
        errno = saved;
        return n;
    }

    int read_fd_;
    int write_fd_;
    pid_t child_;
    std::string pending_;
};

std::unique_ptr<LineChannel> spawn_channel(const std::string& command) {
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0) throw ConnectionError("pipe() failed");
    if (::pipe(from_child) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw ConnectionError("pipe() failed");
    }
    pid_t pid = ::fork();
    if (pid < 0) throw ConnectionError("fork() failed");
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    ::fcntl(to_child[1], F_SETFD, FD_CLOEXEC);
    ::fcntl(from_child[0], F_SETFD, FD_CLOEXEC);
    return std::make_unique<FdChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<LineChannel> tcp_channel(const std::string& host_port) {
    auto colon = host_port.rfind(':');
    if (colon == std::string::npos) throw ValidationError("tcp endpoint needs host:port");
    const std::string host = host_port.substr(0, colon), port = host_port.substr(colon + 1);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
        throw ConnectionError("cannot resolve " + host_port + ": " + ::gai_strerror(rc));
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw ConnectionError("cannot connect to " + host_port);
    return std::make_unique<FdChannel>(fd, fd, -1);
}

const char* mode_name(RemoteMode m) { return m == RemoteMode::mlm ? "mlm" : "clm"; }

}  // namespace

std::unique_ptr<LineChannel> open_channel(std::string_view endpoint) {
    if (endpoint.starts_with("tcp://")) return tcp_channel(std::string(endpoint.substr(6)));
    if (endpoint.starts_with("exec:")) return spawn_channel(std::string(endpoint.substr(5)));
    throw ValidationError("unknown endpoint '" + std::string(endpoint) + "' (expected tcp://host:port or exec:<command>)");
}

RemoteSession::RemoteSession(std::unique_ptr<LineChannel> channel, RemoteMode mode, std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), timeout_(timeout) {
    nlohmann::ordered_json hello{{"op", "hello"}, {"proto", kProtocolVersion}, {"mode", mode_name(mode)}};
    channel_->write_line(hello.dump());
    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(channel_->read_line(timeout_));
    } catch (const nlohmann::json::parse_error&) {
        throw ProtocolError("handshake reply is not JSON");
    }
    if (!reply.is_object() || reply.value("op", "") != "hello_ok") {
        std::string msg = reply.is_object() ? reply.value("message", "") : "";
        throw ProtocolError("handshake rejected" + (msg.empty() ? "" : ": " + msg));
    }
    if (!reply.contains("proto") || !reply["proto"].is_number_integer() || reply["proto"].get<int>() != kProtocolVersion)
        throw ProtocolError("protocol-version mismatch: server speaks " +
                            (reply.contains("proto") ? reply["proto"].dump() : std::string("?")));
}

nlohmann::json RemoteSession::call(nlohmann::json request) {
    const long id = next_id_++;
    request["id"] = id;
    channel_->write_line(request.dump());
    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(channel_->read_line(timeout_));
    } catch (const nlohmann::json::parse_error&) {
        throw ProtocolError("reply is not JSON");
    }
    if (!reply.is_object() || !reply.contains("op") || !reply["op"].is_string()) throw ProtocolError("reply has no op");
    if (!reply.contains("id") || !reply["id"].is_number_integer() || reply["id"].get<long>() != id)
        throw ProtocolError("reply id does not match request " + std::to_string(id));
    const auto op = reply["op"].get<std::string>();
    if (op == "error") throw ProtocolError("server error: " + reply.value("message", std::string("(no message)")));
    if (op != "predictions") throw ProtocolError("unexpected reply op '" + op + "'");
    return reply;
}

std::vector<Distribution::Entry> parse_wire_entries(const nlohmann::json& list, Vocab& vocab, bool allow_eos) {
    if (!list.is_array() || list.empty()) throw ProtocolError("prediction list must be a non-empty array");
    std::vector<Distribution::Entry> out;
    std::unordered_set<TokenId> seen;
    double sum = 0.0;
    for (const auto& e : list) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_number())
            throw ProtocolError("prediction entries must be [\"token\", probability]");
        const auto surface = e[0].get<std::string>();
        const double p = e[1].get<double>();
        if (!std::isfinite(p) || p < 0.0) throw ProtocolError("negative or non-finite probability for '" + surface + "'");
        if (surface.empty()) throw ProtocolError("empty token in predictions");
        TokenId id;
        if (allow_eos && surface == "[EOS]") {
            id = Vocab::kEos;
        } else {
            if (auto existing = vocab.find(surface); existing && *existing < Vocab::kFirstSurface)
                throw ProtocolError("server predicted special token " + surface);
            id = vocab.add(surface);
        }
        if (!seen.insert(id).second) throw ProtocolError("token '" + surface + "' listed twice");
        sum += p;
        out.emplace_back(id, p);
    }
    if (sum > 1.0 + 1e-9) throw ProtocolError("prediction mass exceeds 1");
    return out;
}

RemoteMaskedPredictor::RemoteMaskedPredictor(std::unique_ptr<LineChannel> channel, std::string id,
                                             std::chrono::milliseconds timeout)
    : session_(std::move(channel), RemoteMode::mlm, timeout), id_(std::move(id)) {}

std::vector<Distribution> RemoteMaskedPredictor::predict_masked(std::span<const std::optional<std::string>> slots,
                                                                std::span<const std::size_t> positions,
                                                                std::size_t top_k) {
    nlohmann::json tokens = nlohmann::json::array();
    for (const auto& s : slots) tokens.push_back(s ? *s : std::string(Vocab::kMaskText));
    for (std::size_t p : positions)
        if (p >= slots.size() || slots[p]) throw ContractError("predict_masked: slot " + std::to_string(p) + " is not masked");
    nlohmann::ordered_json req;
    req["op"] = "predict_masked";
    req["tokens"] = std::move(tokens);
    req["positions"] = std::vector<std::size_t>(positions.begin(), positions.end());
    req["top_k"] = top_k;
    auto reply = session_.call(nlohmann::json::parse(req.dump()));
    if (!reply.contains("at") || !reply["at"].is_object()) throw ProtocolError("predictions reply lacks \"at\"");
    std::vector<Distribution> out;
    out.reserve(positions.size());
    for (std::size_t p : positions) {
        auto it = reply["at"].find(std::to_string(p));
        if (it == reply["at"].end()) throw ProtocolError("no prediction for position " + std::to_string(p));
        out.emplace_back(parse_wire_entries(*it, vocab_, false), p);
    }
    return out;
}

RemoteCausalPredictor::RemoteCausalPredictor(std::unique_ptr<LineChannel> channel, std::string id,
                                             std::chrono::milliseconds timeout)
    : session_(std::move(channel), RemoteMode::clm, timeout), id_(std::move(id)) {}

Distribution RemoteCausalPredictor::predict_next(std::span<const std::string> prefix,
                                                 std::span<const std::string> context, std::size_t top_k) {
    nlohmann::ordered_json req;
    req["op"] = "predict_next";
    req["prefix"] = std::vector<std::string>(prefix.begin(), prefix.end());
    req["context"] = std::vector<std::string>(context.begin(), context.end());
    req["top_k"] = top_k;
    auto reply = session_.call(nlohmann::json::parse(req.dump()));
    if (!reply.contains("next")) throw ProtocolError("predictions reply lacks \"next\"");
    return Distribution(parse_wire_entries(reply["next"], vocab_, true), prefix.size());
}

std::unique_ptr<MaskedPredictor> remote_masked_predictor(std::string_view endpoint, std::string id) {
    return std::make_unique<RemoteMaskedPredictor>(open_channel(endpoint), std::move(id));
}

std::unique_ptr<CausalPredictor> remote_causal_predictor(std::string_view endpoint, std::string id) {
    return std::make_unique<RemoteCausalPredictor>(open_channel(endpoint), std::move(id));
}

}  // namespace maskgen
