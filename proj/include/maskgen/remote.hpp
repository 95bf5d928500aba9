#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "maskgen/predictor.hpp"

namespace maskgen {

/// Newline-delimited JSON transport to a predictor server.
///
/// Endpoints:
///   tcp://host:port   connect to a listening server
///   exec:<command>    spawn `/bin/sh -c <command>` and talk over its stdio
class LineChannel {
public:
    virtual ~LineChannel() = default;
    virtual void write_line(std::string_view line) = 0;
    /// Blocks until a full line arrives; throws ConnectionError on EOF or timeout.
    virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

std::unique_ptr<LineChannel> open_channel(std::string_view endpoint);

enum class RemoteMode { mlm, clm };

/// One handshaken connection. Requests are serialised: one in flight.
class RemoteSession {
public:
    static constexpr int kProtocolVersion = 1;

    RemoteSession(std::unique_ptr<LineChannel> channel, RemoteMode mode,
                  std::chrono::milliseconds timeout = std::chrono::seconds(30));

    /// Assigns the next request id, sends, and returns the matching
    /// "predictions" reply. Server "error" replies become ProtocolError.
    nlohmann::json call(nlohmann::json request);

private:
    std::unique_ptr<LineChannel> channel_;
    std::chrono::milliseconds timeout_;
    long next_id_ = 1;
};

class RemoteMaskedPredictor final : public MaskedPredictor {
public:
    RemoteMaskedPredictor(std::unique_ptr<LineChannel> channel, std::string id,
                          std::chrono::milliseconds timeout = std::chrono::seconds(30));

    std::string id() const override { return id_; }
    const Vocab& vocab() const override { return vocab_; }
    std::vector<Distribution> predict_masked(std::span<const std::optional<std::string>> slots,
                                             std::span<const std::size_t> positions, std::size_t top_k) override;

private:
    RemoteSession session_;
    std::string id_;
    Vocab vocab_;  // grows as the server names new tokens
};

class RemoteCausalPredictor final : public CausalPredictor {
public:
    RemoteCausalPredictor(std::unique_ptr<LineChannel> channel, std::string id,
                          std::chrono::milliseconds timeout = std::chrono::seconds(30));

    std::string id() const override { return id_; }
    const Vocab& vocab() const override { return vocab_; }
    Distribution predict_next(std::span<const std::string> prefix, std::span<const std::string> context,
                              std::size_t top_k) override;

private:
    RemoteSession session_;
    std::string id_;
    Vocab vocab_;
};

std::unique_ptr<MaskedPredictor> remote_masked_predictor(std::string_view endpoint, std::string id = "remote-mlm");
std::unique_ptr<CausalPredictor> remote_causal_predictor(std::string_view endpoint, std::string id = "remote-clm");

/// Parses a reply's `[["token", p], ...]` list into distribution entries,
/// adding unseen tokens to `vocab`. "[EOS]" maps to Vocab::kEos when
/// `allow_eos`. Throws ProtocolError on any malformed or invalid entry.
std::vector<Distribution::Entry> parse_wire_entries(const nlohmann::json& list, Vocab& vocab, bool allow_eos);

}  // namespace maskgen
