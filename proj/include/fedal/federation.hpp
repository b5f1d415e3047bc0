#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "fedal/types.hpp"

namespace fedal {

/// Which protocol step a broadcast belongs to.
enum class Phase : std::uint8_t {
  InnerInit = 0,  // start of an ADMM solve: clients build (u, lambda, u~) at the anchor
  Inner = 1,      // one ADMM round
  Outer = 2,      // multiplier update after a subproblem solve
};

struct RoundId {
  std::uint64_t outer = 0;
  std::uint64_t inner = 0;
  Phase phase = Phase::Inner;

  friend bool operator==(const RoundId&, const RoundId&) = default;
};

// The message set is closed: these four variants are the only things that
// cross the server/client boundary. None of them has room for a client's
// samples, its constraint values c_i(w) or its multiplier vector mu_i.

/// Server -> every client.
struct BroadcastWeights {
  Vec w;
  RoundId round;
};

/// Client -> server after an ADMM round: u~_i and eps~_i. Client ids run 1..n.
struct ClientInnerReport {
  std::uint64_t client = 0;
  Vec shifted_weight;
  double residual = 0.0;
};

/// Client -> server after a multiplier update: ||mu_i^{k+1} - mu_i^k||_inf.
struct ClientMultiplierDelta {
  std::uint64_t client = 0;
  double delta_inf = 0.0;
};

/// Server -> every client once the outer loop stops.
struct ServerTerminate {
  Vec w;
  std::uint64_t mu0_digest = 0;
};

using Message = std::variant<BroadcastWeights, ClientInnerReport, ClientMultiplierDelta, ServerTerminate>;

/// Wire layout (little endian):
///   u8 tag (variant index), then
///   BroadcastWeights      u64 outer, u64 inner, u8 phase, u64 len, f64[len]
///   ClientInnerReport     u64 client, u64 len, f64[len], f64 residual
///   ClientMultiplierDelta u64 client, f64 delta
///   ServerTerminate       u64 len, f64[len], u64 digest
std::vector<std::uint8_t> serialize(const Message& msg);
Message deserialize(std::span<const std::uint8_t> bytes);

/// Number of real numbers a message transfers.
std::size_t scalar_volume(const Message& msg);

/// FNV-1a over the IEEE-754 bytes of v.
std::uint64_t digest(const Vec& v);

/// A client state machine as seen by the transport.
class ClientEndpoint {
 public:
  virtual ~ClientEndpoint() = default;
  /// Reply to a server message; ServerTerminate gets no reply.
  virtual std::optional<Message> on_message(const Message& msg) = 0;
  /// Number of server messages this endpoint has processed.
  virtual std::uint64_t messages_processed() const = 0;
};

struct RoundRecord {
  std::optional<RoundId> round;  // empty for ServerTerminate
  std::size_t broadcasts = 0;
  std::size_t reports = 0;
  std::size_t scalars = 0;
  std::size_t bytes = 0;
  bool aborted = false;
};

/// Append-only communication accounting.
class CommLedger {
 public:
  void record(const RoundRecord& r);
  const std::vector<RoundRecord>& rounds() const { return rounds_; }

  std::size_t total_broadcasts() const { return broadcasts_; }
  std::size_t total_reports() const { return reports_; }
  std::size_t total_scalars() const { return scalars_; }
  std::size_t total_bytes() const { return bytes_; }
  std::size_t rounds_with_phase(Phase phase) const;

 private:
  std::vector<RoundRecord> rounds_;
  std::size_t broadcasts_ = 0;
  std::size_t reports_ = 0;
  std::size_t scalars_ = 0;
  std::size_t bytes_ = 0;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::size_t num_clients() const = 0;
  /// Deliver `msg` to every client and return their replies in client order.
  virtual std::vector<Message> roundtrip(const Message& msg) = 0;
  virtual const CommLedger& ledger() const = 0;
};

/// Synchronous in-process simulation. With `parallel` the handlers of one
/// round run on separate threads; replies are still collected in index order.
class InProcessTransport final : public Transport {
 public:
  explicit InProcessTransport(std::vector<ClientEndpoint*> clients, bool parallel = false);

  std::size_t num_clients() const override { return clients_.size(); }
  std::vector<Message> roundtrip(const Message& msg) override;
  const CommLedger& ledger() const override { return ledger_; }

 private:
  std::vector<ClientEndpoint*> clients_;
  bool parallel_;
  CommLedger ledger_;
};

}  // namespace fedal
