#include "fedal/federation.hpp"

#include <bit>
#include <cstring>
#include <exception>
#include <future>
#include <string>

namespace fedal {
namespace {

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u64(std::uint64_t v) { raw(v); }
  void f64(double v) { raw(std::bit_cast<std::uint64_t>(v)); }
  void vec(const Vec& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void raw(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(in_[pos_ + b]) << (8 * b);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Vec vec() {
    const std::uint64_t n = u64();
    if (n > (in_.size() - pos_) / 8) throw TransportError("deserialize: vector length exceeds buffer");
    Vec v(static_cast<Index>(n));
    for (Index i = 0; i < v.size(); ++i) v[i] = f64();
    return v;
  }
  void finish() const {
    if (pos_ != in_.size()) throw TransportError("deserialize: trailing bytes");
  }

 private:
  void need(std::size_t k) const {
    if (in_.size() - pos_ < k) throw TransportError("deserialize: truncated message");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const Message& msg) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(msg.index()));
  std::visit(Overloaded{
                 [&](const BroadcastWeights& m) {
                   w.u64(m.round.outer);
                   w.u64(m.round.inner);
                   w.u8(static_cast<std::uint8_t>(m.round.phase));
                   w.vec(m.w);
                 },
                 [&](const ClientInnerReport& m) {
                   w.u64(m.client);
                   w.vec(m.shifted_weight);
                   w.f64(m.residual);
                 },
                 [&](const ClientMultiplierDelta& m) {
                   w.u64(m.client);
                   w.f64(m.delta_inf);
                 },
                 [&](const ServerTerminate& m) {
                   w.vec(m.w);
                   w.u64(m.mu0_digest);
                 },
             },
             msg);
  return w.take();
}

Message deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::uint8_t tag = r.u8();
  Message out;
  switch (tag) {
    case 0: {
      BroadcastWeights m;
      m.round.outer = r.u64();
      m.round.inner = r.u64();
      const std::uint8_t phase = r.u8();
      if (phase > 2) throw TransportError("deserialize: bad phase");
      m.round.phase = static_cast<Phase>(phase);
      m.w = r.vec();
      out = std::move(m);
      break;
    }
    case 1: {
      ClientInnerReport m;
      m.client = r.u64();
      m.shifted_weight = r.vec();
      m.residual = r.f64();
      out = std::move(m);
      break;
    }
    case 2: {
      ClientMultiplierDelta m;
      m.client = r.u64();
      m.delta_inf = r.f64();
      out = m;
      break;
    }
    case 3: {
      ServerTerminate m;
      m.w = r.vec();
      m.mu0_digest = r.u64();
      out = std::move(m);
      break;
    }
    default:
      throw TransportError("deserialize: unknown tag " + std::to_string(tag));
  }
  r.finish();
  return out;
}

std::size_t scalar_volume(const Message& msg) {
  return std::visit(Overloaded{
                        [](const BroadcastWeights& m) { return static_cast<std::size_t>(m.w.size()); },
                        [](const ClientInnerReport& m) { return static_cast<std::size_t>(m.shifted_weight.size()) + 1; },
                        [](const ClientMultiplierDelta&) { return std::size_t{1}; },
                        [](const ServerTerminate& m) { return static_cast<std::size_t>(m.w.size()); },
                    },
                    msg);
}

std::uint64_t digest(const Vec& v) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Index i = 0; i < v.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(v[i]);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void CommLedger::record(const RoundRecord& r) {
  rounds_.push_back(r);
  broadcasts_ += r.broadcasts;
  reports_ += r.reports;
  scalars_ += r.scalars;
  bytes_ += r.bytes;
}

std::size_t CommLedger::rounds_with_phase(Phase phase) const {
  std::size_t n = 0;
  for (const auto& r : rounds_)
    if (!r.aborted && r.round && r.round->phase == phase) ++n;
  return n;
}

InProcessTransport::InProcessTransport(std::vector<ClientEndpoint*> clients, bool parallel)
    : clients_(std::move(clients)), parallel_(parallel) {
  if (clients_.empty()) throw std::invalid_argument("InProcessTransport: no clients registered");
  for (auto* c : clients_)
    if (c == nullptr) throw std::invalid_argument("InProcessTransport: null client");
}

std::vector<Message> InProcessTransport::roundtrip(const Message& msg) {
  const bool terminate = std::holds_alternative<ServerTerminate>(msg);
  if (!terminate && !std::holds_alternative<BroadcastWeights>(msg))
    throw TransportError("roundtrip: only server messages can be broadcast");

  RoundRecord rec;
  if (!terminate) rec.round = std::get<BroadcastWeights>(msg).round;
  rec.broadcasts = 1;
  rec.scalars = scalar_volume(msg);
  rec.bytes = serialize(msg).size();

  const std::size_t n = clients_.size();
  std::vector<std::optional<Message>> replies(n);
  std::exception_ptr failure;
  if (parallel_ && n > 1) {
    std::vector<std::future<std::optional<Message>>> futures;
    futures.reserve(n);
    for (auto* c : clients_) futures.push_back(std::async(std::launch::async, [c, &msg] { return c->on_message(msg); }));
    for (std::size_t i = 0; i < n; ++i) {
      try {
        replies[i] = futures[i].get();
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
  } else {
    for (std::size_t i = 0; i < n && !failure; ++i) {
      try {
        replies[i] = clients_[i]->on_message(msg);
      } catch (...) {
        failure = std::current_exception();
      }
    }
  }

  std::vector<Message> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!replies[i]) continue;
    const Message& reply = *replies[i];
    std::uint64_t sender = 0;
    if (const auto* r = std::get_if<ClientInnerReport>(&reply)) {
      sender = r->client;
    } else if (const auto* d = std::get_if<ClientMultiplierDelta>(&reply)) {
      sender = d->client;
    } else {
      failure = failure ? failure
                        : std::make_exception_ptr(TransportError("roundtrip: client sent a server-only message"));
      continue;
    }
    if (sender != i + 1 && !failure)
      failure = std::make_exception_ptr(TransportError("roundtrip: reply from client " + std::to_string(sender) +
                                                       " arrived in slot " + std::to_string(i + 1)));
    rec.reports += 1;
    rec.scalars += scalar_volume(reply);
    rec.bytes += serialize(reply).size();
    out.push_back(reply);
  }
  if (!failure && !terminate && out.size() != n)
    failure = std::make_exception_ptr(TransportError("roundtrip: missing client replies"));

  if (!failure) {
    const auto processed = clients_.front()->messages_processed();
    for (auto* c : clients_)
      if (c->messages_processed() != processed)
        failure = std::make_exception_ptr(TransportError("roundtrip: clients out of step"));
  }

  rec.aborted = static_cast<bool>(failure);
  ledger_.record(rec);
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace fedal
