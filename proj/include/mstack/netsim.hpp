#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "mstack/errors.hpp"
#include "mstack/rng.hpp"

namespace mstack {

// Bandwidth-limited, lossy, delayed broadcast channel. Serialization is a
// fluid token drain: messages complete when their bytes are spent at the
// channel rate, strictly FIFO.
struct ChannelConfig {
  std::string name;
  double bandwidth{1e6};        // bytes/s
  double latency{0.0};          // s
  double loss_probability{0.0}; // per message
  std::size_t mtu{1024};        // bytes, no fragmentation

  // RFM69HCW-class telemetry link: 100 B/s.
  static ChannelConfig lowband(std::string name = "lowband") {
    return {std::move(name), 100.0, 0.1, 0.05, 1024};
  }
  // Mobilicom-class data link: 1 MB/s.
  static ChannelConfig highband(std::string name = "highband") {
    return {std::move(name), 1e6, 0.02, 0.01, 65536};
  }
};

struct TopicMessage {
  std::string topic;
  std::string origin;
  std::vector<std::uint8_t> payload;
  double enqueue_time{0.0};
};

struct Delivery {
  std::string node;  // receiving subscriber
  TopicMessage message;
  double delivery_time{0.0};
};

enum class PublishResult { kAccepted, kOversized, kBackpressure };

struct ChannelStats {
  std::uint64_t sent{0};       // accepted into the serializer queue
  std::uint64_t delivered{0};
  std::uint64_t lost{0};
  std::uint64_t rejected_oversized{0};
  std::uint64_t rejected_backpressure{0};
  std::uint64_t no_subscriber{0};
  std::uint64_t bytes_sent{0};

  std::uint64_t in_flight() const { return sent - delivered - lost; }
};

// Deterministic simulated multi-master pub/sub between UAV nodes and a ground
// station. Stepped only by the global simulation loop.
class Network {
 public:
  using Handler = std::function<void(const TopicMessage&)>;

  explicit Network(std::uint64_t seed);

  void add_channel(const ChannelConfig& config);
  bool has_channel(const std::string& name) const;
  const ChannelConfig& channel_config(const std::string& name) const;

  // Makes `topic` published by `node` eligible for delivery via `channel`.
  // Throws UnknownChannel.
  void expose_topic(const std::string& node, const std::string& topic,
                    const std::string& channel);

  // Registers a subscriber; handler may be empty (deliveries are still
  // returned from step()). No replay of messages published earlier.
  void subscribe(const std::string& node, const std::string& topic,
                 Handler handler = {});

  // Enqueues payload for all current subscribers. Throws UnknownTopic if the
  // topic was never exposed.
  PublishResult publish(const std::string& node, const std::string& topic,
                        std::vector<std::uint8_t> payload);

  // Advances time and releases every message whose serialization and latency
  // have elapsed, FIFO per (channel, origin). Lost messages are dropped here
  // by their pre-drawn Bernoulli coin.
  std::vector<Delivery> step(double dt);

  double now() const { return now_; }
  const ChannelStats& stats(const std::string& channel) const;
  std::vector<std::string> channel_names() const;

 private:
  struct Channel {
    ChannelConfig config;
    double busy_until{0.0};  // serializer drains until here
    ChannelStats stats;
    std::mt19937_64 rng;
  };

  struct TopicRecord {
    std::string origin;
    std::string channel;
    std::vector<std::pair<std::string, Handler>> subscribers;
  };

  struct Pending {
    double delivery_time;
    std::uint64_t sequence;
    bool lost;
    std::string channel;
    TopicMessage message;
    std::vector<std::string> receivers;  // snapshot at publish
  };

  struct PendingOrder {
    bool operator()(const Pending& a, const Pending& b) const {
      if (a.delivery_time != b.delivery_time) {
        return a.delivery_time > b.delivery_time;
      }
      return a.sequence > b.sequence;
    }
  };

  SeedTree seeds_;
  double now_{0.0};
  std::uint64_t sequence_{0};
  std::map<std::string, Channel> channels_;
  std::map<std::string, TopicRecord> topics_;
  std::priority_queue<Pending, std::vector<Pending>, PendingOrder> pending_;
};

}  // namespace mstack
