#include "mstack/netsim.hpp"

#include <algorithm>

namespace mstack {

Network::Network(std::uint64_t seed) : seeds_(seed) {}

void Network::add_channel(const ChannelConfig& config) {
  Channel ch;
  ch.config = config;
  ch.rng = seeds_.stream("net/loss/" + config.name);
  channels_[config.name] = std::move(ch);
}

bool Network::has_channel(const std::string& name) const {
  return channels_.count(name) > 0;
}

const ChannelConfig& Network::channel_config(const std::string& name) const {
  auto it = channels_.find(name);
  if (it == channels_.end()) {
    throw UnknownChannel("channel '" + name + "' not registered");
  }
  return it->second.config;
}

void Network::expose_topic(const std::string& node, const std::string& topic,
                           const std::string& channel) {
  if (!has_channel(channel)) {
    throw UnknownChannel("channel '" + channel + "' not registered");
  }
  auto it = topics_.find(topic);
  if (it == topics_.end()) {
    topics_[topic] = TopicRecord{node, channel, {}};
  } else {
    it->second.origin = node;
    it->second.channel = channel;
  }
}

void Network::subscribe(const std::string& node, const std::string& topic,
                        Handler handler) {
  topics_[topic].subscribers.emplace_back(node, std::move(handler));
}

PublishResult Network::publish(const std::string& node,
                               const std::string& topic,
                               std::vector<std::uint8_t> payload) {
  auto it = topics_.find(topic);
  if (it == topics_.end() || it->second.channel.empty()) {
    throw UnknownTopic("topic '" + topic + "' is not exposed by any node");
  }
  TopicRecord& record = it->second;
  Channel& ch = channels_.at(record.channel);

  if (payload.size() > ch.config.mtu) {
    ++ch.stats.rejected_oversized;
    return PublishResult::kOversized;
  }
  if (ch.busy_until - now_ > 10.0) {
    ++ch.stats.rejected_backpressure;
    return PublishResult::kBackpressure;
  }
  if (record.subscribers.empty()) {
    ++ch.stats.no_subscriber;
    return PublishResult::kAccepted;
  }

  const double serialize_s =
      static_cast<double>(payload.size()) / ch.config.bandwidth;
  const double completion = std::max(now_, ch.busy_until) + serialize_s;
  ch.busy_until = completion;

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  Pending p;
  p.delivery_time = completion + ch.config.latency;
  p.sequence = sequence_++;
  p.lost = coin(ch.rng) < ch.config.loss_probability;
  p.channel = record.channel;
  p.message = TopicMessage{topic, node, std::move(payload), now_};
  p.receivers.reserve(record.subscribers.size());
  for (const auto& [sub_node, handler] : record.subscribers) {
    p.receivers.push_back(sub_node);
  }
  ++ch.stats.sent;
  ch.stats.bytes_sent += p.message.payload.size();
  pending_.push(std::move(p));
  return PublishResult::kAccepted;
}

std::vector<Delivery> Network::step(double dt) {
  now_ += dt;
  std::vector<Delivery> out;
  while (!pending_.empty() && pending_.top().delivery_time <= now_) {
    Pending p = pending_.top();
    pending_.pop();
    Channel& ch = channels_.at(p.channel);
    if (p.lost) {
      ++ch.stats.lost;
      continue;
    }
    ++ch.stats.delivered;
    const auto& subscribers = topics_.at(p.message.topic).subscribers;
    for (const std::string& receiver : p.receivers) {
      for (const auto& [sub_node, handler] : subscribers) {
        if (sub_node == receiver && handler) {
          handler(p.message);
        }
      }
      out.push_back(Delivery{receiver, p.message, p.delivery_time});
    }
  }
  return out;
}

const ChannelStats& Network::stats(const std::string& channel) const {
  auto it = channels_.find(channel);
  if (it == channels_.end()) {
    throw UnknownChannel("channel '" + channel + "' not registered");
  }
  return it->second.stats;
}

std::vector<std::string> Network::channel_names() const {
  std::vector<std::string> names;
  names.reserve(channels_.size());
  for (const auto& [name, ch] : channels_) {
    names.push_back(name);
  }
  return names;
}

}  // namespace mstack
