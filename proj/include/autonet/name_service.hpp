#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autonet/routing.hpp"

namespace autonet {

struct DnsConfig {
  std::size_t replication = 2;
  TimeUs cache_ttl = 1 * kSecond;
  /// Soft-state re-registration period.
  TimeUs refresh = 5 * kSecond;
  /// Replicas drop a record this long after its last write.
  TimeUs record_lifetime = 15 * kSecond;
};

/// Name -> address binding held by replica nodes.
struct DhtRecord {
  std::string name;
  NodeId address;
  std::uint64_t version = 0;
  NodeId origin;
  TimeUs expiry = 0;
};

/// True when `a` replaces `b`: higher version, or equal version and larger origin id.
bool supersedes(const DhtRecord& a, const DhtRecord& b);

/// Dot-separated LDH labels ending in ".kira.internal", e.g. "rlagent.kira.internal".
bool valid_dns_name(std::string_view name);

/// The `replication` ids nearest to derive_node_id(name) under XOR, nearest first.
std::vector<NodeId> replicas_for(std::string_view name, std::span<const NodeId> live, std::size_t replication = 2);

enum class UpdateStatus { Ack, UpdateFailed, InvalidName };
enum class QueryStatus { Found, NotFound, ResolutionTimeout, InvalidName };

std::string_view to_string(UpdateStatus status);
std::string_view to_string(QueryStatus status);

struct UpdateResult {
  UpdateStatus status = UpdateStatus::UpdateFailed;
  std::uint64_t version = 0;
  std::vector<NodeId> replicas;
  TimeUs latency = 0;
};

struct QueryResult {
  QueryStatus status = QueryStatus::ResolutionTimeout;
  NodeId address;
  std::uint64_t version = 0;
  TimeUs latency = 0;
  bool from_cache = false;
};

struct DnsRequest {
  enum class Kind { Update, Query };
  Kind kind = Kind::Query;
  std::string name;
  NodeId address;  // Update only
};

struct DnsResponse {
  enum class Code { Ok, NotFound, UpdateFailed, ResolutionTimeout, BadName };
  Code code = Code::Ok;
  NodeId address;
  bool cached = false;
  TimeUs latency = 0;
};

class NameService;

/// Per-node DNS server: turns local requests into DHT puts/gets and caches
/// positive answers for cache_ttl.
class LocalDnsFrontend {
 public:
  LocalDnsFrontend(NameService& service, NodeIndex node) : service_(service), node_(node) {}

  void handle(const DnsRequest& request, std::function<void(const DnsResponse&)> done);
  /// Runs the simulator until the response is available.
  DnsResponse handle_blocking(const DnsRequest& request);

  std::size_t cache_size() const { return cache_.size(); }

 private:
  struct CacheEntry {
    NodeId address;
    TimeUs expires;
  };
  NameService& service_;
  NodeIndex node_;
  std::map<std::string, CacheEntry, std::less<>> cache_;
};

/// DHT-backed name service running on every router. Requests are routed to
/// the replica set computed from the origin's routing view; senders retry
/// once per repair window and give up after three windows.
class NameService {
 public:
  using UpdateCallback = std::function<void(const UpdateResult&)>;
  using QueryCallback = std::function<void(const QueryResult&)>;

  explicit NameService(Router& router, DnsConfig config = {});

  NameService(const NameService&) = delete;
  NameService& operator=(const NameService&) = delete;

  Router& router() { return router_; }
  const DnsConfig& config() const { return config_; }

  /// Publishes name -> address with the next version for (origin, name).
  /// `done` fires on the first replica ack or on failure.
  void update(NodeIndex origin, std::string_view name, NodeId address, UpdateCallback done);
  void query(NodeIndex origin, std::string_view name, QueryCallback done);

  UpdateResult dns_update(NodeIndex origin, std::string_view name, NodeId address);
  QueryResult dns_query(NodeIndex origin, std::string_view name);

  LocalDnsFrontend& frontend(NodeIndex node);

  /// Starts periodic re-publication of every registration made through update().
  void start_refresh();

  /// Unexpired record stored at `node`, if any.
  const DhtRecord* stored(NodeIndex node, std::string_view name) const;
  std::vector<NodeIndex> holders(std::string_view name) const;

 private:
  struct PendingUpdate;
  struct PendingQuery;

  void publish(NodeIndex origin, const DhtRecord& record, UpdateCallback done);
  void on_packet(NodeIndex at, const Packet& packet);
  void update_attempt(std::uint32_t request, int attempt);
  void query_attempt(std::uint32_t request, int attempt);
  void finish_query(std::uint32_t request);
  void refresh_tick();
  void log(std::string_view op, std::string_view name, const std::string& result);

  Router& router_;
  DnsConfig config_;
  std::uint32_t next_request_ = 1;
  std::vector<std::map<std::string, DhtRecord, std::less<>>> stores_;
  std::map<std::pair<NodeIndex, std::string>, std::uint64_t> versions_;
  std::map<std::pair<NodeIndex, std::string>, DhtRecord> registrations_;
  std::map<std::uint32_t, std::shared_ptr<PendingUpdate>> updates_;
  std::map<std::uint32_t, std::shared_ptr<PendingQuery>> queries_;
  std::map<NodeIndex, std::unique_ptr<LocalDnsFrontend>> frontends_;
  bool refreshing_ = false;
};

}  // namespace autonet
