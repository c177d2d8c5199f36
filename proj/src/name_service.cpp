#include "autonet/name_service.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

#include "autonet/wire.hpp"

namespace autonet {

namespace {

enum class DnsMsg : std::uint8_t { Put = 1, PutAck = 2, Get = 3, GetReply = 4 };

constexpr std::string_view kSuffix = ".kira.internal";
constexpr int kAttempts = 3;

bool valid_label(std::string_view label) {
  if (label.empty() || label.size() > 63) return false;
  if (label.front() == '-' || label.back() == '-') return false;
  return std::all_of(label.begin(), label.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
  });
}

void write_record(ByteWriter& w, const DhtRecord& r) {
  w.str8(r.name);
  w.id(r.address);
  w.u64(r.version);
  w.id(r.origin);
}

DhtRecord read_record(ByteReader& r) {
  DhtRecord rec;
  rec.name = r.str8();
  rec.address = r.id();
  rec.version = r.u64();
  rec.origin = r.id();
  return rec;
}

}  // namespace

bool supersedes(const DhtRecord& a, const DhtRecord& b) {
  return std::tie(a.version, a.origin) > std::tie(b.version, b.origin);
}

bool valid_dns_name(std::string_view name) {
  if (name.size() > 253 || name.size() <= kSuffix.size() || !name.ends_with(kSuffix)) return false;
  std::size_t pos = 0;
  while (pos <= name.size()) {
    std::size_t dot = name.find('.', pos);
    if (dot == std::string_view::npos) dot = name.size();
    if (!valid_label(name.substr(pos, dot - pos))) return false;
    pos = dot + 1;
  }
  return true;
}

std::vector<NodeId> replicas_for(std::string_view name, std::span<const NodeId> live, std::size_t replication) {
  NodeId key = derive_node_id(name);
  std::vector<NodeId> ranked(live.begin(), live.end());
  std::sort(ranked.begin(), ranked.end(),
            [&](NodeId a, NodeId b) { return xor_distance(a, key) < xor_distance(b, key); });
  ranked.erase(std::unique(ranked.begin(), ranked.end()), ranked.end());
  if (ranked.size() > replication) ranked.resize(replication);
  return ranked;
}

std::string_view to_string(UpdateStatus status) {
  switch (status) {
    case UpdateStatus::Ack: return "ack";
    case UpdateStatus::UpdateFailed: return "update-failed";
    case UpdateStatus::InvalidName: return "invalid-name";
  }
  return "update-failed";
}

std::string_view to_string(QueryStatus status) {
  switch (status) {
    case QueryStatus::Found: return "found";
    case QueryStatus::NotFound: return "not-found";
    case QueryStatus::ResolutionTimeout: return "resolution-timeout";
    case QueryStatus::InvalidName: return "invalid-name";
  }
  return "resolution-timeout";
}

struct NameService::PendingUpdate {
  NodeIndex origin;
  DhtRecord record;
  std::vector<NodeId> replicas;
  std::vector<bool> acked;
  bool reported = false;
  TimeUs started = 0;
  UpdateCallback done;
};

struct NameService::PendingQuery {
  NodeIndex origin;
  std::string name;
  std::vector<NodeId> replicas;
  std::vector<bool> replied;
  std::optional<DhtRecord> best;
  bool any_reply = false;
  TimeUs started = 0;
  QueryCallback done;
};

NameService::NameService(Router& router, DnsConfig config)
    : router_(router), config_(config), stores_(router.net().topology().node_count()) {
  router_.set_handler(Port::Dns, [this](NodeIndex at, const Packet& packet) { on_packet(at, packet); });
}

void NameService::log(std::string_view op, std::string_view name, const std::string& result) {
  if (auto* log = router_.net().log()) log->info(router_.net().now(), "DNS", {op, name, result});
}

void NameService::update(NodeIndex origin, std::string_view name, NodeId address, UpdateCallback done) {
  if (!valid_dns_name(name)) {
    log("update", name, "invalid-name");
    if (done) done(UpdateResult{UpdateStatus::InvalidName, 0, {}, 0});
    return;
  }
  auto key = std::make_pair(origin, std::string(name));
  DhtRecord record{std::string(name), address, ++versions_[key], router_.id(origin), 0};
  registrations_[key] = record;
  publish(origin, record, std::move(done));
}

void NameService::publish(NodeIndex origin, const DhtRecord& record, UpdateCallback done) {
  auto state = std::make_shared<PendingUpdate>();
  state->origin = origin;
  state->record = record;
  state->replicas = replicas_for(record.name, router_.table(origin).known_ids(), config_.replication);
  state->acked.assign(state->replicas.size(), false);
  state->started = router_.net().now();
  state->done = std::move(done);
  std::uint32_t request = next_request_++;
  updates_[request] = state;
  update_attempt(request, 0);
}

void NameService::update_attempt(std::uint32_t request, int attempt) {
  auto it = updates_.find(request);
  if (it == updates_.end()) return;
  auto state = it->second;
  if (attempt >= kAttempts) {
    updates_.erase(it);
    if (!state->reported) {
      log("update", state->record.name, "update-failed");
      if (state->done) state->done(UpdateResult{UpdateStatus::UpdateFailed, state->record.version, state->replicas,
                                                router_.net().now() - state->started});
    }
    return;
  }
  for (std::size_t i = 0; i < state->replicas.size(); ++i) {
    if (state->acked[i]) continue;
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(DnsMsg::Put));
    w.u32(request);
    write_record(w, state->record);
    router_.send(state->origin, state->replicas[i], Port::Dns, w.take());
  }
  router_.net().sim().schedule_in(router_.config().repair_window, EventKind::Timer, "dns-update-timeout",
                                  [this, request, attempt] { update_attempt(request, attempt + 1); });
}

void NameService::query(NodeIndex origin, std::string_view name, QueryCallback done) {
  if (!valid_dns_name(name)) {
    log("query", name, "invalid-name");
    if (done) done(QueryResult{QueryStatus::InvalidName, {}, 0, 0, false});
    return;
  }
  auto state = std::make_shared<PendingQuery>();
  state->origin = origin;
  state->name = std::string(name);
  state->replicas = replicas_for(name, router_.table(origin).known_ids(), config_.replication);
  state->replied.assign(state->replicas.size(), false);
  state->started = router_.net().now();
  state->done = std::move(done);
  std::uint32_t request = next_request_++;
  queries_[request] = state;
  query_attempt(request, 0);
}

void NameService::query_attempt(std::uint32_t request, int attempt) {
  auto it = queries_.find(request);
  if (it == queries_.end()) return;
  if (attempt >= kAttempts) {
    finish_query(request);
    return;
  }
  auto state = it->second;
  for (std::size_t i = 0; i < state->replicas.size(); ++i) {
    if (state->replied[i]) continue;
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(DnsMsg::Get));
    w.u32(request);
    w.str8(state->name);
    router_.send(state->origin, state->replicas[i], Port::Dns, w.take());
  }
  router_.net().sim().schedule_in(router_.config().repair_window, EventKind::Timer, "dns-query-timeout",
                                  [this, request, attempt] { query_attempt(request, attempt + 1); });
}

void NameService::finish_query(std::uint32_t request) {
  auto it = queries_.find(request);
  if (it == queries_.end()) return;
  auto state = it->second;
  queries_.erase(it);
  QueryResult result;
  result.latency = router_.net().now() - state->started;
  if (state->best) {
    result.status = QueryStatus::Found;
    result.address = state->best->address;
    result.version = state->best->version;
    log("query", state->name, "found " + result.address.ipv6() + " v" + std::to_string(result.version));
  } else {
    result.status = state->any_reply ? QueryStatus::NotFound : QueryStatus::ResolutionTimeout;
    log("query", state->name, std::string(to_string(result.status)));
  }
  if (state->done) state->done(result);
}

void NameService::on_packet(NodeIndex at, const Packet& packet) {
  ByteReader r(packet.data);
  auto type = static_cast<DnsMsg>(r.u8());
  std::uint32_t request = r.u32();
  TimeUs now = router_.net().now();

  switch (type) {
    case DnsMsg::Put: {
      DhtRecord incoming = read_record(r);
      incoming.expiry = now + config_.record_lifetime;
      auto& store = stores_[at];
      auto existing = store.find(incoming.name);
      if (existing == store.end() || existing->second.expiry <= now || !supersedes(existing->second, incoming)) {
        store[incoming.name] = incoming;
      }
      ByteWriter w;
      w.u8(static_cast<std::uint8_t>(DnsMsg::PutAck));
      w.u32(request);
      router_.send(at, packet.src, Port::Dns, w.take());
      break;
    }
    case DnsMsg::PutAck: {
      auto it = updates_.find(request);
      if (it == updates_.end()) return;
      auto state = it->second;
      for (std::size_t i = 0; i < state->replicas.size(); ++i)
        if (state->replicas[i] == packet.src) state->acked[i] = true;
      if (!state->reported) {
        state->reported = true;
        log("update", state->record.name,
            "ack v" + std::to_string(state->record.version) + " " + state->record.address.ipv6());
        if (state->done) state->done(UpdateResult{UpdateStatus::Ack, state->record.version, state->replicas,
                                                  now - state->started});
      }
      if (std::all_of(state->acked.begin(), state->acked.end(), [](bool b) { return b; })) updates_.erase(request);
      break;
    }
    case DnsMsg::Get: {
      std::string name = r.str8();
      ByteWriter w;
      w.u8(static_cast<std::uint8_t>(DnsMsg::GetReply));
      w.u32(request);
      const DhtRecord* rec = stored(at, name);
      w.u8(rec != nullptr ? 1 : 0);
      if (rec != nullptr) write_record(w, *rec);
      router_.send(at, packet.src, Port::Dns, w.take());
      break;
    }
    case DnsMsg::GetReply: {
      auto it = queries_.find(request);
      if (it == queries_.end()) return;
      auto state = it->second;
      bool found = r.u8() != 0;
      for (std::size_t i = 0; i < state->replicas.size(); ++i)
        if (state->replicas[i] == packet.src) state->replied[i] = true;
      state->any_reply = true;
      if (found) {
        DhtRecord rec = read_record(r);
        if (!state->best || supersedes(rec, *state->best)) state->best = rec;
      }
      if (std::all_of(state->replied.begin(), state->replied.end(), [](bool b) { return b; })) finish_query(request);
      break;
    }
  }
}

const DhtRecord* NameService::stored(NodeIndex node, std::string_view name) const {
  const auto& store = stores_.at(node);
  auto it = store.find(name);
  if (it == store.end() || it->second.expiry <= router_.net().now()) return nullptr;
  return &it->second;
}

std::vector<NodeIndex> NameService::holders(std::string_view name) const {
  std::vector<NodeIndex> out;
  for (NodeIndex i = 0; i < stores_.size(); ++i)
    if (stored(i, name) != nullptr) out.push_back(i);
  return out;
}

UpdateResult NameService::dns_update(NodeIndex origin, std::string_view name, NodeId address) {
  std::optional<UpdateResult> result;
  update(origin, name, address, [&](const UpdateResult& r) { result = r; });
  router_.net().sim().run_while_pending([&] { return result.has_value(); }, std::numeric_limits<TimeUs>::max());
  return result.value_or(UpdateResult{});
}

QueryResult NameService::dns_query(NodeIndex origin, std::string_view name) {
  std::optional<QueryResult> result;
  query(origin, name, [&](const QueryResult& r) { result = r; });
  router_.net().sim().run_while_pending([&] { return result.has_value(); }, std::numeric_limits<TimeUs>::max());
  return result.value_or(QueryResult{});
}

void NameService::start_refresh() {
  if (refreshing_) return;
  refreshing_ = true;
  router_.net().sim().schedule_in(config_.refresh, EventKind::Timer, "dns-refresh", [this] { refresh_tick(); });
}

void NameService::refresh_tick() {
  for (const auto& [key, record] : registrations_) publish(key.first, record, {});
  router_.net().sim().schedule_in(config_.refresh, EventKind::Timer, "dns-refresh", [this] { refresh_tick(); });
}

LocalDnsFrontend& NameService::frontend(NodeIndex node) {
  auto& slot = frontends_[node];
  if (!slot) slot = std::make_unique<LocalDnsFrontend>(*this, node);
  return *slot;
}

void LocalDnsFrontend::handle(const DnsRequest& request, std::function<void(const DnsResponse&)> done) {
  if (!valid_dns_name(request.name)) {
    done(DnsResponse{DnsResponse::Code::BadName, {}, false, 0});
    return;
  }
  TimeUs now = service_.router().net().now();
  if (request.kind == DnsRequest::Kind::Update) {
    cache_.erase(request.name);
    service_.update(node_, request.name, request.address, [done](const UpdateResult& r) {
      done(DnsResponse{r.status == UpdateStatus::Ack ? DnsResponse::Code::Ok : DnsResponse::Code::UpdateFailed, {},
                       false, r.latency});
    });
    return;
  }
  if (auto it = cache_.find(request.name); it != cache_.end()) {
    if (it->second.expires > now) {
      done(DnsResponse{DnsResponse::Code::Ok, it->second.address, true, 0});
      return;
    }
    cache_.erase(it);
  }
  service_.query(node_, request.name, [this, name = request.name, done](const QueryResult& r) {
    DnsResponse response;
    response.latency = r.latency;
    switch (r.status) {
      case QueryStatus::Found:
        response.code = DnsResponse::Code::Ok;
        response.address = r.address;
        cache_[name] = CacheEntry{r.address, service_.router().net().now() + service_.config().cache_ttl};
        break;
      case QueryStatus::NotFound: response.code = DnsResponse::Code::NotFound; break;
      case QueryStatus::ResolutionTimeout: response.code = DnsResponse::Code::ResolutionTimeout; break;
      case QueryStatus::InvalidName: response.code = DnsResponse::Code::BadName; break;
    }
    done(response);
  });
}

DnsResponse LocalDnsFrontend::handle_blocking(const DnsRequest& request) {
  std::optional<DnsResponse> response;
  handle(request, [&](const DnsResponse& r) { response = r; });
  service_.router().net().sim().run_while_pending([&] { return response.has_value(); },
                                                  std::numeric_limits<TimeUs>::max());
  return response.value_or(DnsResponse{DnsResponse::Code::ResolutionTimeout, {}, false, 0});
}

}  // namespace autonet
