#include "stamp/sim_network.hpp"

#include <algorithm>

namespace stamp {

int64_t SimEndpoint::NodeClock::now_unix_ns() { return net->now_unix_ns() + offset_ns; }

Status SimEndpoint::send(ByteView datagram) {
    ++sent_;
    return net_->route(*this, datagram);
}

Status SimEndpoint::register_filter(const FilterSpec& filter, DatagramHandler handler) {
    filters_.emplace_back(filter, std::move(handler));
    return Status{};
}

void SimEndpoint::unregister_filters() { filters_.clear(); }

uint64_t SimEndpoint::schedule_after(int64_t delay_ns, std::function<void()> fn) {
    int64_t at = net_->now_ns_ + std::max<int64_t>(delay_ns, 0);
    uint32_t node = index_;
    SimNetwork* net = net_;
    return net_->schedule(at, [net, node, fn = std::move(fn)]() {
        net->trace_.push_back({net->now_ns_, 't', node, 0});
        fn();
    });
}

void SimEndpoint::cancel(uint64_t token) { net_->cancelled_.insert(token); }

void SimEndpoint::deliver(ByteView datagram) {
    if (service_.capacity_pps <= 0.0) {
        handle(datagram);
        return;
    }
    if (service_backlog_ >= service_.queue_depth) {
        ++service_dropped_;
        if (auto port = peek_udp_dst_port(datagram)) ++service_dropped_by_port_[*port];
        return;
    }
    int64_t service_ns = static_cast<int64_t>(1e9 / service_.capacity_pps);
    service_free_at_ns_ = std::max(service_free_at_ns_, net_->now_ns_) + service_ns;
    ++service_backlog_;
    Bytes copy(datagram.begin(), datagram.end());
    net_->schedule(service_free_at_ns_, [this, copy = std::move(copy)]() {
        --service_backlog_;
        handle(copy);
    });
}

void SimEndpoint::handle(ByteView datagram) {
    for (auto& [filter, handler] : filters_) {
        if (filter.matches(datagram)) {
            ++matched_;
            handler(datagram);
            return;
        }
    }
    ++unmatched_;
    if (sink_) sink_(datagram);
}

uint64_t SimEndpoint::service_dropped_port(uint16_t udp_dst_port) const {
    auto it = service_dropped_by_port_.find(udp_dst_port);
    return it == service_dropped_by_port_.end() ? 0 : it->second;
}

SimNetwork::SimNetwork(uint64_t seed, int64_t epoch_unix_ns)
    : epoch_ns_(epoch_unix_ns), rng_(seed) {}

SimEndpoint& SimNetwork::add_node(const std::string& name, const Ipv6Addr& addr,
                                  int64_t clock_offset_ns) {
    auto ep = std::make_unique<SimEndpoint>();
    ep->net_ = this;
    ep->index_ = static_cast<uint32_t>(nodes_.size());
    ep->name_ = name;
    ep->addr_ = addr;
    ep->clock_.net = this;
    ep->clock_.offset_ns = clock_offset_ns;
    nodes_.push_back(std::move(ep));
    return *nodes_.back();
}

Status SimNetwork::add_link(const Ipv6Addr& a, const Ipv6Addr& b, LinkModel a_to_b,
                            LinkModel b_to_a) {
    SimEndpoint* na = find(a);
    SimEndpoint* nb = find(b);
    if (!na || !nb) return Error{Errc::unroutable, "link endpoint not a node"};
    links_[{na->index_, nb->index_}] = LinkState{a_to_b};
    links_[{nb->index_, na->index_}] = LinkState{b_to_a};
    return Status{};
}

SimEndpoint* SimNetwork::find(const Ipv6Addr& addr) {
    for (auto& n : nodes_)
        if (n->addr_ == addr) return n.get();
    return nullptr;
}

uint64_t SimNetwork::schedule(int64_t at_ns, std::function<void()> fn) {
    uint64_t seq = next_seq_++;
    queue_.push(Event{at_ns, seq, std::move(fn)});
    return seq;
}

Status SimNetwork::route(SimEndpoint& from, ByteView datagram) {
    auto dst = peek_final_destination(datagram);
    if (!dst) {
        ++unroutable_;
        return Error{Errc::unroutable, "cannot read destination"};
    }
    SimEndpoint* to = find(*dst);
    if (!to) {
        ++unroutable_;
        return Error{Errc::unroutable, "no node with address " + dst->str()};
    }
    auto it = links_.find({from.index_, to->index_});
    if (it == links_.end()) {
        ++unroutable_;
        return Error{Errc::unroutable, "no link " + from.name_ + " -> " + to->name_};
    }
    LinkState& link = it->second;
    ++link.sent;
    trace_.push_back({now_ns_, 's', from.index_, static_cast<uint32_t>(datagram.size())});

    if (link.model.loss_prob > 0.0 &&
        std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < link.model.loss_prob) {
        ++link.lost;
        ++losses_;
        trace_.push_back({now_ns_, 'x', from.index_, static_cast<uint32_t>(datagram.size())});
        return Status{};
    }

    int64_t deliver_at = now_ns_ + std::max<int64_t>(link.model.delay.sample(rng_), 0);
    if (!link.model.allow_reorder)
        deliver_at = std::max(deliver_at, link.last_delivery_ns);
    link.last_delivery_ns = deliver_at;

    Bytes copy(datagram.begin(), datagram.end());
    uint32_t to_idx = to->index_;
    schedule(deliver_at, [this, to_idx, copy = std::move(copy)]() {
        trace_.push_back({now_ns_, 'd', to_idx, static_cast<uint32_t>(copy.size())});
        nodes_[to_idx]->deliver(copy);
    });
    return Status{};
}

uint64_t SimNetwork::run_until_idle() {
    uint64_t executed = 0;
    while (!queue_.empty()) {
        Event ev = queue_.top();
        queue_.pop();
        now_ns_ = std::max(now_ns_, ev.at_ns);
        if (auto it = cancelled_.find(ev.seq); it != cancelled_.end()) {
            cancelled_.erase(it);
            continue;
        }
        ev.fn();
        ++executed;
    }
    return executed;
}

}  // namespace stamp
