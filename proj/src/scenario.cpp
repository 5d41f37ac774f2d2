#include "stamp/scenario.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "stamp/control.hpp"

namespace stamp {

namespace {

using json = nlohmann::json;

Ipv6Addr addr_field(const json& j, const char* key) {
    auto a = Ipv6Addr::parse(j.at(key).get<std::string>());
    if (!a) throw std::invalid_argument(std::string(key) + ": bad IPv6 address");
    return *a;
}

LinkModel link_from_json(const json& j) {
    LinkModel link;
    if (j.contains("delay_uniform_ns")) {
        auto bounds = j.at("delay_uniform_ns");
        link.delay = DelaySpec::uniform(bounds.at(0).get<int64_t>(), bounds.at(1).get<int64_t>());
    } else {
        link.delay = DelaySpec::constant(j.value("delay_ns", 0LL));
    }
    link.loss_prob = j.value("loss", 0.0);
    link.allow_reorder = j.value("reorder", false);
    if (link.loss_prob < 0.0 || link.loss_prob > 1.0)
        throw std::invalid_argument("loss: must be within [0, 1]");
    return link;
}

}  // namespace

Result<Scenario> parse_scenario(const std::string& json_text) {
    try {
        json j = json::parse(json_text);
        Scenario sc;
        sc.seed = j.value("seed", 0ULL);
        sc.probes = j.at("probes").get<uint32_t>();
        if (sc.probes == 0) return Error{Errc::invalid_config, "probes: must be positive"};
        if (j.contains("interval_ns"))
            sc.interval_ns = j.at("interval_ns").get<int64_t>();
        else if (j.contains("interval_ms"))
            sc.interval_ns = j.at("interval_ms").get<int64_t>() * 1'000'000;
        if (sc.interval_ns <= 0) return Error{Errc::invalid_config, "interval: must be positive"};

        const json& snd = j.at("sender");
        const json& rfl = j.at("reflector");
        sc.sender_addr = addr_field(snd, "addr");
        sc.reflector_addr = addr_field(rfl, "addr");
        sc.sender_clock_offset_ns = snd.value("clock_offset_ns", 0LL);
        sc.reflector_clock_offset_ns = rfl.value("clock_offset_ns", 0LL);

        if (j.contains("direct_link")) sc.direct_link = link_from_json(j.at("direct_link"));
        if (j.contains("return_link")) sc.return_link = link_from_json(j.at("return_link"));

        auto addr_list = [](const json& arr) {
            std::vector<Ipv6Addr> out;
            for (const auto& item : arr) {
                auto a = Ipv6Addr::parse(item.get<std::string>());
                if (!a) throw std::invalid_argument("bad SID: " + item.get<std::string>());
                out.push_back(*a);
            }
            return out;
        };
        if (j.contains("direct_sids")) sc.direct_sids = addr_list(j.at("direct_sids"));
        if (j.contains("return_sids")) sc.return_sids = addr_list(j.at("return_sids"));
        if (sc.direct_sids.empty()) sc.direct_sids = {sc.reflector_addr};
        if (sc.return_sids.empty()) sc.return_sids = {sc.sender_addr};

        if (j.contains("session")) {
            const json& s = j.at("session");
            if (s.contains("ssid")) sc.params.ssid = s.at("ssid").get<uint16_t>();
            if (s.contains("delay_mode")) {
                auto m = delay_mode_from_string(s.at("delay_mode").get<std::string>());
                if (!m) return Error{Errc::invalid_config, "session.delay_mode: unknown value"};
                sc.params.delay_mode = *m;
            }
            if (s.contains("reflector_mode")) {
                auto m = reflector_mode_from_string(s.at("reflector_mode").get<std::string>());
                if (!m)
                    return Error{Errc::invalid_config, "session.reflector_mode: unknown value"};
                sc.params.reflector_mode = *m;
            }
            sc.params.sender_port = s.value("sender_port", kDefaultStampPort);
            sc.params.reflector_port = s.value("reflector_port", kDefaultStampPort);
        }
        sc.params.interval_ns = sc.interval_ns;
        return sc;
    } catch (const std::exception& e) {
        return Error{Errc::parse_error, e.what()};
    }
}

Result<Scenario> load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) return Error{Errc::io_error, "cannot open " + path};
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

Result<SimReport> run_scenario(const Scenario& sc) {
    SimNetwork net(sc.seed);
    auto& sender_ep = net.add_node("sender", sc.sender_addr, sc.sender_clock_offset_ns);
    auto& reflector_ep =
        net.add_node("reflector", sc.reflector_addr, sc.reflector_clock_offset_ns);
    if (auto st = net.add_link(sc.sender_addr, sc.reflector_addr, sc.direct_link, sc.return_link);
        !st)
        return st.error();

    SenderNode sender(sender_ep);
    ReflectorNode reflector(reflector_ep);
    SenderControl sender_ctl(sender);
    ReflectorControl reflector_ctl(reflector);
    LocalControlChannel sender_chan(sender_ctl);
    LocalControlChannel reflector_chan(reflector_ctl);

    Controller controller(sender_chan, reflector_chan,
                          NodeGlobalConfig{sc.params.sender_port, "sim0", sc.sender_addr},
                          NodeGlobalConfig{sc.params.reflector_port, "sim0", sc.reflector_addr});

    auto ssid = controller.create_measured_path(sc.direct_sids, sc.return_sids, sc.params);
    if (!ssid) return ssid.error();
    if (auto st = controller.start_session(ssid.value(),
                                           static_cast<int64_t>(sc.probes) * sc.interval_ns);
        !st)
        return st.error();

    SimReport report;
    report.ssid = ssid.value();
    report.events = net.run_until_idle();

    auto records = controller.poll_once(ssid.value());
    if (!records) return records.error();
    report.series = DelaySeries(sc.params.delay_mode);
    for (const auto& rec : records.value()) report.series.add(rec);

    report.probes_sent = sender.tx_count();
    report.records = records.value().size();
    report.losses = net.loss_count();
    report.simulated_ns = net.now_ns();
    auto processed = controller.processed_count(true, ssid.value());
    report.reflector_processed = processed ? processed.value() : 0;

    (void)controller.stop_session(ssid.value());
    (void)controller.destroy_session(ssid.value());
    return report;
}

}  // namespace stamp
