// stampd: STAMP Session-Sender / Session-Reflector daemon.
//
// Serves the southbound control API over TCP and moves test packets over
// UDP/IPv6. One process per role:
//
//   stampd sender    --config sender.json
//   stampd reflector --config reflector.json

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <semaphore>
#include <sstream>

#include "CLI11.hpp"
#include "cli_util.hpp"
#include "json.hpp"
#include "stamp/control_tcp.hpp"
#include "stamp/udp_transport.hpp"

using namespace stamp;

namespace {

std::binary_semaphore g_shutdown{0};

void handle_signal(int) { g_shutdown.release(); }

struct DaemonConfig {
    std::string control_bind = "::1";
    uint16_t control_port = kDefaultControlPort;
    NodeGlobalConfig global{kDefaultStampPort, "lo", Ipv6Addr::must_parse("::1")};
    std::string udp_bind = "::";
    bool raw_srh_mode = false;
    bool auto_init = true;
    std::vector<SessionSpec> sessions;
    std::vector<bool> autostart;
};

Result<DaemonConfig> load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) return Error{Errc::io_error, "cannot open " + path};
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        nlohmann::json j = nlohmann::json::parse(buf.str());
        DaemonConfig cfg;
        cfg.control_bind = j.value("control_bind", cfg.control_bind);
        cfg.control_port = j.value("control_port", cfg.control_port);
        cfg.global.stamp_udp_port = j.value("stamp_udp_port", cfg.global.stamp_udp_port);
        cfg.global.bind_interface = j.value("interface", cfg.global.bind_interface);
        if (j.contains("src_ipv6")) {
            auto a = Ipv6Addr::parse(j.at("src_ipv6").get<std::string>());
            if (!a) return Error{Errc::invalid_config, "src_ipv6: bad IPv6 address"};
            cfg.global.src_ipv6 = *a;
        }
        cfg.udp_bind = j.value("udp_bind", cfg.udp_bind);
        cfg.raw_srh_mode = j.value("raw_srh_mode", false);
        cfg.auto_init = j.value("auto_init", true);
        if (j.contains("sessions")) {
            for (const auto& item : j.at("sessions")) {
                // Reuse the control-schema decoder for the session shape.
                nlohmann::ordered_json req;
                req["id"] = 0;
                req["op"] = "CreateStampSession";
                req["body"] = {{"session", item.contains("session") ? item.at("session") : item}};
                std::string text = req.dump();
                auto decoded = decode_request(ByteView(
                    reinterpret_cast<const uint8_t*>(text.data()), text.size()));
                if (!decoded)
                    return Error{Errc::invalid_config,
                                 "sessions: " + decoded.error().message};
                cfg.sessions.push_back(decoded.value().session);
                cfg.autostart.push_back(item.value("autostart", true));
            }
        }
        return cfg;
    } catch (const std::exception& e) {
        return Error{Errc::parse_error, std::string("config: ") + e.what()};
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"STAMP session daemon"};
    app.require_subcommand(1);
    std::string config_path;
    std::string control_bind_flag, src_flag, udp_bind_flag;
    int control_port_flag = -1, stamp_port_flag = -1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "daemon config file (JSON)");
        sub->add_option("--control-bind", control_bind_flag, "control bind address");
        sub->add_option("--control-port", control_port_flag, "control TCP port");
        sub->add_option("--stamp-port", stamp_port_flag, "STAMP UDP port");
        sub->add_option("--src", src_flag, "node source IPv6 address");
        sub->add_option("--udp-bind", udp_bind_flag, "UDP bind address");
    };
    CLI::App* sender_cmd = app.add_subcommand("sender", "run a Session-Sender node");
    CLI::App* reflector_cmd = app.add_subcommand("reflector", "run a Session-Reflector node");
    add_common(sender_cmd);
    add_common(reflector_cmd);

    CLI11_PARSE(app, argc, argv);
    bool is_sender = sender_cmd->parsed();

    DaemonConfig cfg;
    if (!config_path.empty()) {
        auto loaded = load_config(config_path);
        if (!loaded) return cli::fail(cli::kUsageError, loaded.error());
        cfg = std::move(loaded.value());
    }
    // Flags override the file; environment overrides both for bind/port.
    if (!control_bind_flag.empty()) cfg.control_bind = control_bind_flag;
    if (control_port_flag >= 0) cfg.control_port = static_cast<uint16_t>(control_port_flag);
    if (stamp_port_flag >= 0) cfg.global.stamp_udp_port = static_cast<uint16_t>(stamp_port_flag);
    if (!udp_bind_flag.empty()) cfg.udp_bind = udp_bind_flag;
    if (!src_flag.empty()) {
        auto a = Ipv6Addr::parse(src_flag);
        if (!a) return cli::fail(cli::kUsageError, "--src: bad IPv6 address");
        cfg.global.src_ipv6 = *a;
    }
    if (const char* env = std::getenv("STAMPD_CONTROL_BIND")) cfg.control_bind = env;
    if (const char* env = std::getenv("STAMPD_CONTROL_PORT"))
        cfg.control_port = static_cast<uint16_t>(std::atoi(env));

    UdpTransport::Options opts;
    opts.bind_addr = cfg.udp_bind;
    opts.raw_srh_mode = cfg.raw_srh_mode;
    auto transport = UdpTransport::create(opts);
    if (!transport) return cli::fail(cli::kUsageError, transport.error());

    std::unique_ptr<SenderNode> sender;
    std::unique_ptr<ReflectorNode> reflector;
    std::unique_ptr<ControlTarget> target;
    if (is_sender) {
        sender = std::make_unique<SenderNode>(*transport.value());
        target = std::make_unique<SenderControl>(*sender);
    } else {
        reflector = std::make_unique<ReflectorNode>(*transport.value());
        target = std::make_unique<ReflectorControl>(*reflector);
    }

    if (cfg.auto_init) {
        if (auto st = target->init(cfg.global); !st)
            return cli::fail(cli::kUsageError, st.error());
    }
    for (size_t i = 0; i < cfg.sessions.size(); ++i) {
        if (auto st = target->create_session(cfg.sessions[i]); !st)
            return cli::fail(cli::kUsageError, st.error());
        if (cfg.autostart[i]) {
            if (auto st = target->start_session(cfg.sessions[i].ssid, std::nullopt); !st)
                return cli::fail(cli::kUsageError, st.error());
        }
    }

    TcpControlServer server(*target);
    if (auto st = server.listen(cfg.control_bind, cfg.control_port); !st)
        return cli::fail(cli::kIoError, st.error());

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::fprintf(stderr, "stampd %s: control on [%s]:%u, STAMP port %u, src %s\n",
                 is_sender ? "sender" : "reflector", cfg.control_bind.c_str(), server.port(),
                 cfg.global.stamp_udp_port, cfg.global.src_ipv6.str().c_str());

    g_shutdown.acquire();

    // Destroy sessions before going away; a restart starts clean.
    (void)target->reset();
    server.stop();
    std::fprintf(stderr, "stampd: shut down\n");
    return cli::kOk;
}
