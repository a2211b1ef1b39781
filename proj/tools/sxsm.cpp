#include <csignal>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "sxsm/attacks/playbooks.hpp"
#include "sxsm/attacks/scan.hpp"
#include "sxsm/attacks/spit.hpp"
#include "sxsm/attacks/spoof.hpp"
#include "sxsm/harness/experiment.hpp"

using namespace sxsm;

namespace {

volatile std::sig_atomic_t interrupted = 0;

bool is_loopback(const std::string& ip) { return ip.rfind("127.", 0) == 0; }

void require_loopback(const std::vector<net::Address>& addresses, bool allowed) {
    if (allowed) return;
    for (const auto& a : addresses)
        if (!is_loopback(a.ip))
            throw std::runtime_error(a.str() + " is not a loopback address; pass --i-own-this-network to use it");
}

std::vector<net::Address> plan_addresses(const engine::ShootPlan& plan) {
    std::vector<net::Address> out{plan.remote, plan.local};
    if (plan.route == engine::Route::Direct)
        for (const auto& row : plan.targets.rows())
            if (row.size() > 1) out.push_back({row[1], static_cast<std::uint16_t>(row.size() > 2 ? std::stoi(row[2]) : 5060)});
    return out;
}

/// Runs `plan` against an in-process defense bound at the plan's remote.
engine::RunResult run_simulated(const engine::ShootPlan& plan, const std::filesystem::path& defense,
                                std::vector<defenses::DefenseRecord>* records = nullptr) {
    net::EventLoop loop;
    net::LoopbackNetwork network(loop);
    auto proxy_t = network.bind(plan.remote);
    harness::DefenseDeployment deployment(harness::load_defense_config(defense), *proxy_t);
    auto t = network.bind(plan.local);
    auto result = engine::execute(plan, *t);
    loop.run_until(loop.now() + 5'000);
    if (records) *records = deployment.endpoint().records();
    return result;
}

engine::RunResult run_udp(const engine::ShootPlan& plan, bool own_network) {
    require_loopback(plan_addresses(plan), own_network);
    net::EventLoop loop(net::ClockMode::Realtime);
    net::UdpTransport t(loop, plan.local);
    return engine::execute(plan, t);
}

int exit_status(int code) { return code < 0 ? 255 : code; }

void print_records(const std::vector<defenses::DefenseRecord>& records) {
    std::cout << "time_ms,call_id,method,caller,callee,source,outcome,gate,final_status\n";
    for (const auto& r : records)
        std::cout << r.time_ms << ',' << r.call_id << ',' << r.method << ',' << r.caller << ',' << r.callee << ','
                  << r.source << ',' << defenses::to_string(r.outcome) << ',' << r.gate << ',' << r.final_status
                  << '\n';
}

void print_reports(const std::vector<harness::EvalReport>& reports) {
    std::cout << std::left << std::setw(40) << "experiment" << std::right << std::setw(9) << "attempts" << std::setw(9)
              << "bypass" << std::setw(11) << "detection" << std::setw(8) << "fpr" << "  flags\n";
    for (const auto& r : reports) {
        std::string flags;
        for (const auto& f : r.flags) flags += f + " ";
        std::cout << std::left << std::setw(40) << r.name << std::right << std::setw(9) << r.attempted << std::fixed
                  << std::setprecision(3) << std::setw(9) << r.bypass_rate << std::setw(11) << r.detection_rate
                  << std::setw(8) << r.false_positive_rate << "  " << flags << '\n';
    }
}

std::vector<sip::SipUri> parse_uris(const std::vector<std::string>& texts) {
    std::vector<sip::SipUri> out;
    for (const auto& t : texts) out.push_back(sip::SipUri::parse(t));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SIP SPIT attack and defense laboratory"};
    app.require_subcommand(1);
    bool own_network = false;
    app.add_flag("--i-own-this-network", own_network, "Allow non-loopback addresses (real UDP)");

    // validate
    auto* validate = app.add_subcommand("validate", "Check a scenario (and its templates) or a plan");
    std::filesystem::path validate_file, validate_library;
    validate->add_option("file", validate_file, "Scenario or plan file")->required()->check(CLI::ExistingFile);
    validate->add_option("--library", validate_library, "Template library (default: the file's directory)");

    // shoot
    auto* shoot = app.add_subcommand("shoot", "Execute a shoot plan");
    std::filesystem::path shoot_plan, shoot_against;
    shoot->add_option("plan", shoot_plan, "Plan file")->required()->check(CLI::ExistingFile);
    shoot->add_option("--against", shoot_against, "Run against a simulated defense config instead of UDP")
        ->check(CLI::ExistingFile);

    // scan
    auto* scan = app.add_subcommand("scan", "Classify a URI range");
    std::string scan_domain = "example.com", scan_users, scan_ips, scan_probe = "OPTIONS", scan_rate = "50";
    std::string scan_proxy = "127.0.0.1:5060", scan_local = "127.0.0.1:5070";
    std::uint16_t scan_port = 5060;
    std::filesystem::path scan_out, scan_against;
    scan->add_option("--domain", scan_domain);
    scan->add_option("--users", scan_users, "Permanent URIs: 5550000-5559999 or 555xxxx");
    scan->add_option("--ips", scan_ips, "Temporary URIs: a-b, CIDR or one address");
    scan->add_option("--port", scan_port);
    scan->add_option("--probe", scan_probe, "INVITE, OPTIONS or REGISTER");
    scan->add_option("--rate", scan_rate, "Probes per second (n or n/d)");
    scan->add_option("--proxy", scan_proxy);
    scan->add_option("--local", scan_local);
    scan->add_option("--out", scan_out, "Inventory CSV")->required();
    scan->add_option("--against", scan_against, "Simulated defense config")->check(CLI::ExistingFile);

    // spit
    auto* spit = app.add_subcommand("spit", "Write a SPIT plan for the assigned URIs of an inventory");
    std::filesystem::path spit_inventory, spit_out, spit_device_db;
    std::string spit_mode = "via-proxy", spit_rate = "1", spit_proxy = "127.0.0.1:5060", spit_local = "127.0.0.1:5061";
    std::string spit_device;
    std::vector<std::string> spit_callers;
    bool spit_spoofed = false;
    spit->add_option("--inventory", spit_inventory)->required()->check(CLI::ExistingFile);
    spit->add_option("--mode", spit_mode, "via-proxy or direct-ip");
    spit->add_option("--caller", spit_callers, "Caller identity (repeatable)")->required();
    spit->add_flag("--spoofed", spit_spoofed, "Callers are claimed, not owned");
    spit->add_option("--rate", spit_rate);
    spit->add_option("--proxy", spit_proxy);
    spit->add_option("--local", spit_local);
    spit->add_option("--device", spit_device, "Imitate a device of the fingerprint db");
    spit->add_option("--device-db", spit_device_db);
    spit->add_option("--out", spit_out, "Plan directory")->required();

    // ringtone
    auto* ringtone = app.add_subcommand("ringtone", "Write a ring-tone SPIT plan");
    std::filesystem::path ring_inventory, ring_out;
    std::string ring_alert, ring_caller, ring_rate = "1", ring_proxy = "127.0.0.1:5060", ring_local = "127.0.0.1:5061";
    ringtone->add_option("--inventory", ring_inventory)->required()->check(CLI::ExistingFile);
    ringtone->add_option("--alert", ring_alert, "Alert-Info URL")->required();
    ringtone->add_option("--caller", ring_caller)->required();
    ringtone->add_option("--rate", ring_rate);
    ringtone->add_option("--proxy", ring_proxy);
    ringtone->add_option("--local", ring_local);
    ringtone->add_option("--out", ring_out)->required();

    // relay
    auto* relay = app.add_subcommand("relay", "Write a CAPTCHA relay plan");
    std::filesystem::path relay_inventory, relay_out;
    std::string relay_solver, relay_caller, relay_rate = "1", relay_proxy = "127.0.0.1:5060",
                                            relay_local = "127.0.0.1:5061";
    relay->add_option("--inventory", relay_inventory)->required()->check(CLI::ExistingFile);
    relay->add_option("--solver", relay_solver)->required();
    relay->add_option("--caller", relay_caller)->required();
    relay->add_option("--rate", relay_rate);
    relay->add_option("--proxy", relay_proxy);
    relay->add_option("--local", relay_local);
    relay->add_option("--out", relay_out)->required();

    // hijack
    auto* hijack = app.add_subcommand("hijack", "Write a registration race plan");
    std::filesystem::path hijack_out;
    std::string hijack_target, hijack_contact, hijack_proxy = "127.0.0.1:5060", hijack_local = "127.0.0.1:5062";
    int hijack_interval = 15'000;
    hijack->add_option("--target", hijack_target)->required();
    hijack->add_option("--contact", hijack_contact, "ip:port the target should resolve to")->required();
    hijack->add_option("--interval-ms", hijack_interval);
    hijack->add_option("--proxy", hijack_proxy);
    hijack->add_option("--local", hijack_local);
    hijack->add_option("--out", hijack_out)->required();

    // defend
    auto* defend = app.add_subcommand("defend", "Serve a defense config on a UDP socket");
    std::filesystem::path defend_config;
    std::string defend_listen = "127.0.0.1:5060";
    std::int64_t defend_duration = 0;
    defend->add_option("config", defend_config)->required()->check(CLI::ExistingFile);
    defend->add_option("--listen", defend_listen);
    defend->add_option("--duration-ms", defend_duration, "Stop after this long (0: until interrupted)");

    // eval
    auto* eval = app.add_subcommand("eval", "Run experiments");
    std::filesystem::path eval_matrix, eval_out, eval_defense;
    std::optional<std::uint64_t> eval_seed;
    std::string eval_attack;
    std::vector<std::string> eval_params;
    eval->add_option("--matrix", eval_matrix, "Experiments file")->check(CLI::ExistingFile);
    eval->add_option("--attack", eval_attack, "Single experiment: playbook");
    eval->add_option("--param", eval_params, "Single experiment: name=value");
    eval->add_option("--defense", eval_defense, "Single experiment: defense config")->check(CLI::ExistingFile);
    eval->add_option("--seed", eval_seed);
    eval->add_option("--out", eval_out)->required();

    // report
    auto* report = app.add_subcommand("report", "Summarize a report directory");
    std::filesystem::path report_dir;
    report->add_option("dir", report_dir)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) {
            if (validate_file.extension() == ".xml" && scenario::read_file(validate_file).find("<plan") != std::string::npos) {
                auto plan = engine::load_plan(validate_file);
                plan.validate();
                std::cout << "plan ok: " << plan.entries.size() << " entries\n";
                return 0;
            }
            auto library = validate_library.empty() ? validate_file.parent_path() : validate_library;
            auto bundle = scenario::load_bundle(validate_file, library);
            auto suspects = bundle.validate();
            for (const auto& s : suspects) std::cout << "warning: unknown placeholder [" << s << "]\n";
            std::cout << "scenario ok: " << bundle.scenario.steps.size() << " steps\n";
            return 0;
        }
        if (*shoot) {
            auto plan = engine::load_plan(shoot_plan);
            auto result = shoot_against.empty() ? run_udp(plan, own_network) : run_simulated(plan, shoot_against);
            std::cout << engine::to_json(result) << '\n';
            return exit_status(engine::worst_exit_code(result));
        }
        if (*scan) {
            if (scan_users.empty() == scan_ips.empty()) throw std::runtime_error("give exactly one of --users and --ips");
            attacks::ScanOptions options;
            options.rate = engine::Rate::parse(scan_rate);
            auto probe = attacks::probe_from_string(scan_probe);
            auto local = net::Address::parse(scan_local);
            auto proxy = net::Address::parse(scan_proxy);
            attacks::UriInventory inventory;
            auto do_scan = [&](net::Transport& t) {
                inventory = scan_users.empty()
                                ? attacks::scan_temporary(attacks::IpRange::parse(scan_ips), scan_port, probe, t, options)
                                : attacks::scan_permanent(scan_domain, attacks::UserRange::parse(scan_users), probe, t,
                                                          proxy, options);
            };
            if (!scan_against.empty()) {
                net::EventLoop loop;
                net::LoopbackNetwork network(loop);
                auto proxy_t = network.bind(proxy);
                harness::DefenseDeployment deployment(harness::load_defense_config(scan_against), *proxy_t);
                auto t = network.bind(local);
                do_scan(*t);
            } else {
                std::vector<net::Address> addresses{local, proxy};
                if (!scan_ips.empty())
                    for (const auto& ip : attacks::IpRange::parse(scan_ips).addresses()) addresses.push_back({ip, scan_port});
                require_loopback(addresses, own_network);
                net::EventLoop loop(net::ClockMode::Realtime);
                net::UdpTransport t(loop, local);
                do_scan(t);
            }
            inventory.save(scan_out);
            std::cout << inventory.size() << " probed, " << inventory.assigned().size() << " assigned\n";
            return 0;
        }
        if (*spit) {
            attacks::SpitPlanSpec spec;
            spec.mode = attacks::spit_mode_from_string(spit_mode);
            spec.rate = engine::Rate::parse(spit_rate);
            spec.proxy = net::Address::parse(spit_proxy);
            spec.local = net::Address::parse(spit_local);
            auto ids = parse_uris(spit_callers);
            spec.callers = spit_spoofed ? attacks::CallerSource::spoofed(ids) : attacks::CallerSource::fixed(ids);
            spec.bundle = attacks::stock_bundle(attacks::spit_call_scenario());
            if (!spit_device.empty()) {
                auto db = defenses::load_fingerprint_db(spit_device_db.empty()
                                                            ? harness::default_data_dir() / "fingerprints.xml"
                                                            : spit_device_db);
                spec.bundle = attacks::spoof_device(spec.bundle, db.device(spit_device));
            }
            auto plan = attacks::build_spit_plan(attacks::UriInventory::load(spit_inventory), spec);
            std::cout << engine::save_plan(plan, spit_out).string() << '\n';
            return 0;
        }
        if (*ringtone || *relay) {
            bool ring = ringtone->parsed();
            auto inventory = attacks::UriInventory::load(ring ? ring_inventory : relay_inventory);
            auto assigned = inventory.assigned();
            if (assigned.empty()) throw std::runtime_error("inventory has no assigned URIs");
            attacks::SpitPlanSpec spec;
            spec.rate = engine::Rate::parse(ring ? ring_rate : relay_rate);
            spec.proxy = net::Address::parse(ring ? ring_proxy : relay_proxy);
            spec.local = net::Address::parse(ring ? ring_local : relay_local);
            spec.callers = attacks::CallerSource::fixed({sip::SipUri::parse(ring ? ring_caller : relay_caller)});
            spec.bundle = attacks::stock_bundle(
                ring ? attacks::ringtone_spit_scenario(ring_alert)
                     : attacks::captcha_relay(assigned.front().uri, sip::SipUri::parse(relay_solver)));
            spec.scenario_ref = ring ? "ringtone_spit" : "captcha_relay";
            auto plan = attacks::build_spit_plan(inventory, spec);
            if (!ring) plan.recv_timeout_ms = 40'000;
            std::cout << engine::save_plan(plan, ring ? ring_out : relay_out).string() << '\n';
            return 0;
        }
        if (*hijack) {
            auto race = attacks::registration_race(sip::SipUri::parse(hijack_target), net::Address::parse(hijack_contact),
                                                   hijack_interval);
            auto plan = attacks::registration_race_plan(race, net::Address::parse(hijack_proxy),
                                                        net::Address::parse(hijack_local));
            std::cout << engine::save_plan(plan, hijack_out).string() << '\n';
            return 0;
        }
        if (*defend) {
            auto listen = net::Address::parse(defend_listen);
            require_loopback({listen}, own_network);
            net::EventLoop loop(net::ClockMode::Realtime);
            net::UdpTransport t(loop, listen);
            harness::DefenseDeployment deployment(harness::load_defense_config(defend_config), t);
            std::signal(SIGINT, [](int) { interrupted = 1; });
            std::signal(SIGTERM, [](int) { interrupted = 1; });
            std::cerr << deployment.config().name << " listening on " << listen.str() << '\n';
            auto until = defend_duration > 0 ? loop.now() + defend_duration : -1;
            std::function<void()> tick = [&] {
                if (interrupted || (until >= 0 && loop.now() >= until)) {
                    loop.stop();
                    return;
                }
                loop.after(100, tick);
            };
            loop.post(tick);
            loop.run();
            print_records(deployment.endpoint().records());
            return 0;
        }
        if (*eval) {
            if (!eval_matrix.empty()) {
                auto spec = harness::load_matrix_spec(eval_matrix);
                auto matrix =
                    harness::baseline_matrix(spec.attacks, spec.defenses, eval_seed.value_or(spec.seed), spec.repetitions);
                harness::write_matrix(matrix, eval_out);
                std::cout << harness::grid_csv(matrix);
                bool complete = std::all_of(matrix.cells.begin(), matrix.cells.end(),
                                            [](const auto& c) { return c.complete; });
                return complete ? 0 : 1;
            }
            if (eval_attack.empty() || eval_defense.empty())
                throw std::runtime_error("give --matrix, or --attack and --defense");
            harness::Experiment exp;
            exp.attack.playbook = eval_attack;
            for (const auto& p : eval_params) {
                auto eq = p.find('=');
                if (eq == std::string::npos) throw std::runtime_error("--param needs name=value: " + p);
                exp.attack.params[p.substr(0, eq)] = p.substr(eq + 1);
            }
            exp.defense = eval_defense;
            exp.seed = eval_seed.value_or(1);
            auto r = harness::run_experiment(exp, eval_out);
            print_reports({r});
            return r.complete ? 0 : 1;
        }
        if (*report) {
            auto reports = harness::read_reports(report_dir);
            print_reports(reports);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "sxsm: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
