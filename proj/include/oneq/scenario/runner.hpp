#pragma once

// Runs a loaded scenario: builds the network, starts every application as a chain of
// simulator events, then collects metrics, the trace, timing curves and the audit.

#include <oneq/apps/qkd.hpp>
#include <oneq/apps/sensing.hpp>
#include <oneq/apps/ubqc.hpp>
#include <oneq/engine/simulator.hpp>
#include <oneq/engine/timing.hpp>
#include <oneq/netmodel/links.hpp>
#include <oneq/protocol/network.hpp>
#include <oneq/scenario/audit.hpp>
#include <oneq/scenario/config.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace oneq::scenario {

struct AppTally {
    std::string id;
    std::string type;
    int planned = 0;
    int successes = 0;
    int failures = 0;
    std::string value_name = "value";
    std::string value_unit = "1";
    double value = 0.0;
    double elapsed = 0.0;  // summed over finished tasks
    int resources = 0;     // pairs consumed by the app
    std::vector<std::string> failure_reasons;

    int incomplete() const { return std::max(0, planned - successes - failures); }
    bool hard_failure() const { return failures > 0 || incomplete() > 0; }
};

namespace detail {

using protocol::EntanglementRequest;
using protocol::Network;
using protocol::SessionResult;
using protocol::SliceType;

class AppDriver {
public:
    AppDriver(Network& net, const AppCommon& c, const char* type) : net_(net) {
        tally_.id = c.id;
        tally_.type = type;
        start_ = c.start;
    }
    virtual ~AppDriver() = default;
    AppDriver(const AppDriver&) = delete;
    AppDriver& operator=(const AppDriver&) = delete;

    virtual void start() = 0;
    double start_time() const { return start_; }
    const AppTally& tally() const { return tally_; }

protected:
    Simulator& sim() { return net_.sim(); }
    Metrics& metrics() { return net_.sim().metrics(); }
    double now() const { return net_.sim().now(); }
    std::string tag(const std::string& what) const { return tally_.type + ":" + tally_.id + ":" + what; }

    void succeed(double elapsed) {
        ++tally_.successes;
        tally_.elapsed += elapsed;
        net_.sim().record(tally_.id, "app-result", {{"app", tally_.type}, {"outcome", "success"},
                                                   {"elapsed", format_number(elapsed)}});
    }

    void fail(const std::string& reason, double elapsed) {
        ++tally_.failures;
        tally_.elapsed += elapsed;
        tally_.failure_reasons.push_back(reason);
        net_.sim().record(tally_.id, "app-result", {{"app", tally_.type}, {"outcome", "failure"},
                                                   {"reason", reason}, {"elapsed", format_number(elapsed)}});
    }

    /// Brings every user node in `nodes` to Connected (or keeps it Entangled), in order.
    void connect_all(std::vector<NodeId> nodes, Network::Done done, std::size_t i = 0) {
        while (i < nodes.size() && !net::is_user(net_.topology().node(nodes[i]).kind)) ++i;
        if (i == nodes.size()) {
            done(true);
            return;
        }
        const NodeId n = nodes[i];
        net_.ensure_connected(n, [this, nodes = std::move(nodes), done, i](bool ok) mutable {
            if (!ok) {
                done(false);
                return;
            }
            connect_all(std::move(nodes), std::move(done), i + 1);
        });
    }

    double w_now(ResourceId id) const {
        const auto& e = net_.ledger().at(id);
        return e.pair.w_at(net_.sim().now(), e.t_coh);
    }

    bool live(ResourceId id) const { return net_.ledger().at(id).fate == protocol::Fate::Live; }

    void discard_all(const std::vector<ResourceId>& ids, const std::string& reason) {
        for (auto id : ids) {
            if (live(id)) net_.discard(id, reason);
        }
    }

    Network& net_;
    AppTally tally_;
    double start_ = 0.0;
};

// ---- key distribution ---------------------------------------------------------------

class QkdDriver : public AppDriver {
public:
    QkdDriver(Network& net, QkdApp app) : AppDriver(net, app.common, "qkd"), app_(std::move(app)) {
        tally_.planned = app_.keys;
        tally_.value_name = "key_bits";
        tally_.value_unit = "bits";
    }

    void start() override {
        sim().schedule(app_.common.start, EventKind::AppStep, app_.a, [this] { begin_key(); });
    }

private:
    void begin_key() {
        if (key_index_ >= app_.keys) return;
        key_start_ = now();
        round_ = 0;
        attempt();
    }

    void attempt() {
        ++round_;
        metrics().add("qkd.rounds", 1);
        connect_all({app_.a, app_.b}, [this](bool ok) {
            if (!ok) {
                apps::QkdResult res;
                res.abort = apps::QkdAbort::NoClassicalCoverage;
                finish_round(res);
                return;
            }
            run_session();
        });
    }

    void run_session() {
        auto raw = std::make_shared<apps::QkdRaw>();
        raw->requested = static_cast<std::size_t>(app_.qkd.n_pairs);
        EntanglementRequest req{app_.a, app_.b, SliceType::GenerateAndMeasure, app_.qkd.n_pairs,
                                app_.max_latency, app_.min_fidelity, 0, "qkd"};
        net_.start_session(
            req,
            [this, raw](ResourceId id) {
                const int ba = sim().stream(app_.a, tag("basis")).bit();
                const int bb = sim().stream(app_.b, tag("basis")).bit();
                const double w = w_now(id);
                const auto basis = [](int b) {
                    return b ? qcore::MeasurementBasis::x() : qcore::MeasurementBasis::z();
                };
                const auto [xa, xb] = net_.measure(id, app_.a, basis(ba), basis(bb), "qkd");
                raw->bases_a.push_back(static_cast<std::uint8_t>(ba));
                raw->bases_b.push_back(static_cast<std::uint8_t>(bb));
                raw->bits_a.push_back(static_cast<std::uint8_t>(xa));
                raw->bits_b.push_back(static_cast<std::uint8_t>(xb));
                raw->w_used.push_back(w);
                ++tally_.resources;
            },
            [this, raw](const SessionResult&) { postprocess(raw); });
    }

    void postprocess(std::shared_ptr<apps::QkdRaw> raw) {
        // the post-processing decisions are computed first; every public message is then
        // carried by the network, and any loss aborts the round
        auto msgs = std::make_shared<std::vector<double>>();
        const apps::ClassicalChannel record = [msgs](double bits) {
            msgs->push_back(bits);
            return true;
        };
        auto res = std::make_shared<apps::QkdResult>(
            apps::qkd_postprocess(*raw, app_.qkd, record, sim().stream(app_.a, tag("post"))));
        send_messages(msgs, 0, [this, res](bool ok) {
            if (!ok || (res->ok() && !(net_.classically_covered(app_.a) && net_.classically_covered(app_.b)))) {
                res->abort = apps::QkdAbort::NoClassicalCoverage;
                res->key_a.clear();
                res->key_b.clear();
                res->key_length = 0;
            }
            finish_round(*res);
        });
    }

    void send_messages(std::shared_ptr<std::vector<double>> msgs, std::size_t i, Network::Done done) {
        if (i == msgs->size()) {
            done(true);
            return;
        }
        const bool from_a = i % 2 == 0;
        net_.send(from_a ? app_.a : app_.b, from_a ? app_.b : app_.a, (*msgs)[i], "qkd-postprocess",
                  [this, msgs, i, done](bool ok) {
                      if (!ok) {
                          done(false);
                          return;
                      }
                      send_messages(msgs, i + 1, done);
                  });
    }

    void finish_round(const apps::QkdResult& res) {
        auto& m = metrics();
        m.add("qkd.delivered_pairs", static_cast<double>(res.delivered));
        m.add("qkd.sifted_bits", static_cast<double>(res.sifted));
        m.add("qkd.sifted_errors", static_cast<double>(res.sifted_disagreements));
        if (res.sacrificed > 0) {
            m.add("qkd.sacrificed_bits", static_cast<double>(res.sacrificed));
            m.add("qkd.sacrificed_errors", std::round(res.qber * static_cast<double>(res.sacrificed)));
        }
        if (res.ok()) {
            if (!res.keys_match()) m.add("qkd.key_mismatches", 1);
            m.add("qkd.keys", 1);
            m.add("qkd.key_bits", static_cast<double>(res.key_length), "bits");
            m.observe("qkd.time_to_first_key", now() - key_start_, "s");
            tally_.value += static_cast<double>(res.key_length);
            net_.service_complete("qkd", {app_.a, app_.b});
            succeed(now() - key_start_);
            next_key();
            return;
        }
        m.add(std::string("qkd.aborts.") + apps::to_string(res.abort), 1);
        sim().record(app_.a, "qkd-abort", {{"app", tally_.id}, {"reason", apps::to_string(res.abort)},
                                           {"round", std::to_string(round_)}});
        if (app_.retry_on_abort && round_ < app_.max_rounds) {
            sim().after(0.0, EventKind::AppStep, app_.a, [this] { attempt(); });
            return;
        }
        fail(apps::to_string(res.abort), now() - key_start_);
        next_key();
    }

    void next_key() {
        ++key_index_;
        sim().after(0.0, EventKind::AppStep, app_.a, [this] { begin_key(); });
    }

    QkdApp app_;
    int key_index_ = 0;
    int round_ = 0;
    double key_start_ = 0.0;
};

// ---- blind computation --------------------------------------------------------------

class UbqcDriver : public AppDriver {
public:
    UbqcDriver(Network& net, UbqcApp app) : AppDriver(net, app.common, "ubqc"), app_(std::move(app)) {
        tally_.planned = app_.runs;
        tally_.value_name = "output_bit";
    }

    void start() override {
        sim().schedule(app_.common.start, EventKind::AppStep, app_.client, [this] { begin_run(); });
    }

private:
    struct RunState {
        apps::UbqcClient client;
        apps::UbqcServer server;
        std::vector<ResourceId> ids;
    };

    void begin_run() {
        if (run_ >= app_.runs) return;
        run_start_ = now();
        connect_all({app_.client}, [this](bool ok) {
            if (!ok) {
                end_run(false, "not-connected");
                return;
            }
            EntanglementRequest req{app_.client, app_.server, SliceType::GenerateAndStore, app_.ubqc.k_pairs,
                                    app_.max_latency, app_.min_fidelity, 0, "ubqc"};
            net_.start_session(req, {}, [this](const SessionResult& r) { on_pairs(r); });
        });
    }

    void on_pairs(const SessionResult& r) {
        std::vector<ResourceId> ids;
        for (auto id : r.delivered) {
            if (live(id)) ids.push_back(id);
        }
        const std::size_t n = app_.ubqc.pattern.size();
        if (ids.size() < n) {
            discard_all(ids, "ubqc-insufficient");
            end_run(false, apps::to_string(apps::UbqcFailure::InsufficientPairs));
            return;
        }
        auto st = std::make_shared<RunState>(
            RunState{apps::UbqcClient(app_.ubqc, sim().stream(app_.client, tag("client"))), {}, ids});
        auto& rng = sim().stream(app_.client, tag("client"));
        // remote preparation: the client measures every half it holds right away
        for (std::size_t j = 0; j < n; ++j) {
            const ResourceId id = ids[j];
            if (net_.qubit_decohered(id, app_.client, now())) {
                discard_all(ids, "ubqc-decohered");
                end_run(false, apps::to_string(apps::UbqcFailure::DecoheredResource));
                return;
            }
            const double w = w_now(id);
            net_.consume(id, "ubqc-remote-prep");
            ++tally_.resources;
            if (app_.ubqc.exact_mode) {
                auto prep = apps::remote_prepare(w, st->client.theta(j), rng);
                st->client.prepared(j, prep.m);
                st->server.receive_qubit(std::move(prep.server_qubit));
            } else {
                st->client.prepared(j, rng.bit());
            }
        }
        discard_all(std::vector<ResourceId>(ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end()), "ubqc-unused");
        round(st, 0);
    }

    void round(std::shared_ptr<RunState> st, std::size_t j) {
        const int delta = st->client.next_delta(j);
        metrics().observe("ubqc.delta", delta, "grid");
        net_.send(app_.client, app_.server, 3.0, "ubqc-delta", [this, st, j, delta](bool ok) {
            if (!ok) {
                end_run(false, apps::to_string(apps::UbqcFailure::ClassicalRound));
                return;
            }
            if (net_.qubit_decohered(st->ids[j], app_.server, now())) {
                end_run(false, apps::to_string(apps::UbqcFailure::DecoheredResource));
                return;
            }
            auto& srng = sim().stream(app_.server, tag("server"));
            const int s = app_.ubqc.exact_mode ? st->server.measure_next(delta, srng) : srng.bit();
            net_.send(app_.server, app_.client, 1.0, "ubqc-outcome", [this, st, j, s](bool ok2) {
                if (!ok2) {
                    end_run(false, apps::to_string(apps::UbqcFailure::ClassicalRound));
                    return;
                }
                st->client.receive(j, s);
                if (!st->client.done()) {
                    round(st, j + 1);
                    return;
                }
                if (!net_.classically_covered(app_.client)) {
                    end_run(false, "NoClassicalCoverage");
                    return;
                }
                const int out = st->client.output();
                metrics().add("ubqc.output_ones", out);
                tally_.value = out;
                net_.service_complete("ubqc", {app_.client});
                end_run(true, "");
            });
        });
    }

    void end_run(bool ok, const std::string& reason) {
        metrics().add(ok ? "ubqc.runs_ok" : "ubqc.runs_failed", 1);
        if (ok) {
            succeed(now() - run_start_);
        } else {
            fail(reason, now() - run_start_);
        }
        ++run_;
        sim().after(0.0, EventKind::AppStep, app_.client, [this] { begin_run(); });
    }

    UbqcApp app_;
    int run_ = 0;
    double run_start_ = 0.0;
};

// ---- distributed sensing ------------------------------------------------------------

class SensingDriver : public AppDriver {
public:
    SensingDriver(Network& net, SensingApp app)
        : AppDriver(net, app.common, "sensing"), app_(std::move(app)), acc_(app_.sensing) {
        tally_.planned = 1;
        tally_.value_name = "phase_estimate";
        tally_.value_unit = "rad";
    }

    void start() override {
        sim().schedule(app_.common.start, EventKind::AppStep, app_.aggregator, [this] {
            begun_ = now();
            connect_all(app_.sensors, [this](bool ok) {
                if (!ok) {
                    fail("not-connected", now() - begun_);
                    return;
                }
                schedule_shot();
            });
        });
    }

private:
    void schedule_shot() {
        sim().after(acc_.shot_duration(), EventKind::AppStep, app_.aggregator, [this] {
            acc_.shot(sim().stream(app_.aggregator, tag("shots")), [this](int i) { return report(i); });
            if (acc_.done()) {
                finish();
            } else {
                schedule_shot();
            }
        });
    }

    /// One sensor report, relayed hop by hop to the aggregating station.
    bool report(int i) {
        const NodeId& sensor = app_.sensors[static_cast<std::size_t>(i)];
        const auto& topo = net_.topology();
        const NodeId bs = topo.node(sensor).serving_bs;
        const double t = now();
        auto lost = [&](const std::string& reason, int attempts) {
            sim().record(sensor, "classical", {{"to", app_.aggregator}, {"bits", "64"}, {"purpose", "sensing-report"},
                                               {"delivered", "0"}, {"reason", reason},
                                               {"attempts", std::to_string(attempts)}});
            metrics().add("sensing.lost_reports", 1);
            return false;
        };
        if (!topo.in_classical_coverage(sensor, bs, t) || !topo.node(app_.aggregator).mobility.active(t)) {
            return lost("no-coverage", 0);
        }
        std::vector<std::pair<NodeId, NodeId>> hops{{sensor, bs}};
        if (bs != app_.aggregator) hops.emplace_back(bs, app_.aggregator);
        for (const auto& [a, b] : hops) {
            const auto sent = net::send_with_retries(topo.classical_link(a, b), 64.0, net_.config().retry_cap,
                                                     sim().stream(a, "classical"));
            if (!sent.delivered) return lost("retries-exhausted", sent.attempts);
        }
        sim().record(sensor, "classical", {{"to", app_.aggregator}, {"bits", "64"}, {"purpose", "sensing-report"},
                                           {"delivered", "1"}});
        return true;
    }

    void finish() {
        try {
            const auto res = acc_.result();
            metrics().set("sensing.phase_estimate", res.estimate, "rad");
            metrics().set("sensing.std_error", res.std_error, "rad");
            metrics().set("sensing.contrast", res.contrast, "1");
            metrics().add("sensing.shots_used", res.shots_used);
            metrics().add("sensing.shots_discarded", res.shots_discarded);
            tally_.value = res.estimate;
            std::vector<NodeId> covered;
            for (const auto& s : app_.sensors) {
                if (net_.classically_covered(s)) covered.push_back(s);
            }
            net_.service_complete("sensing", covered);
            succeed(now() - begun_);
        } catch (const DomainError& e) {
            fail("no-usable-shots", now() - begun_);
        }
    }

    SensingApp app_;
    apps::SensingAccumulator acc_;
    double begun_ = 0.0;
};

// ---- teleportation ------------------------------------------------------------------

class TeleportDriver : public AppDriver {
public:
    TeleportDriver(Network& net, TeleportApp app) : AppDriver(net, app.common, "teleport"), app_(std::move(app)) {
        tally_.planned = app_.count;
        tally_.value_name = "mean_quality";
    }

    void start() override {
        sim().schedule(app_.common.start, EventKind::AppStep, app_.sender, [this] {
            begun_ = now();
            connect_all({app_.sender}, [this](bool ok) {
                if (!ok) {
                    for (int i = 0; i < app_.count; ++i) fail("not-connected", now() - begun_);
                    return;
                }
                net_.acquire(app_.sender, app_.receiver, app_.count, app_.max_latency, app_.min_fidelity,
                             [this](const protocol::AcquireResult& r) {
                                 if (!r.ok) {
                                     for (int i = 0; i < app_.count; ++i) fail("acquire-failed", now() - begun_);
                                     return;
                                 }
                                 sim().after(app_.hold, EventKind::AppStep, app_.sender,
                                             [this, ids = r.pairs] {
                                                 for (auto id : ids) use(id);
                                             });
                             });
            });
        });
    }

private:
    void use(ResourceId id) {
        if (!live(id)) {
            fail("pair-lost", now() - begun_);
            return;
        }
        const bool decohered = net_.qubit_decohered(id, app_.sender, now()) |
                               net_.qubit_decohered(id, app_.receiver, now());
        if (decohered) {
            net_.discard(id, "decohered");
            fail("decohered", now() - begun_);
            return;
        }
        auto payload = std::make_shared<protocol::QubitPayload>(protocol::QubitPayload{tag("payload"), {}});
        ++tally_.resources;
        net_.teleport(app_.sender, id, *payload, [this, payload](const protocol::TeleportRecord& rec) {
            if (rec.delivered) {
                metrics().observe("teleport.quality", rec.quality, "1");
                quality_sum_ += rec.quality;
                succeed(now() - begun_);
                tally_.value = quality_sum_ / tally_.successes;
            } else {
                fail("correction-lost", now() - begun_);
            }
        });
    }

    TeleportApp app_;
    double begun_ = 0.0;
    double quality_sum_ = 0.0;
};

// ---- handover -----------------------------------------------------------------------

class HandoverDriver : public AppDriver {
public:
    HandoverDriver(Network& net, HandoverApp app) : AppDriver(net, app.common, "handover"), app_(std::move(app)) {
        tally_.planned = 1;
        tally_.value_name = "w_out";
    }

    void start() override {
        sim().schedule(app_.common.start, EventKind::AppStep, app_.que, [this] {
            connect_all({app_.que}, [this](bool ok) {
                if (!ok) {
                    fail("not-connected", 0.0);
                    return;
                }
                net_.acquire(app_.que, net_.quantum_serving(app_.que), 1, app_.max_latency, net_.config().f_min,
                             [this](const protocol::AcquireResult& r) {
                                 if (!r.ok) {
                                     fail("no-initial-pair", 0.0);
                                     return;
                                 }
                                 net_.release_reservations(r.pairs);
                                 sim().schedule(std::max(app_.at, now()), EventKind::AppStep, app_.que,
                                                [this] { run(); });
                             });
            });
        });
    }

private:
    void run() {
        const double t0 = now();
        try {
            net_.handover(app_.que, app_.to, app_.mode,
                          [this, t0](const protocol::HandoverRecord& rec) {
                              metrics().observe("handover.downtime", rec.downtime, "s");
                              metrics().add(std::string("handover.performed.") + protocol::to_string(rec.performed), 1);
                              if (!rec.ok) {
                                  fail(rec.reason, now() - t0);
                                  return;
                              }
                              metrics().observe("handover.w_out", rec.w_out, "1");
                              tally_.value = rec.w_out;
                              succeed(now() - t0);
                          },
                          app_.max_latency);
        } catch (const PreconditionError& e) {
            fail("no-stored-pair", 0.0);
        }
    }

    HandoverApp app_;
};

// ---- on-demand acquisition ----------------------------------------------------------

class AcquireDriver : public AppDriver {
public:
    AcquireDriver(Network& net, AcquireApp app) : AppDriver(net, app.common, "acquire"), app_(std::move(app)) {
        tally_.planned = 1;
        tally_.value_name = "latency";
        tally_.value_unit = "s";
    }

    void start() override {
        sim().schedule(app_.common.start, EventKind::AppStep, app_.que, [this] {
            const double t0 = now();
            net_.acquire(app_.que, app_.peer, app_.count, app_.max_latency, app_.min_fidelity,
                         [this, t0](const protocol::AcquireResult& r) {
                             metrics().observe("acquire.latency", r.latency, "s");
                             metrics().add("acquire.from_buffer", r.from_buffer);
                             if (!r.ok) {
                                 fail("acquire-failed", now() - t0);
                                 return;
                             }
                             for (auto id : r.pairs) {
                                 if (net_.qubit_decohered(id, app_.que, now())) {
                                     net_.discard(id, "decohered");
                                     continue;
                                 }
                                 net_.consume(id, "acquire-use");
                                 ++tally_.resources;
                             }
                             tally_.value = r.latency;
                             succeed(now() - t0);
                         });
        });
    }

private:
    AcquireApp app_;
};

inline std::unique_ptr<AppDriver> make_driver(Network& net, const AppSpec& spec) {
    return std::visit(
        [&net](const auto& a) -> std::unique_ptr<AppDriver> {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, QkdApp>) return std::make_unique<QkdDriver>(net, a);
            if constexpr (std::is_same_v<T, UbqcApp>) return std::make_unique<UbqcDriver>(net, a);
            if constexpr (std::is_same_v<T, SensingApp>) return std::make_unique<SensingDriver>(net, a);
            if constexpr (std::is_same_v<T, TeleportApp>) return std::make_unique<TeleportDriver>(net, a);
            if constexpr (std::is_same_v<T, HandoverApp>) return std::make_unique<HandoverDriver>(net, a);
            if constexpr (std::is_same_v<T, AcquireApp>) return std::make_unique<AcquireDriver>(net, a);
        },
        spec);
}

}  // namespace detail

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<double> until;
};

struct RunOutput {
    std::string run_id;
    std::uint64_t seed = 0;
    double until = 0.0;
    std::uint64_t events = 0;
    Trace trace;
    Metrics metrics;
    std::vector<AppTally> apps;
    std::optional<TimingEvaluation> timing;
    AuditReport audit;

    bool hard_failure() const {
        for (const auto& a : apps) {
            if (a.hard_failure()) return true;
        }
        return false;
    }

    std::string metrics_csv() const {
        std::ostringstream out;
        metrics.write_csv(out, run_id, seed);
        return out.str();
    }

    ordered_json summary() const {
        ordered_json s;
        s["run_id"] = run_id;
        s["seed"] = seed;
        s["until_s"] = until;
        s["events_executed"] = events;
        s["trace_records"] = trace.size();
        ordered_json list = ordered_json::array();
        for (const auto& a : apps) {
            list.push_back({{"id", a.id}, {"type", a.type}, {"planned", a.planned}, {"successes", a.successes},
                            {"failures", a.failures}, {"incomplete", a.incomplete()}, {a.value_name, a.value},
                            {"elapsed_s", a.elapsed}, {"resources_consumed", a.resources},
                            {"failure_reasons", a.failure_reasons}});
        }
        s["apps"] = list;
        s["audit"] = {{"clean", audit.clean()}, {"consumptions", audit.consumptions}, {"services", audit.services},
                      {"bad_owner_state", audit.bad_owner_state}, {"double_use", audit.double_use},
                      {"uncovered_service", audit.uncovered_service}};
        if (timing) {
            s["timing"] = {{"joint", timing->joint}, {"p_latency", timing->p_latency},
                           {"p_coherent", timing->p_coherent}, {"meets_target", timing->meets_target}};
        }
        return s;
    }
};

namespace detail {

inline void derive_metrics(const Scenario& sc, const protocol::Network& net, RunOutput& out, Metrics& m) {
    for (const auto& id : sc.topology.node_ids()) {
        const auto used = m.get("qubits_used." + id);
        if (used && *used > 0) {
            m.set("decoherence_failure_rate." + id, m.value_or("decoherence_failures." + id, 0.0) / *used, "1");
        }
    }
    const bool has_qkd = std::any_of(sc.apps.begin(), sc.apps.end(),
                                     [](const AppSpec& a) { return std::holds_alternative<QkdApp>(a); });
    if (has_qkd) {
        m.set("secret_key_rate", m.value_or("qkd.key_bits", 0.0) / out.until, "bits/s");
        const double sifted = m.value_or("qkd.sifted_bits", 0.0);
        const double delivered = m.value_or("qkd.delivered_pairs", 0.0);
        if (sifted > 0) m.set("qber", m.value_or("qkd.sifted_errors", 0.0) / sifted, "1");
        if (delivered > 0) m.set("sift_discard_rate", 1.0 - sifted / delivered, "1");
        const double sac = m.value_or("qkd.sacrificed_bits", 0.0);
        if (sac > 0) m.set("qber_estimate", m.value_or("qkd.sacrificed_errors", 0.0) / sac, "1");
    }

    const auto& lat = m.series("pair_delivery_latency");
    if (!lat.empty()) {
        std::vector<double> budgets;
        for (const auto& [id, e] : net.ledger().entries()) {
            for (const auto& [holder, clock] : e.qubits) {
                if (net::is_user(sc.topology.node(holder).kind)) budgets.push_back(clock.budget);
            }
        }
        if (!budgets.empty()) {
            TimingBudget tb{sc.timing.t_d, sc.protocol.f_min, sc.timing.reliability_target};
            out.timing = eval_timing(lat, empirical_survival(budgets), tb);
            m.set("timing.joint", out.timing->joint, "1");
            m.set("timing.p_latency", out.timing->p_latency, "1");
            m.set("timing.p_coherent", out.timing->p_coherent, "1");
            m.set("timing.meets_target", out.timing->meets_target ? 1.0 : 0.0, "bool");
        }
    }

    for (const auto& a : out.apps) {
        const std::string p = "app." + a.type + "." + a.id + ".";
        m.set(p + "planned", a.planned, "count");
        m.set(p + "successes", a.successes, "count");
        m.set(p + "failures", a.failures + a.incomplete(), "count");
        m.set(p + a.value_name, a.value, a.value_unit);
        m.set(p + "elapsed_s", a.elapsed, "s");
        m.set(p + "resources_consumed", a.resources, "count");
    }
}

}  // namespace detail

/// One replication. `until` defaults to the scenario duration; zero runs nothing.
inline RunOutput run_scenario(const Scenario& sc, const RunOptions& opt = {}) {
    RunOutput out;
    out.run_id = sc.name;
    out.seed = opt.seed.value_or(sc.seed);
    out.until = opt.until.value_or(sc.duration);
    if (!(out.until >= 0.0)) throw ConfigError("run: --until must be non-negative");

    Simulator sim(out.seed);
    protocol::Network net(sim, sc.topology, sc.protocol);
    std::vector<std::unique_ptr<detail::AppDriver>> drivers;
    for (const auto& a : sc.apps) drivers.push_back(detail::make_driver(net, a));

    if (out.until > 0.0) {
        if (sc.policy.proactive) {
            for (const auto& b : sc.policy.buffers) net.enable_proactive(b);
        }
        for (auto& d : drivers) d->start();
        out.events = sim.run_until(out.until).executed;
        net.finalize();
        for (const auto& d : drivers) {
            auto t = d->tally();
            if (d->start_time() > out.until) t.planned = t.successes + t.failures;  // never began
            out.apps.push_back(std::move(t));
        }
        detail::derive_metrics(sc, net, out, sim.metrics());
    }
    out.trace = sim.trace();
    out.metrics = sim.metrics();
    out.audit = audit_trace(out.trace, sc.topology);
    return out;
}

inline void write_timing_curve(std::ostream& os, const TimingEvaluation& ev) {
    os << "t,p_latency_within,survival\n";
    for (const auto& p : ev.curve) {
        os << format_number(p.t) << ',' << format_number(p.p_latency_within) << ',' << format_number(p.survival)
           << '\n';
    }
}

/// Writes metrics.csv, trace.jsonl, summary.json and (when available) timing_curves.csv.
inline void write_outputs(const RunOutput& out, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + (dir / name).string());
        return f;
    };
    {
        auto f = open("metrics.csv");
        out.metrics.write_csv(f, out.run_id, out.seed);
    }
    {
        auto f = open("trace.jsonl");
        out.trace.write_jsonl(f);
    }
    {
        auto f = open("summary.json");
        f << out.summary().dump(2) << '\n';
    }
    if (out.timing) {
        auto f = open("timing_curves.csv");
        write_timing_curve(f, *out.timing);
    }
}

}  // namespace oneq::scenario
