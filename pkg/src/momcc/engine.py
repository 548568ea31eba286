"""Deterministic discrete-event simulation of the marketplace.

One run is a pure function of (scenario, seed). The event queue is
totally ordered by (time, sequence number); every agent draws randomness
from its own stream seeded by (scenario seed, agent id), so adding
agents never perturbs the behavior of existing ones. Latency is sampled
per message from the scenario's class ranges; messages to and from the
governor pay the governor-class delay, so discovery cost is visible.

Two modes:

    momcc       the marketplace: mobile hosts, churn, admission, trust.
    wan_cloud   the baseline: every invocation routes to one always-on
                cloud endpoint over the WAN latency class, bypassing
                host agents entirely.

The recorded per-invocation latency is the sampled network transport
delay of the Invoke hop (the distance-to-service cost the two modes
differ in); execution time is tracked separately in reports.
"""
from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass

from .agents import (
    AggregatorAgent,
    AggregatorConfig,
    HostAgent,
    HostAgentConfig,
    Outbound,
    RequesterAgent,
)
from .domain import ExecutionReport, Outcome, ResourceVector
from .errors import UnknownEntityError
from .governor import ServiceGovernor
from .governor.registry import service_to_dict
from .scenario import MODE_WAN_CLOUD, Scenario
from .wire import MessageKind, ProtocolMessage, Role, envelope_dict

CLOUD_HOST_ID = "cloud-host"
GOVERNOR_ID = "governor"

_CLOUD_CAPACITY = ResourceVector(10**9, 10**9, 10**9, 10**9)
_CLOUD_BATTERY = 10**15


@dataclass
class MetricsReport:
    """Everything one run measured, serializable byte-identically."""

    format_version: int
    mode: str
    seed: int
    duration_hours: float
    demand_events: int
    unavailable_events: int
    availability: float | None
    invocations_total: int
    invocations_succeeded: int
    invocations_failed: int
    latency_mean_ms: float | None
    latency_p50_ms: float | None
    latency_p95_ms: float | None
    energy_mwh: int
    revenue: dict[str, int]
    trust_levels: dict[str, int]
    allocations_confirmed: int
    allocations_denied: int
    trace_violations: int
    sweeps: list[dict]
    escalations: int

    def to_json_dict(self) -> dict:
        availability: float | str | None = self.availability
        if self.demand_events == 0:
            availability = "no demand"
        return {
            "format_version": self.format_version,
            "mode": self.mode,
            "seed": self.seed,
            "duration_hours": self.duration_hours,
            "demand_events": self.demand_events,
            "unavailable_events": self.unavailable_events,
            "availability": availability,
            "invocations": {
                "total": self.invocations_total,
                "succeeded": self.invocations_succeeded,
                "failed": self.invocations_failed,
            },
            "latency_ms": (
                None
                if self.latency_mean_ms is None
                else {
                    "mean": self.latency_mean_ms,
                    "p50": self.latency_p50_ms,
                    "p95": self.latency_p95_ms,
                }
            ),
            "energy_mwh": self.energy_mwh,
            "revenue": self.revenue,
            "trust_levels": self.trust_levels,
            "allocations": {
                "confirmed": self.allocations_confirmed,
                "denied": self.allocations_denied,
            },
            "trace_violations": self.trace_violations,
            "sweeps": self.sweeps,
            "escalations": self.escalations,
        }

    def to_json_bytes(self) -> bytes:
        return (json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n").encode("utf-8")

    def to_csv_rows(self) -> list[list[str]]:
        flat = _flatten(self.to_json_dict())
        rows = [["key", "value"]]
        for key in sorted(flat):
            rows.append([key, str(flat[key])])
        return rows


def _flatten(obj, prefix: str = "") -> dict[str, object]:
    out: dict[str, object] = {}
    if isinstance(obj, dict):
        for key, value in obj.items():
            out.update(_flatten(value, f"{prefix}{key}."))
    elif isinstance(obj, list):
        out[prefix.rstrip(".")] = json.dumps(obj, sort_keys=True)
    else:
        out[prefix.rstrip(".")] = obj
    return out


def percentile(values: list[float], q: float) -> float:
    """Nearest-rank percentile over a non-empty list."""
    ordered = sorted(values)
    rank = max(1, math.ceil(q * len(ordered)))
    return ordered[rank - 1]


@dataclass
class TraceRecord:
    sent_at: float
    received_at: float
    sender: str
    recipient: str
    message: ProtocolMessage

    def to_line(self) -> str:
        record = envelope_dict(self.message)
        record["ts"] = round(self.sent_at, 3)
        record["tr"] = round(self.received_at, 3)
        record["from"] = self.sender
        record["to"] = self.recipient
        return json.dumps(record, sort_keys=True, separators=(",", ":"))


@dataclass
class SimulationResult:
    report: MetricsReport
    governor: ServiceGovernor
    trace: list[TraceRecord]
    requester_ids: tuple[str, ...]
    host_assessments: list

    def allocation_verdicts(self) -> list[tuple[str, str, bool]]:
        """(host_id, service_id, conforms) for every recorded allocation."""
        return [
            (d.host_id, d.service_id, d.conforms())
            for d in self.governor.hosts.decisions
        ]

    def trace_lines(self) -> list[str]:
        return [record.to_line() for record in self.trace]


class Simulation:
    """One seeded run; construct, call run(), read the result."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.now = 0.0
        self._queue: list[tuple[float, int, object]] = []
        self._seq = 0
        self._id_seq = 0
        self.latency_rng = random.Random(f"{scenario.seed}/latency")
        self.master_rng = random.Random(f"{scenario.seed}/master")
        self.governor = ServiceGovernor(scenario.governor_config)
        self.trace: list[TraceRecord] = []
        self.latencies: list[float] = []
        self.invocations_total = 0
        self.invocations_succeeded = 0
        self.invocations_failed = 0
        self.sweep_actions: list[dict] = []
        self.host_assessments: list = []  # latest periodic efficiency scores
        self.hosts: dict[str, HostAgent] = {}
        self.aggregators: dict[str, AggregatorAgent] = {}
        self.requesters: dict[str, RequesterAgent] = {}
        self._pending_ratings: dict[str, dict] = {}  # correlation -> report payload or rating
        self._setup()

    # -- identifiers ------------------------------------------------------

    def next_id(self, prefix: str) -> str:
        self._id_seq += 1
        return f"{prefix}-{self._id_seq:06d}"

    def _pseudonym(self, taken: set[str]) -> str:
        while True:
            candidate = "anon-" + "".join(
                self.master_rng.choice("0123456789abcdef") for _ in range(12)
            )
            if candidate not in taken:
                taken.add(candidate)
                return candidate

    # -- setup ------------------------------------------------------------

    def _setup(self) -> None:
        sc = self.scenario
        wan_mode = sc.baseline_mode == MODE_WAN_CLOUD

        for desc in sc.services:
            self.governor.billing.negotiate_developer(
                desc.developer_id, desc.price_per_invocation, desc.developer_share
            )
            self.governor.registry.register_service(desc)

        taken_pseudonyms: set[str] = set()

        if wan_mode:
            self._setup_cloud()
        else:
            index = 0
            for entry in sc.hosts:
                for _ in range(entry.count):
                    agent_id = f"host-{index:03d}"
                    index += 1
                    config: HostAgentConfig = entry.config
                    agent = HostAgent(
                        agent_id,
                        config,
                        random.Random(f"{sc.seed}/host/{agent_id}"),
                        self.next_id,
                        exec_ms=sc.exec_ms,
                    )
                    self.hosts[agent_id] = agent
                    self.governor.hosts.register_host(
                        agent_id, config.platform_os, config.platform_version,
                        config.capacity, config.battery_mwh,
                    )
                    self._schedule(0.0, ("join", agent_id))
                    delay = agent.next_departure_delay_ms()
                    if delay is not None:
                        self._schedule(delay, ("depart", agent_id))

            index = 0
            for entry in sc.aggregators:
                for _ in range(entry.count):
                    agent_id = f"agg-{index:03d}"
                    index += 1
                    config: AggregatorConfig = entry.config
                    composite = next(
                        d for d in sc.services if d.service_id == config.composite_service_id
                    )
                    dep_names = {
                        d.service_id: d.name for d in sc.services
                        if d.service_id in composite.dependencies
                    }
                    agent = AggregatorAgent(
                        agent_id,
                        config,
                        random.Random(f"{sc.seed}/agg/{agent_id}"),
                        self.next_id,
                        pseudonym=self._pseudonym(taken_pseudonyms),
                        dependency_names=dep_names,
                        exec_ms=sc.exec_ms,
                    )
                    agent.attach_composite(composite)
                    self.aggregators[agent_id] = agent
                    self.governor.hosts.register_host(
                        agent_id, config.platform_os, config.platform_version,
                        config.capacity, config.battery_mwh,
                    )
                    self._schedule(0.0, ("join", agent_id))

        index = 0
        for entry in sc.requesters:
            for _ in range(entry.count):
                agent_id = f"req-{index:03d}"
                index += 1
                agent = RequesterAgent(
                    agent_id,
                    entry.config,
                    random.Random(f"{sc.seed}/req/{agent_id}"),
                    self.next_id,
                    pseudonym=self._pseudonym(taken_pseudonyms),
                )
                self.requesters[agent_id] = agent
                delay = agent.next_demand_delay_ms()
                if delay is not None:
                    self._schedule(delay, ("demand", agent_id))

        sweep_ms = sc.sweep_interval_hours * 3_600_000.0
        if not wan_mode:
            self._schedule(sweep_ms, ("sweep", sweep_ms))

    def _setup_cloud(self) -> None:
        sc = self.scenario
        config = HostAgentConfig(
            capacity=_CLOUD_CAPACITY,
            battery_mwh=_CLOUD_BATTERY,
            platform_os="cloud",
            platform_version="1",
            greediness="max_revenue",
            departure_rate=0.0,
            failure_prob=0.0,
        )
        agent = HostAgent(
            CLOUD_HOST_ID, config,
            random.Random(f"{sc.seed}/cloud"), self.next_id, exec_ms=sc.exec_ms,
        )
        self.hosts[CLOUD_HOST_ID] = agent
        self.governor.hosts.register_host(
            CLOUD_HOST_ID, "cloud", "1", _CLOUD_CAPACITY, _CLOUD_BATTERY
        )
        service_ids = [d.service_id for d in sc.services]
        self.governor.preprovision_host(CLOUD_HOST_ID, service_ids, identity_verified=True)
        for desc in sc.services:
            agent.hosted[desc.service_id] = desc

    # -- scheduling ---------------------------------------------------------

    def _schedule(self, at: float, event: object) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (at, self._seq, event))

    def _latency_class(self, sender: str, recipient: str, requested: str) -> str:
        if requested == "wlan" and CLOUD_HOST_ID in (sender, recipient):
            return "wan"
        return requested

    def _send(self, sender: str, outbound: Outbound) -> None:
        cls = self._latency_class(sender, outbound.to, outbound.latency_class)
        low, high = self.scenario.latency.range_for(cls)
        transport = self.latency_rng.uniform(low, high)
        sent_at = self.now + outbound.delay_ms
        received_at = sent_at + transport
        if outbound.message.kind == MessageKind.INVOKE:
            self.invocations_total += 1
            self.latencies.append(transport)
        self._schedule(
            received_at,
            ("deliver", TraceRecord(sent_at, received_at, sender, outbound.to, outbound.message)),
        )

    # -- the event loop -------------------------------------------------------

    def run(self) -> SimulationResult:
        deadline = self.scenario.duration_ms
        while self._queue:
            at, _, event = heapq.heappop(self._queue)
            if at > deadline:
                continue  # drains the queue; nothing fires past the horizon
            self.now = at
            kind = event[0]
            if kind == "deliver":
                self._on_deliver(event[1])
            elif kind == "join":
                self._on_join(event[1])
            elif kind == "demand":
                self._on_demand(event[1])
            elif kind == "depart":
                self._on_depart(event[1])
            elif kind == "sweep":
                self._on_sweep(event[1])
        self._flush_pending_reports()
        return SimulationResult(
            report=self._build_report(),
            governor=self.governor,
            trace=self.trace,
            requester_ids=tuple(sorted(self.requesters)),
            host_assessments=self.host_assessments,
        )

    def _on_join(self, agent_id: str) -> None:
        agent = self.hosts.get(agent_id) or self.aggregators.get(agent_id)
        if agent is None or not agent.alive:
            return
        for outbound in agent.join(self.now):
            self._send(agent_id, outbound)

    def _on_demand(self, agent_id: str) -> None:
        agent = self.requesters[agent_id]
        for outbound in agent.on_demand(self.now):
            self._send(agent_id, outbound)
        delay = agent.next_demand_delay_ms()
        if delay is not None:
            self._schedule(self.now + delay, ("demand", agent_id))

    def _on_depart(self, agent_id: str) -> None:
        agent = self.hosts.get(agent_id)
        if agent is None or not agent.alive:
            return
        agent.depart()
        self.governor.hosts.mark_departed(agent_id)

    def _on_sweep(self, interval_ms: float) -> None:
        for action in self.governor.profiler.substitution_sweep():
            self.sweep_actions.append({
                "at_ms": round(self.now, 3),
                "deprecated": action.deprecated_id,
                "replacement": action.replacement_id,
            })
        # The periodic efficiency assessment rides the same cadence.
        self.host_assessments = self.governor.hosts.assess_hosts(
            self.scenario.governor_config.profiler_policy.window
        )
        self._schedule(self.now + interval_ms, ("sweep", interval_ms))

    def _on_deliver(self, record: TraceRecord) -> None:
        self.trace.append(record)
        recipient = record.recipient
        msg = record.message

        if msg.kind == MessageKind.INVOKE_RESULT:
            if msg.payload.get("ok"):
                self.invocations_succeeded += 1
            else:
                self.invocations_failed += 1

        if recipient == GOVERNOR_ID:
            for outbound in self._governor_handle(msg, record.sender):
                self._send(GOVERNOR_ID, outbound)
            return

        agent = (
            self.hosts.get(recipient)
            or self.aggregators.get(recipient)
            or self.requesters.get(recipient)
        )
        if agent is None:
            return
        if isinstance(agent, (HostAgent, AggregatorAgent)) and not agent.alive:
            if msg.kind == MessageKind.INVOKE:
                self._bounce_invoke(record)
            return
        for outbound in agent.handle(msg, record.sender, self.now):
            self._send(recipient, outbound)
        if isinstance(agent, HostAgent) and agent.alive and agent.battery_exhausted:
            self._on_depart(recipient)

    def _bounce_invoke(self, record: TraceRecord) -> None:
        # Transport-level failure reply for a departed endpoint.
        reply = ProtocolMessage(
            kind=MessageKind.INVOKE_RESULT,
            sender_role=Role.HOST,
            correlation_id=record.message.correlation_id,
            payload={
                "service_id": record.message.payload["service_id"],
                "ok": False,
                "reason": "host_unreachable",
            },
        )
        self._send(record.recipient, Outbound(to=record.sender, latency_class="wlan", message=reply))

    # -- governor message handling ------------------------------------------

    def _governor_handle(self, msg: ProtocolMessage, sender: str) -> list[Outbound]:
        if msg.kind == MessageKind.LIST_SERVICES_REQUEST:
            return self._gov_list_services(msg, sender)
        if msg.kind == MessageKind.HOSTING_REQUEST:
            return self._gov_hosting(msg, sender)
        if msg.kind == MessageKind.DISCOVERY_QUERY:
            return self._gov_discovery(msg, sender)
        if msg.kind == MessageKind.EXECUTION_REPORT:
            return self._gov_report(msg)
        if msg.kind == MessageKind.RATE_SERVICE:
            return self._gov_rating(msg)
        return []

    def _gov_list_services(self, msg: ProtocolMessage, sender: str) -> list[Outbound]:
        p = msg.payload
        services = self.governor.registry.list_available_services(
            ResourceVector(**p["free"]), p["platform_os"], p["platform_version"]
        )
        reply = ProtocolMessage(
            kind=MessageKind.LIST_SERVICES_REPLY,
            sender_role=Role.GOVERNOR,
            correlation_id=msg.correlation_id,
            payload={"services": [service_to_dict(d) for d in services]},
        )
        return [Outbound(to=sender, latency_class="governor", message=reply)]

    def _gov_hosting(self, msg: ProtocolMessage, sender: str) -> list[Outbound]:
        p = msg.payload
        decision = self.governor.request_hosting(
            p["host_id"], p["service_id"],
            identity_verified=p.get("identity_verified", False),
            at=self.now,
        )
        kind = MessageKind.ALLOCATION_CONFIRM if decision.confirmed else MessageKind.ALLOCATION_DENIED
        payload = {"host_id": p["host_id"], "service_id": p["service_id"]}
        if not decision.confirmed:
            payload["reason"] = decision.reason
        reply = ProtocolMessage(
            kind=kind,
            sender_role=Role.GOVERNOR,
            correlation_id=msg.correlation_id,
            payload=payload,
        )
        return [Outbound(to=sender, latency_class="governor", message=reply)]

    def _gov_discovery(self, msg: ProtocolMessage, sender: str) -> list[Outbound]:
        from dataclasses import asdict

        results = self.governor.registry.discover(
            msg.payload["query"], msg.payload["requester_pseudonym"]
        )
        entries = []
        for result in results:
            listing = asdict(result.listing)
            listing["min_resources"] = result.listing.min_resources.as_dict()
            listing["dependencies"] = list(result.listing.dependencies)
            entries.append({"service": listing, "hosts": list(result.hosts)})
        reply = ProtocolMessage(
            kind=MessageKind.DISCOVERY_REPLY,
            sender_role=Role.GOVERNOR,
            correlation_id=msg.correlation_id,
            payload={"results": entries},
        )
        return [Outbound(to=sender, latency_class="governor", message=reply)]

    def _gov_report(self, msg: ProtocolMessage) -> list[Outbound]:
        p = msg.payload
        if p["ok"]:
            # Successful reports wait for the consumer's rating message so
            # the trust update sees outcome and rating as one observation.
            pending = self._pending_ratings.get(msg.correlation_id)
            if pending is not None and "rating" in pending:
                self._ingest(p, pending["rating"])
                del self._pending_ratings[msg.correlation_id]
            else:
                self._pending_ratings[msg.correlation_id] = {"report": p}
            return []
        self._ingest(p, None)
        self.governor.profiler.report_malfunction(
            p["service_id"],
            detail=f"invocation failed: {p.get('failure_reason') or 'unknown'}",
            at=self.now,
        )
        return []

    def _gov_rating(self, msg: ProtocolMessage) -> list[Outbound]:
        pending = self._pending_ratings.get(msg.correlation_id)
        rating = msg.payload.get("rating")
        if pending is not None and "report" in pending:
            self._ingest(pending["report"], rating)
            del self._pending_ratings[msg.correlation_id]
        else:
            self._pending_ratings[msg.correlation_id] = {"rating": rating}
        return []

    def _ingest(self, report_payload: dict, rating: int | None) -> None:
        p = report_payload
        outcome = Outcome.success() if p["ok"] else Outcome.failure(p["failure_reason"])
        report = ExecutionReport(
            report_id=p["report_id"],
            host_id=p["host_id"],
            service_id=p["service_id"],
            requester_pseudonym=p["requester_pseudonym"],
            started_at=p["started_at"],
            duration_ms=p["duration_ms"],
            energy_used_mwh=p["energy_used_mwh"],
            outcome=outcome,
            rating=rating,
        )
        try:
            self.governor.ingest_report(report)
        except UnknownEntityError:
            pass  # report raced a deregistration; nothing to update

    def _flush_pending_reports(self) -> None:
        # Ratings still in flight at the horizon: ingest unrated.
        for correlation in sorted(self._pending_ratings):
            pending = self._pending_ratings[correlation]
            if "report" in pending:
                self._ingest(pending["report"], None)
        self._pending_ratings.clear()

    # -- reporting ---------------------------------------------------------

    def _build_report(self) -> MetricsReport:
        demand = sum(r.demand_events for r in self.requesters.values())
        unavailable = sum(r.unavailable_events for r in self.requesters.values())
        availability = None if demand == 0 else (demand - unavailable) / demand

        trust_levels = {"none": 0, "Low": 0, "Medium": 0, "High": 0}
        for profile in self.governor.host_db.hosts.values():
            if profile.certificate is None:
                trust_levels["none"] += 1
            else:
                trust_levels[profile.certificate.level.label] += 1

        confirmed = sum(1 for d in self.governor.hosts.decisions if d.confirmed)
        denied = len(self.governor.hosts.decisions) - confirmed

        return MetricsReport(
            format_version=1,
            mode=self.scenario.baseline_mode,
            seed=self.scenario.seed,
            duration_hours=self.scenario.duration_hours,
            demand_events=demand,
            unavailable_events=unavailable,
            availability=None if availability is None else round(availability, 6),
            invocations_total=self.invocations_total,
            invocations_succeeded=self.invocations_succeeded,
            invocations_failed=self.invocations_failed,
            latency_mean_ms=(
                round(sum(self.latencies) / len(self.latencies), 3) if self.latencies else None
            ),
            latency_p50_ms=round(percentile(self.latencies, 0.50), 3) if self.latencies else None,
            latency_p95_ms=round(percentile(self.latencies, 0.95), 3) if self.latencies else None,
            energy_mwh=sum(r.energy_used_mwh for r in self.governor.host_db.reports),
            revenue=self.governor.billing.class_revenue(),
            trust_levels=trust_levels,
            allocations_confirmed=confirmed,
            allocations_denied=denied,
            trace_violations=self.governor.hosts.count_trace_violations(),
            sweeps=self.sweep_actions,
            escalations=len(self.governor.profiler.escalations),
        )


def run_scenario(scenario: Scenario) -> SimulationResult:
    """Build and run one simulation; the only public entry point."""
    return Simulation(scenario).run()
