"""Engine determinism, causality, baseline comparison, trace checking."""
import pytest

from conftest import scenario_dict, service_dict
from momcc.engine import CLOUD_HOST_ID, percentile, run_scenario
from momcc.scenario import (
    MODE_WAN_CLOUD,
    ScenarioValidationError,
    scenario_from_dict,
)
from momcc.wire import MessageKind, decode_envelope


class TestDeterminism:
    def test_same_seed_same_scenario_byte_identical_reports(self):
        a = run_scenario(scenario_from_dict(scenario_dict(seed=9)))
        b = run_scenario(scenario_from_dict(scenario_dict(seed=9)))
        assert a.report.to_json_bytes() == b.report.to_json_bytes()
        assert a.trace_lines() == b.trace_lines()

    def test_different_seeds_diverge(self):
        a = run_scenario(scenario_from_dict(scenario_dict(seed=1)))
        b = run_scenario(scenario_from_dict(scenario_dict(seed=2)))
        assert a.report.to_json_bytes() != b.report.to_json_bytes()


class TestCausality:
    def test_no_message_delivered_before_sent(self):
        result = run_scenario(scenario_from_dict(scenario_dict(seed=5)))
        assert result.trace
        for record in result.trace:
            assert record.received_at >= record.sent_at

    def test_transport_delay_stays_within_its_class_range(self):
        """Every delivery pays a delay sampled from its link class."""
        scenario = scenario_from_dict(scenario_dict(seed=5))
        result = run_scenario(scenario)
        for record in result.trace:
            delay = record.received_at - record.sent_at
            if "governor" in (record.sender, record.recipient):
                low, high = scenario.latency.governor_ms
            elif CLOUD_HOST_ID in (record.sender, record.recipient):
                low, high = scenario.latency.wan_ms
            else:
                low, high = scenario.latency.wlan_ms
            assert low <= delay <= high, (record.sender, record.recipient, delay)

    def test_wan_class_applies_to_cloud_deliveries(self):
        scenario = scenario_from_dict(scenario_dict(seed=5, mode=MODE_WAN_CLOUD))
        result = run_scenario(scenario)
        cloud_hops = [
            r for r in result.trace
            if CLOUD_HOST_ID in (r.sender, r.recipient) and "governor" not in (r.sender, r.recipient)
        ]
        assert cloud_hops
        for record in cloud_hops:
            delay = record.received_at - record.sent_at
            low, high = scenario.latency.wan_ms
            assert low <= delay <= high

    def test_replies_reuse_request_correlation(self):
        result = run_scenario(scenario_from_dict(scenario_dict(seed=5)))
        requests = {}
        pairs = [
            (MessageKind.DISCOVERY_QUERY, MessageKind.DISCOVERY_REPLY),
            (MessageKind.LIST_SERVICES_REQUEST, MessageKind.LIST_SERVICES_REPLY),
        ]
        for record in result.trace:
            requests.setdefault(record.message.kind, set()).add(record.message.correlation_id)
        for request_kind, reply_kind in pairs:
            for correlation in requests.get(reply_kind, set()):
                assert correlation in requests.get(request_kind, set())


class TestModes:
    def test_zero_requesters_reports_no_demand(self):
        data = scenario_dict(requesters=[])
        report = run_scenario(scenario_from_dict(data)).report
        assert report.demand_events == 0
        assert report.invocations_total == 0
        assert report.to_json_dict()["availability"] == "no demand"

    def test_marketplace_beats_wan_latency_on_same_seed(self):
        momcc_report = run_scenario(scenario_from_dict(scenario_dict(seed=21))).report
        wan_report = run_scenario(
            scenario_from_dict(scenario_dict(seed=21, mode=MODE_WAN_CLOUD))
        ).report
        assert momcc_report.latency_mean_ms is not None
        assert wan_report.latency_mean_ms is not None
        assert momcc_report.latency_mean_ms < wan_report.latency_mean_ms

    def test_wan_mode_availability_is_always_one(self):
        for seed in (1, 2, 3):
            report = run_scenario(
                scenario_from_dict(scenario_dict(seed=seed, mode=MODE_WAN_CLOUD))
            ).report
            assert report.availability == 1.0

    def test_wan_mode_routes_to_single_cloud_endpoint(self):
        result = run_scenario(scenario_from_dict(scenario_dict(seed=4, mode=MODE_WAN_CLOUD)))
        invoke_targets = {
            record.recipient
            for record in result.trace
            if record.message.kind == MessageKind.INVOKE
        }
        assert invoke_targets == {CLOUD_HOST_ID}
        assert result.report.allocations_confirmed == 0  # provisioning bypasses admission

    def test_wan_mode_still_meters_and_conserves(self):
        result = run_scenario(scenario_from_dict(scenario_dict(seed=4, mode=MODE_WAN_CLOUD)))
        assert result.governor.billing.total_metered() > 0
        assert result.governor.check_invariants() == []


class TestTraceConformance:
    def test_run_with_allocations_has_conforming_traces(self):
        result = run_scenario(scenario_from_dict(scenario_dict(seed=6)))
        verdicts = result.allocation_verdicts()
        assert verdicts
        assert all(ok for _, _, ok in verdicts)
        assert result.report.trace_violations == 0

    def test_empty_run_zero_traces_zero_violations(self):
        data = scenario_dict(hosts=[], requesters=[])
        result = run_scenario(scenario_from_dict(data))
        assert result.allocation_verdicts() == []
        assert result.report.trace_violations == 0

    def test_injected_fault_is_counted(self):
        """Negative control: drop the SC step via the test hook."""
        from momcc.engine import Simulation

        sim = Simulation(scenario_from_dict(scenario_dict(seed=6)))
        sim.governor.hosts.trace_filter = lambda trace: tuple(
            k for k in trace if k != MessageKind.SC_QUERY
        )
        result = sim.run()
        assert result.report.trace_violations > 0

    def test_trace_log_lines_decode_as_envelopes(self):
        result = run_scenario(scenario_from_dict(scenario_dict(seed=6)))
        lines = result.trace_lines()
        assert lines
        for line in lines[:50]:
            decode_envelope(line)


class TestScenarioValidationSurface:
    def test_negative_duration_is_named(self):
        data = scenario_dict()
        data["duration_hours"] = -1
        with pytest.raises(ScenarioValidationError) as err:
            scenario_from_dict(data)
        assert any("duration_hours" in d for d in err.value.diagnostics)

    def test_all_violations_reported_at_once(self):
        data = scenario_dict()
        data["duration_hours"] = -1
        data["seed"] = -5
        with pytest.raises(ScenarioValidationError) as err:
            scenario_from_dict(data)
        assert len(err.value.diagnostics) == 2

    def test_unknown_dependency_rejected(self):
        data = scenario_dict(services=[service_dict(dependencies=["svc-ghost"])])
        with pytest.raises(ScenarioValidationError) as err:
            scenario_from_dict(data)
        assert any("svc-ghost" in d for d in err.value.diagnostics)

    def test_aggregator_must_reference_composite(self):
        data = scenario_dict(
            aggregators=[{
                "count": 1, "composite_service_id": "svc-resize",
                "capacity": {"cpu": 512, "memory": 8, "storage": 8, "energy": 300},
                "battery_mwh": 1000, "platform_os": "Android", "platform_version": "4.0",
            }],
        )
        with pytest.raises(ScenarioValidationError) as err:
            scenario_from_dict(data)
        assert any("composite" in d for d in err.value.diagnostics)


class TestPseudonymity:
    def test_report_pseudonyms_never_equal_requester_identities(self):
        result = run_scenario(scenario_from_dict(scenario_dict(seed=19)))
        identities = set(result.requester_ids)
        reports = result.governor.host_db.reports
        assert reports
        for report in reports:
            assert report.requester_pseudonym not in identities
            assert report.requester_pseudonym.startswith("anon-")

    def test_pseudonyms_injective_within_a_run(self):
        """Each requester keeps one pseudonym; no two share one."""
        result = run_scenario(scenario_from_dict(scenario_dict(seed=19)))
        pseudonym_to_sender: dict[str, set] = {}
        for record in result.trace:
            if record.message.kind == MessageKind.DISCOVERY_QUERY:
                pseudonym = record.message.payload["requester_pseudonym"]
                pseudonym_to_sender.setdefault(pseudonym, set()).add(record.sender)
        assert pseudonym_to_sender
        for senders in pseudonym_to_sender.values():
            assert len(senders) == 1
        senders_seen = [next(iter(s)) for s in pseudonym_to_sender.values()]
        assert len(senders_seen) == len(set(senders_seen))


class TestChurnAndEnergy:
    def test_battery_drain_matches_reported_energy(self):
        data = scenario_dict(seed=13, duration_hours=2.0)
        result = run_scenario(scenario_from_dict(data))
        sim_hosts = result.governor.host_db.hosts
        for host_id, profile in sim_hosts.items():
            used = sum(
                r.energy_used_mwh for r in result.governor.host_db.reports
                if r.host_id == host_id
            )
            assert profile.battery_mwh == max(0, 20000 - used)

    def test_churn_removes_supply(self):
        data = scenario_dict(
            seed=2,
            duration_hours=4.0,
            hosts=[{
                "count": 1,
                "capacity": {"cpu": 2048, "memory": 32, "storage": 64, "energy": 1500},
                "battery_mwh": 20000, "platform_os": "Android", "platform_version": "4.0",
                "departure_rate": 2.0, "failure_prob": 0.0,
            }],
            requesters=[{"count": 1, "demand_rate": 10, "query_pool": ["image"]}],
        )
        report = run_scenario(scenario_from_dict(data)).report
        assert report.unavailable_events > 0
        assert report.availability < 1.0

    def test_exhausted_battery_departs_host(self):
        # 1 host, battery for exactly 3 executions of the 500 mWh service.
        data = scenario_dict(
            seed=8,
            duration_hours=3.0,
            hosts=[{
                "count": 1,
                "capacity": {"cpu": 2048, "memory": 32, "storage": 64, "energy": 1500},
                "battery_mwh": 1500, "platform_os": "Android", "platform_version": "4.0",
                "departure_rate": 0.0, "failure_prob": 0.0,
            }],
            requesters=[{"count": 1, "demand_rate": 20, "query_pool": ["image"]}],
        )
        result = run_scenario(scenario_from_dict(data))
        profile = result.governor.host_db.hosts["host-000"]
        assert not profile.alive
        assert result.report.energy_mwh == 1500
        assert result.report.unavailable_events > 0


class TestSubstitutionInFlight:
    def substitution_scenario(self):
        """One doomed service pinned to a failing host, a healthy same-tag
        alternative on reliable hosts; resource shapes force the split."""
        return scenario_dict(
            seed=77,
            duration_hours=2.0,
            services=[
                service_dict(service_id="svc-aa-doomed", name="flaky reader",
                             description="ocr, first generation",
                             functionality_tag="ocr",
                             min_resources={"cpu": 900, "memory": 2, "storage": 2, "energy": 100},
                             price=500),
                service_dict(service_id="svc-solid", name="solid reader",
                             description="ocr, second generation",
                             functionality_tag="ocr",
                             min_resources={"cpu": 300, "memory": 2, "storage": 2, "energy": 100},
                             price=500),
            ],
            hosts=[
                # Fits only the doomed service, and fails every execution.
                {"count": 1, "capacity": {"cpu": 1000, "memory": 8, "storage": 8, "energy": 500},
                 "battery_mwh": 10**6, "platform_os": "Android", "platform_version": "4.0",
                 "departure_rate": 0.0, "failure_prob": 1.0},
                # Fit only the replacement, and never fail.
                {"count": 2, "capacity": {"cpu": 400, "memory": 8, "storage": 8, "energy": 500},
                 "battery_mwh": 10**6, "platform_os": "Android", "platform_version": "4.0",
                 "departure_rate": 0.0, "failure_prob": 0.0},
            ],
            requesters=[{"count": 1, "demand_rate": 20, "query_pool": ["ocr"]}],
            policies={"profiler": {"failure_threshold": 0.3, "window": 5,
                                   "sweep_interval_hours": 0.5}},
        )

    def test_sweep_reroutes_live_traffic_to_replacement(self):
        result = run_scenario(scenario_from_dict(self.substitution_scenario()))
        report = result.report
        assert report.sweeps, "the failing service was never swept"
        sweep = report.sweeps[0]
        assert sweep["deprecated"] == "svc-aa-doomed"
        assert sweep["replacement"] == "svc-solid"
        # Before the sweep requesters bound to the doomed service; after it
        # only the replacement serves, so successes resume.
        sweep_at = sweep["at_ms"]
        reports = result.governor.host_db.reports
        after = [r for r in reports if r.started_at > sweep_at]
        assert after
        assert all(r.service_id == "svc-solid" for r in after)
        assert all(r.outcome.ok for r in after)
        # The replacement stayed available throughout.
        assert report.availability == 1.0
        assert result.governor.registry.is_active("svc-solid")
        assert not result.governor.registry.is_active("svc-aa-doomed")

    def test_periodic_assessment_rides_the_sweep_cadence(self):
        result = run_scenario(scenario_from_dict(self.substitution_scenario()))
        assert result.host_assessments
        assessed = [a for a in result.host_assessments if a.assessed]
        assert assessed
        for assessment in assessed:
            assert 0.0 <= assessment.score <= 1.0
        # The always-failing host scores strictly below the reliable ones.
        by_host = {a.host_id: a for a in result.host_assessments}
        if by_host["host-000"].assessed and by_host["host-001"].assessed:
            assert by_host["host-000"].score < by_host["host-001"].score


class TestPolicyPlumbing:
    def test_scenario_policies_reach_the_governor(self):
        data = scenario_dict(
            policies={
                "billing": {"governor_commission": 0.1},
                "trust": {"alpha": 0.2, "promote_medium": [0.4, 5], "promote_high": [0.7, 15]},
                "profiler": {"failure_threshold": 0.5, "window": 7},
                "registry": {"footprint_ceiling": {"cpu": 600, "memory": 8, "storage": 8, "energy": 600}},
                "assessment_weights": [0.6, 0.2, 0.2],
            }
        )
        scenario = scenario_from_dict(data)
        config = scenario.governor_config
        assert config.governor_commission == 0.1
        assert config.trust_policy.alpha == 0.2
        assert config.trust_policy.promote_medium == (0.4, 5)
        assert config.profiler_policy.window == 7
        assert config.footprint_ceiling.cpu == 600
        assert config.assessment_weights == (0.6, 0.2, 0.2)
        # Commission flows into the agreements the run establishes.
        result = run_scenario(scenario)
        agreement = result.governor.billing.agreement_for("svc-resize")
        assert agreement is not None
        assert agreement.governor_commission == 0.1
        assert agreement.host_share == pytest.approx(0.5)

    def test_footprint_ceiling_rejects_oversized_service_at_setup(self):
        data = scenario_dict(
            policies={"registry": {"footprint_ceiling": {"cpu": 100, "memory": 1, "storage": 1, "energy": 100}}}
        )
        from momcc.errors import RegistrationRejected

        with pytest.raises(RegistrationRejected):
            run_scenario(scenario_from_dict(data))


class TestPercentile:
    def test_nearest_rank(self):
        values = [10.0, 20.0, 30.0, 40.0]
        assert percentile(values, 0.50) == 20.0
        assert percentile(values, 0.95) == 40.0
        assert percentile([7.0], 0.95) == 7.0

    def test_matches_sort_index_oracle(self):
        import math
        import random as rnd

        rng = rnd.Random(1)
        for _ in range(100):
            values = [rng.random() for _ in range(rng.randint(1, 50))]
            for q in (0.5, 0.9, 0.95):
                expected = sorted(values)[max(1, math.ceil(q * len(values))) - 1]
                assert percentile(values, q) == expected
