"""Shared host database: the one store the host registry, host profiler,
and security governor all read and write.

Mutation happens only under the owning governor's lock; the values held
are immutable, so readers always see complete records.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..domain import ExecutionReport, HostProfile


@dataclass
class HostDatabase:
    hosts: dict[str, HostProfile] = field(default_factory=dict)
    reports: list[ExecutionReport] = field(default_factory=list)
    seen_report_ids: set[str] = field(default_factory=set)

    def reports_for_host(self, host_id: str, window: int | None = None) -> list[ExecutionReport]:
        matching = [r for r in self.reports if r.host_id == host_id]
        return _windowed(matching, window)

    def reports_for_service(self, service_id: str, window: int | None = None) -> list[ExecutionReport]:
        matching = [r for r in self.reports if r.service_id == service_id]
        return _windowed(matching, window)


def _windowed(reports: list[ExecutionReport], window: int | None) -> list[ExecutionReport]:
    if window is None:
        return reports
    if window <= 0:  # [-0:] would be the whole list
        return []
    return reports[-window:]
