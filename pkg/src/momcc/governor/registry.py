"""Service registry: the public service repository and discovery point.

Registration vets each service (malware-scan attestation, footprint
ceiling, dependency acyclicity, registered developer) before it becomes
Active. Discovery answers requesters with developer identity stripped,
pairing each match with the live hosts currently running it; hosts
browse the full descriptions instead, filtered to what they can run.
"""
from __future__ import annotations

import threading
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable

from ..domain import PlatformRequirement, ResourceVector, ServiceDescription
from ..errors import RegistrationRejected, UnknownEntityError

DEFAULT_FOOTPRINT_CEILING = ResourceVector(cpu=1024, memory=64, storage=64, energy=1000)


class ServiceStatus(Enum):
    ACTIVE = "Active"
    DEPRECATED = "Deprecated"


@dataclass
class ServiceDatabase:
    services: dict[str, ServiceDescription] = field(default_factory=dict)
    status: dict[str, ServiceStatus] = field(default_factory=dict)
    search_text: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ServiceListing:
    """A discovery result record: the description minus the developer identity."""

    service_id: str
    name: str
    description: str
    functionality_tag: str
    input_spec: str
    output_spec: str
    binding_method: str
    security_level: str
    platform_os: str
    platform_min_version: str
    min_resources: ResourceVector
    price_per_invocation: int
    dependencies: tuple[str, ...]


@dataclass(frozen=True)
class DiscoveryResult:
    listing: ServiceListing
    hosts: tuple[str, ...]


def _listing_of(desc: ServiceDescription) -> ServiceListing:
    return ServiceListing(
        service_id=desc.service_id,
        name=desc.name,
        description=desc.description,
        functionality_tag=desc.functionality_tag,
        input_spec=desc.input_spec,
        output_spec=desc.output_spec,
        binding_method=desc.binding_method,
        security_level=desc.security_level.label,
        platform_os=desc.platform.os_name,
        platform_min_version=desc.platform.min_version,
        min_resources=desc.min_resources,
        price_per_invocation=desc.price_per_invocation,
        dependencies=desc.dependencies,
    )


def has_cycle(edges: dict[str, tuple[str, ...]]) -> bool:
    """Iterative three-color DFS over the dependency graph."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {node: WHITE for node in edges}
    for start in edges:
        if color[start] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(start, 0)]
        color[start] = GRAY
        while stack:
            node, idx = stack.pop()
            deps = [d for d in edges.get(node, ()) if d in edges]
            if idx < len(deps):
                stack.append((node, idx + 1))
                child = deps[idx]
                if color[child] == GRAY:
                    return True
                if color[child] == WHITE:
                    color[child] = GRAY
                    stack.append((child, 0))
            else:
                color[node] = BLACK
    return False


class ServiceRegistry:
    """Linearizable service store: concurrent reads, serialized writes."""

    def __init__(
        self,
        footprint_ceiling: ResourceVector = DEFAULT_FOOTPRINT_CEILING,
        scanner: Callable[[ServiceDescription], bool] | None = None,
        developer_check: Callable[[str], bool] | None = None,
        host_provider: Callable[[str], list[str]] | None = None,
        governor_commission: float = 0.0,
        lock: threading.RLock | None = None,
    ):
        self.db = ServiceDatabase()
        self.footprint_ceiling = footprint_ceiling
        # Pluggable malware-scan hook; the default attests everything.
        self._scanner = scanner or (lambda desc: True)
        self._developer_check = developer_check
        self._host_provider = host_provider or (lambda service_id: [])
        self._governor_commission = governor_commission
        self._lock = lock or threading.RLock()

    # -- registration ---------------------------------------------------

    def register_service(self, desc: ServiceDescription, scan_attestation: bool | None = None) -> str:
        """Vet and store a service as Active.

        Rejection reasons, in check order: developer, duplicate, scan,
        footprint, cycle.
        """
        with self._lock:
            if self._developer_check is not None and not self._developer_check(desc.developer_id):
                raise RegistrationRejected(
                    "developer", f"developer {desc.developer_id!r} not registered with billing"
                )
            if desc.service_id in self.db.services:
                raise RegistrationRejected("duplicate", f"service id {desc.service_id!r} already registered")
            attested = scan_attestation if scan_attestation is not None else self._scanner(desc)
            if not attested:
                raise RegistrationRejected("scan", f"service {desc.service_id!r} failed the code scan")
            if not self.footprint_ceiling.covers(desc.min_resources):
                raise RegistrationRejected(
                    "footprint",
                    f"service {desc.service_id!r} exceeds the footprint ceiling "
                    f"{self.footprint_ceiling.as_dict()}",
                )
            edges = {sid: s.dependencies for sid, s in self.db.services.items()}
            edges[desc.service_id] = desc.dependencies
            if has_cycle(edges):
                raise RegistrationRejected("cycle", f"service {desc.service_id!r} would close a dependency cycle")
            self.db.services[desc.service_id] = desc
            self.db.status[desc.service_id] = ServiceStatus.ACTIVE
            self.db.search_text[desc.service_id] = f"{desc.name} {desc.description}".lower()
            return desc.service_id

    def deprecate_service(self, service_id: str, reason: str = "") -> None:
        """Mark Deprecated: hidden from discovery and hosting listings.

        Hosts already running the service keep it until they unhost.
        There is no reinstatement path.
        """
        with self._lock:
            if service_id not in self.db.services:
                raise UnknownEntityError(f"unknown service: {service_id!r}")
            if self.db.status[service_id] != ServiceStatus.ACTIVE:
                raise UnknownEntityError(f"service {service_id!r} is not Active")
            self.db.status[service_id] = ServiceStatus.DEPRECATED

    # -- lookup ----------------------------------------------------------

    def get(self, service_id: str) -> ServiceDescription:
        with self._lock:
            desc = self.db.services.get(service_id)
            if desc is None:
                raise UnknownEntityError(f"unknown service: {service_id!r}")
            return desc

    def status_of(self, service_id: str) -> ServiceStatus:
        with self._lock:
            status = self.db.status.get(service_id)
            if status is None:
                raise UnknownEntityError(f"unknown service: {service_id!r}")
            return status

    def is_active(self, service_id: str) -> bool:
        with self._lock:
            return self.db.status.get(service_id) == ServiceStatus.ACTIVE

    def is_known(self, service_id: str) -> bool:
        with self._lock:
            return service_id in self.db.services

    def active_services(self) -> list[ServiceDescription]:
        with self._lock:
            return [
                self.db.services[sid]
                for sid in sorted(self.db.services)
                if self.db.status[sid] == ServiceStatus.ACTIVE
            ]

    def search_active(self, query: str) -> list[ServiceDescription]:
        """Case-insensitive substring match over name and description."""
        needle = query.lower()
        with self._lock:
            hits = [
                sid
                for sid in sorted(self.db.services)
                if self.db.status[sid] == ServiceStatus.ACTIVE and needle in self.db.search_text[sid]
            ]
            return [self.db.services[sid] for sid in hits]

    # -- discovery and listings -------------------------------------------

    def discover(self, query: str, requester_pseudonym: str) -> list[DiscoveryResult]:
        """Requester-facing search; results carry no developer identity."""
        with self._lock:
            results = []
            for desc in self.search_active(query):
                hosts = tuple(self._host_provider(desc.service_id))
                results.append(DiscoveryResult(listing=_listing_of(desc), hosts=hosts))
            return results

    def list_available_services(
        self, host_free: ResourceVector, host_os: str, host_version: str
    ) -> list[ServiceDescription]:
        """Active services the host could run, best host revenue first."""
        with self._lock:
            candidates = [
                desc
                for desc in self.active_services()
                if desc.platform.matches(host_os, host_version) and host_free.covers(desc.min_resources)
            ]
        return sorted(candidates, key=lambda d: (-self._host_revenue(d), d.service_id))

    def _host_revenue(self, desc: ServiceDescription) -> int:
        """Expected per-invocation host earnings: price x remainder share."""
        from .billing import _frac  # local import to keep modules decoupled

        share = 1 - _frac(desc.developer_share) - _frac(self._governor_commission)
        if share <= 0:
            return 0
        return int(share * desc.price_per_invocation)

    def substitution_candidates(self, functionality_tag: str, exclude: str | None = None) -> list[ServiceDescription]:
        with self._lock:
            return [
                desc
                for desc in self.active_services()
                if desc.functionality_tag == functionality_tag and desc.service_id != exclude
            ]

    # -- persistence -------------------------------------------------------

    def snapshot_state(self) -> dict:
        with self._lock:
            return {
                "services": {
                    sid: service_to_dict(desc) for sid, desc in sorted(self.db.services.items())
                },
                "status": {sid: status.value for sid, status in sorted(self.db.status.items())},
            }

    def restore_state(self, state: dict) -> None:
        with self._lock:
            self.db = ServiceDatabase()
            for sid, raw in state["services"].items():
                desc = service_from_dict(raw)
                self.db.services[sid] = desc
                self.db.search_text[sid] = f"{desc.name} {desc.description}".lower()
            for sid, status in state["status"].items():
                self.db.status[sid] = ServiceStatus(status)


def service_to_dict(desc: ServiceDescription) -> dict:
    raw = asdict(desc)
    raw["security_level"] = desc.security_level.label
    raw["platform"] = {"os_name": desc.platform.os_name, "min_version": desc.platform.min_version}
    raw["min_resources"] = desc.min_resources.as_dict()
    raw["dependencies"] = list(desc.dependencies)
    return raw


def service_from_dict(raw: dict) -> ServiceDescription:
    from ..domain import SecurityLevel

    return ServiceDescription(
        service_id=raw["service_id"],
        developer_id=raw["developer_id"],
        name=raw["name"],
        description=raw["description"],
        functionality_tag=raw["functionality_tag"],
        input_spec=raw["input_spec"],
        output_spec=raw["output_spec"],
        binding_method=raw["binding_method"],
        security_level=SecurityLevel.from_name(raw["security_level"]),
        platform=PlatformRequirement(
            os_name=raw["platform"]["os_name"], min_version=raw["platform"]["min_version"]
        ),
        min_resources=ResourceVector(**raw["min_resources"]),
        price_per_invocation=raw["price_per_invocation"],
        developer_share=raw["developer_share"],
        dependencies=tuple(raw["dependencies"]),
    )
