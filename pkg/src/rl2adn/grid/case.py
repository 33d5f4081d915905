"""Feeder case data: buses, branches and the bus admittance matrix."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

BUNDLED_CASES = ("ieee33", "ieee69", "tiny4")


class CaseError(ValueError):
    """Raised when a case file cannot be parsed or violates the case schema."""


@dataclass(frozen=True)
class BusSpec:
    id: int
    kind: str  # "slack" or "pq"
    p_load_mw: float
    q_load_mvar: float


@dataclass(frozen=True)
class BranchSpec:
    from_bus: int
    to_bus: int
    r_pu: float
    x_pu: float
    capacity_mva: float


@dataclass(frozen=True)
class NetworkCase:
    buses: tuple[BusSpec, ...]
    branches: tuple[BranchSpec, ...]
    base_mva: float
    v_min: float
    v_max: float
    name: str = ""

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    @property
    def slack(self) -> int:
        return next(b.id for b in self.buses if b.kind == "slack")

    @property
    def p_load(self) -> np.ndarray:
        return np.array([b.p_load_mw for b in self.buses])

    @property
    def q_load(self) -> np.ndarray:
        return np.array([b.q_load_mvar for b in self.buses])

    @property
    def capacities(self) -> np.ndarray:
        return np.array([br.capacity_mva for br in self.branches])

    @property
    def branch_ends(self) -> tuple[np.ndarray, np.ndarray]:
        f = np.array([br.from_bus for br in self.branches], dtype=np.intp)
        t = np.array([br.to_bus for br in self.branches], dtype=np.intp)
        return f, t

    def with_capacities(self, factor: float) -> "NetworkCase":
        branches = tuple(
            BranchSpec(br.from_bus, br.to_bus, br.r_pu, br.x_pu, br.capacity_mva * factor)
            for br in self.branches
        )
        return NetworkCase(self.buses, branches, self.base_mva, self.v_min, self.v_max, self.name)


def _require(d: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in d:
        raise CaseError(f"{where}: missing key {key!r}")
    return d[key]


def case_from_dict(data: Mapping[str, Any]) -> NetworkCase:
    """Validate a decoded case document and build a :class:`NetworkCase`."""
    if not isinstance(data, Mapping):
        raise CaseError("case document must be a JSON object")
    try:
        base_mva = float(_require(data, "base_mva", "case"))
        v_min = float(_require(data, "v_min", "case"))
        v_max = float(_require(data, "v_max", "case"))
        raw_buses = _require(data, "buses", "case")
        raw_branches = _require(data, "branches", "case")
        buses = tuple(
            BusSpec(
                id=int(_require(b, "id", f"bus[{k}]")),
                kind=str(_require(b, "kind", f"bus[{k}]")),
                p_load_mw=float(_require(b, "p_load_mw", f"bus[{k}]")),
                q_load_mvar=float(_require(b, "q_load_mvar", f"bus[{k}]")),
            )
            for k, b in enumerate(raw_buses)
        )
        branches = tuple(
            BranchSpec(
                from_bus=int(_require(br, "from", f"branch[{k}]")),
                to_bus=int(_require(br, "to", f"branch[{k}]")),
                r_pu=float(_require(br, "r_pu", f"branch[{k}]")),
                x_pu=float(_require(br, "x_pu", f"branch[{k}]")),
                capacity_mva=float(_require(br, "capacity_mva", f"branch[{k}]")),
            )
            for k, br in enumerate(raw_branches)
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, CaseError):
            raise
        raise CaseError(f"malformed case field: {exc}") from exc

    case = NetworkCase(buses, branches, base_mva, v_min, v_max, str(data.get("name", "")))
    validate_case(case)
    return case


def validate_case(case: NetworkCase) -> None:
    n = case.n_bus
    if n == 0:
        raise CaseError("case has no buses")
    if case.base_mva <= 0:
        raise CaseError("base_mva must be positive")
    if not case.v_min < case.v_max:
        raise CaseError("v_min must be below v_max")
    ids = [b.id for b in case.buses]
    if sorted(ids) != list(range(n)):
        raise CaseError("bus ids must be unique and contiguous from 0")
    if any(b.id != k for k, b in enumerate(case.buses)):
        raise CaseError("buses must be listed in id order")
    kinds = [b.kind for b in case.buses]
    bad = [k for k in kinds if k not in ("slack", "pq")]
    if bad:
        raise CaseError(f"unknown bus kind {bad[0]!r}")
    n_slack = kinds.count("slack")
    if n_slack != 1:
        raise CaseError(f"expected exactly one slack bus, found {n_slack}")
    adj: list[list[int]] = [[] for _ in range(n)]
    for k, br in enumerate(case.branches):
        if not (0 <= br.from_bus < n and 0 <= br.to_bus < n) or br.from_bus == br.to_bus:
            raise CaseError(f"branch[{k}] has invalid end buses")
        if br.r_pu < 0:
            raise CaseError(f"branch[{k}] has negative resistance")
        if br.r_pu == 0 and br.x_pu == 0:
            raise CaseError(f"branch[{k}] has zero impedance")
        if br.x_pu < 0 and br.r_pu == 0:
            raise CaseError(f"branch[{k}] has non-physical impedance")
        if br.capacity_mva <= 0:
            raise CaseError(f"branch[{k}] capacity must be positive")
        adj[br.from_bus].append(br.to_bus)
        adj[br.to_bus].append(br.from_bus)
    seen = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in adj[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    if len(seen) != n:
        raise CaseError(f"network graph is disconnected ({n - len(seen)} unreachable buses)")


def bundled_case_path(name: str) -> Path:
    stem = Path(name).stem
    if stem not in BUNDLED_CASES:
        raise CaseError(f"no bundled case named {name!r}")
    return Path(str(resources.files("rl2adn.grid") / "cases" / f"{stem}.json"))


def load_case(path: str | Path) -> NetworkCase:
    """Load a case JSON file.

    A bare bundled name such as ``"ieee33"`` or ``"ieee33.json"`` resolves to
    the copy shipped with the package when no such file exists on disk.
    """
    p = Path(path)
    if not p.exists():
        if p.stem in BUNDLED_CASES and p.parent == Path("."):
            p = bundled_case_path(p.stem)
        else:
            raise CaseError(f"case file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CaseError(f"{p}: invalid JSON ({exc})") from exc
    return case_from_dict(data)


def case_to_dict(case: NetworkCase) -> dict[str, Any]:
    return {
        "name": case.name,
        "base_mva": case.base_mva,
        "v_min": case.v_min,
        "v_max": case.v_max,
        "buses": [
            {"id": b.id, "kind": b.kind, "p_load_mw": b.p_load_mw, "q_load_mvar": b.q_load_mvar}
            for b in case.buses
        ],
        "branches": [
            {
                "from": br.from_bus,
                "to": br.to_bus,
                "r_pu": br.r_pu,
                "x_pu": br.x_pu,
                "capacity_mva": br.capacity_mva,
            }
            for br in case.branches
        ],
    }


def branch_admittances(branches: Sequence[BranchSpec]) -> np.ndarray:
    z = np.array([complex(br.r_pu, br.x_pu) for br in branches], dtype=complex)
    if np.any(z == 0):
        raise CaseError("zero-impedance branch")
    return 1.0 / z


def build_admittance(case: NetworkCase) -> np.ndarray:
    """Dense bus admittance matrix ``Y = G + jB`` (complex, per unit).

    Off-diagonal entries are ``-1/(r + jx)`` for each branch; each diagonal
    entry is the negated sum of its row's off-diagonal entries.
    """
    n = case.n_bus
    y = np.zeros((n, n), dtype=complex)
    ys = branch_admittances(case.branches)
    f, t = case.branch_ends
    np.add.at(y, (f, t), -ys)
    np.add.at(y, (t, f), -ys)
    y[np.diag_indices(n)] = -y.sum(axis=1)
    return y
