"""Allocation algorithms: magnitude-greedy packing, utility-grouped packing,
the fractional relaxation solver, and the capacity-backoff driver for mixed
elastic/inelastic customer sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .customers import Customer, elastic_indices, inelastic_indices, total_utility
from .network import PathIndex, RadialNetwork
from .powerflow import OperatingLimits, ViolationReport, opf_feasible
from .simplified import (
    FEAS_SLACK,
    SimplifiedLimits,
    loss_bounds,
    simplified_limits,
    voltage_check_edges,
    voltage_drop_weight,
)


class InfeasibleRelaxation(RuntimeError):
    """The fractional program admits no solution (zero allocation excluded)."""


def _common_prefix_len(a: tuple[int, ...], b: tuple[int, ...]) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


class _IncrementalChecker:
    """Running feasibility state for greedy packing.

    Tracks per-edge aggregate flow and, for every checked edge, the
    accumulated voltage-drop sum; a candidate is tested and committed in
    O(path length + checked edges) using prefix sums of per-edge drop
    weights along the candidate's root path.
    """

    def __init__(
        self,
        net: RadialNetwork,
        paths: PathIndex,
        limits: SimplifiedLimits,
        customers: Sequence[Customer],
        base_flows: Mapping[int, complex] | None = None,
    ):
        self.net = net
        self.paths = paths
        self.limits = limits
        self.check_edges = voltage_check_edges(net, paths, limits, customers)
        self.flows: dict[int, complex] = {j: 0j for j in net.non_root_buses}
        if base_flows:
            for j, f in base_flows.items():
                self.flows[j] += f
        w = {
            j: voltage_drop_weight(net.edge_of[j].z, self.flows[j])
            for j in net.non_root_buses
        }
        self.acc = {
            j: sum(w[e] for e in paths.edge_path[j]) for j in self.check_edges
        }
        self._cpl: dict[tuple[int, int], int] = {}

    def _prefix_len(self, bus: int, check_bus: int) -> int:
        key = (bus, check_bus)
        cpl = self._cpl.get(key)
        if cpl is None:
            cpl = _common_prefix_len(
                self.paths.root_path[bus], self.paths.root_path[check_bus]
            )
            self._cpl[key] = cpl
        return cpl

    def _q_prefix(self, c: Customer) -> list[float]:
        path = self.paths.root_path[c.bus]
        pre = [0.0]
        for e in path:
            pre.append(pre[-1] + voltage_drop_weight(self.net.edge_of[e].z, c.s))
        return pre

    def admits(self, c: Customer) -> bool:
        lim = self.limits
        for e in self.paths.edge_path[c.bus]:
            chat = lim.chat[e]
            if not math.isinf(chat) and abs(self.flows[e] + c.s) > chat + FEAS_SLACK:
                return False
        qpre = self._q_prefix(c)
        for j in self.check_edges:
            q = qpre[self._prefix_len(c.bus, j)]
            acc = self.acc[j] + q
            if acc > lim.vbar[j] + FEAS_SLACK:
                return False
            if lim.include_lower_voltage and acc < lim.vlower[j] - FEAS_SLACK:
                return False
        return True

    def commit(self, c: Customer) -> None:
        for e in self.paths.edge_path[c.bus]:
            self.flows[e] += c.s
        qpre = self._q_prefix(c)
        for j in self.check_edges:
            self.acc[j] += qpre[self._prefix_len(c.bus, j)]


def greedy_alloc(
    net: RadialNetwork,
    paths: PathIndex,
    limits: SimplifiedLimits,
    customers: Sequence[Customer],
    base_flows: Mapping[int, complex] | None = None,
) -> list[int]:
    """Pack customers by non-decreasing demand magnitude (id on ties).

    Returns the indices (into `customers`) of the accepted set; every
    accept is re-validated against the full constraint system.
    """
    order = sorted(range(len(customers)), key=lambda i: (abs(customers[i].s), i))
    state = _IncrementalChecker(net, paths, limits, customers, base_flows)
    selected: list[int] = []
    for i in order:
        c = customers[i]
        if state.admits(c):
            state.commit(c)
            selected.append(i)
    selected.sort()
    return selected


@dataclass(frozen=True)
class GroupingTrace:
    """Audit record of the utility-rounding group stage."""

    L: float
    ubar: tuple[int, ...]
    groups: tuple[tuple[int, ...], ...]
    group_selections: tuple[tuple[int, ...], ...]
    group_utilities: tuple[float, ...]
    winner: int | None


def _group_count(n: int) -> int:
    if n <= 1:
        return 1
    return math.ceil(2 * math.log2(n)) + 1


def inelas_dem_alloc(
    net: RadialNetwork,
    paths: PathIndex,
    limits: SimplifiedLimits,
    customers: Sequence[Customer],
    base_flows: Mapping[int, complex] | None = None,
) -> tuple[list[int], GroupingTrace]:
    """Group customers by rounded utility range, greedy-pack each group,
    return the best group's packing.

    Utilities are rounded down in units of u_max/n^2; group i >= 2 covers
    rounded utilities in [2^(i-1), 2^i) and group 1 covers [0, 2).  With
    u_max = 0 no grouping is meaningful and the empty set is returned.
    """
    n = len(customers)
    if n == 0:
        return [], GroupingTrace(0.0, (), (), (), (), None)
    u_max = max(c.u for c in customers)
    if u_max <= 0:
        groups = (tuple(range(n)),)
        return [], GroupingTrace(0.0, (0,) * n, groups, ((),), (0.0,), None)
    L = u_max / n**2
    ubar = tuple(math.floor(c.u / L) for c in customers)
    n_groups = _group_count(n)
    groups: list[list[int]] = [[] for _ in range(n_groups)]
    for i, ub in enumerate(ubar):
        if ub < 2:
            groups[0].append(i)
        else:
            g = min(math.floor(math.log2(ub)), n_groups - 1)
            groups[g].append(i)
    selections: list[tuple[int, ...]] = []
    group_us: list[float] = []
    for members in groups:
        sub = [customers[i] for i in members]
        picked = greedy_alloc(net, paths, limits, sub, base_flows)
        sel = tuple(members[i] for i in picked)
        selections.append(sel)
        group_us.append(sum(customers[i].u for i in sel))
    winner = int(np.argmax(group_us))
    trace = GroupingTrace(
        L=L,
        ubar=ubar,
        groups=tuple(tuple(g) for g in groups),
        group_selections=tuple(selections),
        group_utilities=tuple(group_us),
        winner=winner,
    )
    return list(selections[winner]), trace


def solve_rmaxopf(
    net: RadialNetwork,
    paths: PathIndex,
    limits: SimplifiedLimits,
    customers: Sequence[Customer],
    tangents: int = 64,
    fixed: Mapping[int, float] | None = None,
) -> np.ndarray:
    """Maximize total utility with every demand treated as elastic.

    The two-dimensional norm capacity constraints are replaced by
    `tangents` supporting half-planes (an outer polygonal approximation of
    each disk), which turns the program into a plain LP.  `fixed` pins
    selected variables to given values.
    """
    if tangents < 8:
        raise ValueError("tangents must be >= 8")
    n = len(customers)
    if n == 0:
        return np.zeros(0)
    u = np.array([c.u for c in customers])
    s_re = np.array([c.s.real for c in customers])
    s_im = np.array([c.s.imag for c in customers])
    member = {
        j: np.array([c.bus in paths.downstream[j] for c in customers])
        for j in net.non_root_buses
    }
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    phis = 2 * np.pi * np.arange(tangents) / tangents
    cos_p, sin_p = np.cos(phis), np.sin(phis)
    for j in net.non_root_buses:
        m = member[j]
        if not m.any():
            continue
        chat = limits.chat[j]
        if not math.isinf(chat):
            re_row = np.where(m, s_re, 0.0)
            im_row = np.where(m, s_im, 0.0)
            block = np.outer(cos_p, re_row) + np.outer(sin_p, im_row)
            rows.extend(block)
            rhs.extend([chat] * tangents)
    for j in voltage_check_edges(net, paths, limits, customers):
        coef = np.zeros(n)
        for k, c in enumerate(customers):
            cpl = _common_prefix_len(paths.root_path[c.bus], paths.root_path[j])
            coef[k] = sum(
                voltage_drop_weight(net.edge_of[e].z, c.s)
                for e in paths.root_path[c.bus][:cpl]
            )
        if not math.isinf(limits.vbar[j]):
            rows.append(coef)
            rhs.append(limits.vbar[j])
        if limits.include_lower_voltage and not math.isinf(limits.vlower[j]):
            rows.append(-coef)
            rhs.append(-limits.vlower[j])
    bounds = [(0.0, 1.0)] * n
    if fixed:
        for i, v in fixed.items():
            bounds[i] = (v, v)
    A_ub = np.array(rows) if rows else None
    b_ub = np.array(rhs) if rows else None
    res = linprog(-u, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise InfeasibleRelaxation(res.message)
    return np.clip(res.x, 0.0, 1.0)


@dataclass(frozen=True)
class MixResult:
    allocation: np.ndarray
    delta: float
    iterations: int
    fractional_base: np.ndarray
    exhausted: bool = False
    report: ViolationReport | None = None

    @property
    def feasible(self) -> bool:
        return self.report is None or self.report.feasible


def _elastic_base_flows(
    net: RadialNetwork,
    paths: PathIndex,
    customers: Sequence[Customer],
    x: np.ndarray,
    idx: Sequence[int],
) -> dict[int, complex]:
    flows: dict[int, complex] = {j: 0j for j in net.non_root_buses}
    for i in idx:
        contrib = customers[i].s * x[i]
        if contrib == 0:
            continue
        for e in paths.edge_path[customers[i].bus]:
            flows[e] += contrib
    return flows


def _elastic_fit_scale(
    net: RadialNetwork,
    paths: PathIndex,
    limits: SimplifiedLimits,
    flows: Mapping[int, complex],
) -> float:
    """Largest uniform scale-down keeping a fixed elastic pre-load feasible."""
    gamma = 1.0
    for j in net.non_root_buses:
        mag = abs(flows[j])
        chat = limits.chat[j]
        if mag > 0 and not math.isinf(chat):
            gamma = min(gamma, chat / mag)
    w = {
        j: voltage_drop_weight(net.edge_of[j].z, flows[j])
        for j in net.non_root_buses
    }
    for j in net.non_root_buses:
        acc = sum(w[e] for e in paths.edge_path[j])
        if acc > 0 and not math.isinf(limits.vbar[j]):
            gamma = min(gamma, limits.vbar[j] / acc)
    return max(gamma, 0.0)


def _reduced_limits(
    net: RadialNetwork,
    paths: PathIndex,
    delta: float,
    v0: float,
    vmin_sq: float,
) -> SimplifiedLimits:
    """Residual constraint system with capacities shrunk by (1 - delta).

    Losses are handled by the capacity backoff itself, so the effective
    capacities use the raw line limits and only the upper voltage window
    is kept.
    """
    edges = net.non_root_buses
    return SimplifiedLimits(
        chat={j: (1.0 - delta) * net.edge_of[j].capacity for j in edges},
        lhat={j: 0.0 for j in edges},
        vbar={j: 0.5 * (v0 - vmin_sq) for j in edges},
        vlower={j: -math.inf for j in edges},
        leaves=paths.leaves,
        include_lower_voltage=False,
    )


def mix_dem_alloc(
    net: RadialNetwork,
    paths: PathIndex,
    customers: Sequence[Customer],
    epsilon: float = 0.005,
    loss_mode: str = "aggregate",
    op_limits: OperatingLimits | None = None,
    tangents: int = 64,
    include_lower_voltage: bool = True,
) -> MixResult:
    """Allocate a mix of elastic and inelastic demands.

    Solves the fractional relaxation once (its program does not depend on
    the backoff factor), then retries the residual inelastic packing with
    capacities shrunk by (1 - delta), delta = 0, eps, 2*eps, ..., until the
    assembled allocation passes the exact power-flow feasibility check.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if op_limits is None:
        op_limits = OperatingLimits.for_network(net)
    n = len(customers)
    if n == 0:
        return MixResult(
            allocation=np.zeros(0),
            delta=0.0,
            iterations=1,
            fractional_base=np.zeros(0),
        )
    bounds = loss_bounds(net, paths, customers, mode=loss_mode, vmin_sq=op_limits.vmin_sq)
    slimits = simplified_limits(
        net,
        paths,
        bounds,
        v0=op_limits.v0,
        vmin_sq=op_limits.vmin_sq,
        vmax_sq=op_limits.vmax_sq,
        include_lower_voltage=include_lower_voltage,
    )
    x_frac = solve_rmaxopf(net, paths, slimits, customers, tangents=tangents)
    inelastic = inelastic_indices(customers)
    elastic = elastic_indices(customers)
    inelastic_customers = [customers[i] for i in inelastic]
    iterations = 0
    delta = 0.0
    last_report = None
    while delta < 1.0:
        iterations += 1
        reduced = _reduced_limits(net, paths, delta, op_limits.v0, op_limits.vmin_sq)
        base = _elastic_base_flows(net, paths, customers, x_frac, elastic)
        gamma = _elastic_fit_scale(net, paths, reduced, base)
        if gamma < 1.0:
            base = {j: f * gamma for j, f in base.items()}
        chosen, _ = inelas_dem_alloc(
            net, paths, reduced, inelastic_customers, base_flows=base
        )
        x_bar = np.zeros(n)
        for pos in chosen:
            x_bar[inelastic[pos]] = 1.0
        for i in elastic:
            x_bar[i] = gamma * x_frac[i]
        ok, report = opf_feasible(net, customers, x_bar, op_limits)
        last_report = report
        if ok:
            return MixResult(
                allocation=x_bar,
                delta=delta,
                iterations=iterations,
                fractional_base=x_frac,
                report=report,
            )
        delta = round(delta + epsilon, 12)
    # Backoff exhausted: drop all inelastic demands and halve the elastic
    # fraction until the exact check passes (the no-load point always does).
    x_bar = np.zeros(n)
    scale = 1.0
    while True:
        for i in elastic:
            x_bar[i] = scale * x_frac[i]
        ok, report = opf_feasible(net, customers, x_bar, op_limits)
        if ok or scale < 1e-12:
            break
        scale /= 2
    return MixResult(
        allocation=x_bar,
        delta=min(delta, 1.0 - epsilon),
        iterations=iterations,
        fractional_base=x_frac,
        exhausted=True,
        report=report if ok else last_report,
    )


def allocation_utility(customers: Sequence[Customer], x) -> float:
    return total_utility(customers, x)
