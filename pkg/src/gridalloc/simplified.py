"""Loss-bounded linearized constraint system for allocation feasibility.

Per-edge losses are replaced by constant upper bounds, which turns the
capacity and voltage constraints into linear/norm constraints over the
allocation vector alone: aggregate downstream flow against an effective
capacity, and an accumulated voltage-drop sum against a window derived
from the source voltage.  With all loss bounds at zero this reduces to
the linear DistFlow feasibility test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .customers import Customer
from .network import PathIndex, RadialNetwork

FEAS_SLACK = 1e-12  # absolute slack; ties count as feasible

LOSS_MODES = ("zero", "capacity", "aggregate")


@dataclass(frozen=True)
class LossBounds:
    """Constant per-edge upper bounds on squared current, keyed by child bus."""

    lbar: Mapping[int, float]

    def __post_init__(self):
        for j, lb in self.lbar.items():
            if lb < 0:
                raise ValueError(f"loss bound for edge into bus {j} must be >= 0")


def loss_bounds(
    net: RadialNetwork,
    paths: PathIndex,
    customers: Sequence[Customer],
    mode: str = "aggregate",
    vmin_sq: float | None = None,
) -> LossBounds:
    """Loss bounds per edge.

    zero:      lossless (linear DistFlow);
    capacity:  worst case C_e^2 / vmin_sq, valid for any in-limit state;
    aggregate: min(C_e, total downstream apparent demand)^2 / vmin_sq, a
               tighter bound that cannot be exceeded at desk scale because
               an edge never carries more than its capacity nor more than
               everything below it could draw.
    """
    if mode not in LOSS_MODES:
        raise ValueError(f"mode must be one of {LOSS_MODES}")
    if vmin_sq is None:
        vmin_sq = net.vmin_sq
    if vmin_sq <= 0:
        raise ValueError("vmin_sq must be strictly positive")
    lbar: dict[int, float] = {}
    for j in net.non_root_buses:
        if mode == "zero":
            lbar[j] = 0.0
            continue
        cap = net.edge_of[j].capacity
        if mode == "capacity":
            bound = cap
        else:
            down = paths.downstream[j]
            agg = sum(abs(c.s) for c in customers if c.bus in down)
            bound = min(cap, agg)
        lbar[j] = 0.0 if math.isinf(bound) else bound**2 / vmin_sq
    return LossBounds(lbar=lbar)


@dataclass(frozen=True)
class SimplifiedLimits:
    """Effective capacities and voltage windows of the linearized system."""

    chat: Mapping[int, float]  # effective capacity per edge
    lhat: Mapping[int, float]  # magnitude of the summed loss flow below each edge
    vbar: Mapping[int, float]  # upper voltage-accumulation limit per edge
    vlower: Mapping[int, float]  # lower voltage-accumulation limit per edge
    leaves: frozenset[int]
    include_lower_voltage: bool = True


def simplified_limits(
    net: RadialNetwork,
    paths: PathIndex,
    bounds: LossBounds,
    v0: float = 1.0,
    vmin_sq: float | None = None,
    vmax_sq: float | None = None,
    include_lower_voltage: bool = True,
) -> SimplifiedLimits:
    if vmin_sq is None:
        vmin_sq = net.vmin_sq
    if vmax_sq is None:
        vmax_sq = net.vmax_sq
    # Summed loss flow over the subtree at/below each edge.
    zl: dict[int, complex] = {
        j: net.edge_of[j].z * bounds.lbar[j] for j in net.non_root_buses
    }
    subtree: dict[int, complex] = dict(zl)
    for j in reversed(net.topo_order):
        if j == 0:
            continue
        src = net.edge_of[j].src
        if src != 0:
            subtree[src] += subtree[j]
    lhat = {j: abs(subtree[j]) for j in net.non_root_buses}
    chat = {
        j: max(net.edge_of[j].capacity - lhat[j], 0.0) for j in net.non_root_buses
    }
    vbar_val = 0.5 * (v0 - vmin_sq)
    vbar = {j: vbar_val for j in net.non_root_buses}
    vlower: dict[int, float] = {}
    for j in net.non_root_buses:
        acc = sum(
            net.edge_of[e].z_abs ** 2 * bounds.lbar[e] for e in paths.edge_path[j]
        )
        vlower[j] = 0.5 * (v0 - vmax_sq + acc)
    return SimplifiedLimits(
        chat=chat,
        lhat=lhat,
        vbar=vbar,
        vlower=vlower,
        leaves=paths.leaves,
        include_lower_voltage=include_lower_voltage,
    )


def unconstrained_limits(paths: PathIndex, include_lower_voltage: bool = False) -> SimplifiedLimits:
    """Limits that admit every allocation; handy for utility-only testing."""
    edges = paths.edge_path.keys()
    return SimplifiedLimits(
        chat={j: math.inf for j in edges},
        lhat={j: 0.0 for j in edges},
        vbar={j: math.inf for j in edges},
        vlower={j: -math.inf for j in edges},
        leaves=paths.leaves,
        include_lower_voltage=include_lower_voltage,
    )


def voltage_drop_weight(edge_z: complex, s: complex) -> float:
    """Contribution of demand s on one path edge to the voltage accumulation."""
    return edge_z.real * s.real + edge_z.imag * s.imag


def voltage_check_edges(
    net: RadialNetwork,
    paths: PathIndex,
    limits: SimplifiedLimits,
    customers: Sequence[Customer],
) -> tuple[int, ...]:
    """Edges whose voltage constraint must be checked.

    The leaf-edge reduction is valid only when every per-edge demand
    contribution is non-negative (demand/impedance angle gaps below 90
    degrees) and the lower window is off; otherwise every edge is checked.
    """
    if not limits.include_lower_voltage and _leaf_reduction_applies(net, paths, customers):
        return tuple(sorted(limits.leaves))
    return tuple(net.non_root_buses)


def _leaf_reduction_applies(
    net: RadialNetwork, paths: PathIndex, customers: Sequence[Customer]
) -> bool:
    for c in customers:
        for e in paths.edge_path[c.bus]:
            if voltage_drop_weight(net.edge_of[e].z, c.s) < 0:
                return False
    return True


def leaf_edges(net: RadialNetwork) -> frozenset[int]:
    """Edges whose downstream bus has no children, keyed by that bus."""
    return PathIndex(net).leaves


@dataclass(frozen=True)
class ConstraintEval:
    flows: Mapping[int, complex]  # aggregate complex flow per edge
    volt_acc: Mapping[int, float]  # voltage accumulation at each checked edge
    feasible: bool
    worst_edge: int | None = None


def eval_constraints(
    net: RadialNetwork,
    paths: PathIndex,
    limits: SimplifiedLimits,
    customers: Sequence[Customer],
    allocation,
    base_flows: Mapping[int, complex] | None = None,
) -> ConstraintEval:
    """Exact evaluation of the linearized constraint system for an allocation.

    `base_flows` adds a fixed pre-load (frozen elastic demands) per edge on
    top of the allocated customers; it enters both the capacity and the
    voltage accumulations, which are linear in the edge flows.
    """
    flows: dict[int, complex] = {j: 0j for j in net.non_root_buses}
    for c, xi in zip(customers, allocation):
        if xi == 0:
            continue
        contrib = c.s * xi
        for e in paths.edge_path[c.bus]:
            flows[e] += contrib
    if base_flows:
        for e, f in base_flows.items():
            flows[e] += f
    feasible = True
    worst = None
    for j in net.non_root_buses:
        if abs(flows[j]) > limits.chat[j] + FEAS_SLACK:
            feasible = False
            worst = j
            break
    # Per-edge voltage drop weights, then root-prefix accumulation.
    w = {
        j: voltage_drop_weight(net.edge_of[j].z, flows[j])
        for j in net.non_root_buses
    }
    check = voltage_check_edges(net, paths, limits, customers)
    volt_acc: dict[int, float] = {}
    for j in check:
        acc = sum(w[e] for e in paths.edge_path[j])
        volt_acc[j] = acc
        if acc > limits.vbar[j] + FEAS_SLACK:
            feasible = False
            worst = worst if worst is not None else j
        if limits.include_lower_voltage and acc < limits.vlower[j] - FEAS_SLACK:
            feasible = False
            worst = worst if worst is not None else j
    return ConstraintEval(flows=flows, volt_acc=volt_acc, feasible=feasible, worst_edge=worst)
