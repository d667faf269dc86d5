"""Exact branch-flow power flow on a radial network, plus limit checking.

The solver is a backward/forward sweep: the backward pass aggregates edge
flows from the leaves using the current loss estimates, the forward pass
propagates squared voltages from the root, and the squared currents are
refreshed from the flow/voltage quotient.  The fixed point satisfies the
branch flow equations exactly (to solver tolerance), so a converged state
is a physical operating point and feasibility checks against it are
conservative with respect to the loss-relaxed program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .customers import bus_loads
from .network import ROOT, RadialNetwork

SOLVE_TOL = 1e-10
MAX_ITER = 100
_GROWTH_CAP = 10  # consecutive residual increases before declaring divergence


class NonConvergence(RuntimeError):
    """The sweep diverged: the requested loading is physically infeasible."""


@dataclass(frozen=True)
class PowerFlowState:
    """Solved state: v[i] = |V_i|^2 per bus, S[j]/l[j] per edge keyed by child bus."""

    v: Mapping[int, float]
    S: Mapping[int, complex]
    l: Mapping[int, float]
    s0: complex

    def residuals(self, net: RadialNetwork, loads: Mapping[int, complex]) -> dict[str, float]:
        """Max absolute residual of each branch-flow equation."""
        r_cur = r_volt = r_bal = 0.0
        for j in net.non_root_buses:
            e = net.edge_of[j]
            vi = self.v[e.src]
            r_cur = max(r_cur, abs(self.l[j] - abs(self.S[j]) ** 2 / vi))
            r_volt = max(
                r_volt,
                abs(
                    self.v[j]
                    - (vi + e.z_abs**2 * self.l[j] - 2 * (e.z.conjugate() * self.S[j]).real)
                ),
            )
            downstream = sum(self.S[c] for c in net.children.get(j, ()))
            r_bal = max(
                r_bal,
                abs(self.S[j] - (downstream + loads.get(j, 0j) + e.z * self.l[j])),
            )
        root_child = net.children[ROOT][0]
        r_root = abs(self.s0 + self.S[root_child])
        return {"current": r_cur, "voltage": r_volt, "balance": r_bal, "root": r_root}

    def max_residual(self, net: RadialNetwork, loads: Mapping[int, complex]) -> float:
        return max(self.residuals(net, loads).values())


@dataclass(frozen=True)
class OperatingLimits:
    """Source voltage and the operating window the solution is checked against."""

    v0: float = 1.0
    vmin_sq: float = 0.81
    vmax_sq: float = 1.21
    use_capacity: bool = True
    use_voltage: bool = True

    def __post_init__(self):
        if not (0 < self.vmin_sq <= self.v0 <= self.vmax_sq):
            raise ValueError("need 0 < vmin_sq <= v0 <= vmax_sq")

    @classmethod
    def for_network(cls, net: RadialNetwork, v0: float = 1.0, **kw) -> "OperatingLimits":
        return cls(v0=v0, vmin_sq=net.vmin_sq, vmax_sq=net.vmax_sq, **kw)


@dataclass(frozen=True)
class ViolationReport:
    capacity_beta: float
    voltage_beta: float
    feasible: bool
    worst_edge: int | None = None
    worst_bus: int | None = None
    reason: str = ""


def sweep_solve(
    net: RadialNetwork,
    loads: Mapping[int, complex],
    v0: float = 1.0,
    tol: float = SOLVE_TOL,
    max_iter: int = MAX_ITER,
) -> PowerFlowState:
    """Solve the branch-flow fixed point for fixed per-bus loads.

    Raises NonConvergence when a voltage square goes non-positive, the
    residual grows for `_GROWTH_CAP` consecutive iterations, or the
    iteration cap is hit -- all symptoms of loading beyond the network's
    maximum power point.
    """
    if v0 <= 0:
        raise ValueError("v0 must be strictly positive")
    order = net.topo_order
    v = {b: v0 for b in order}
    l = {b: 0.0 for b in net.non_root_buses}
    S: dict[int, complex] = {}
    prev_residual = math.inf
    growth = 0
    for _ in range(max_iter):
        # Backward: aggregate flows from the leaves with current loss estimates.
        for j in reversed(order):
            if j == ROOT:
                continue
            e = net.edge_of[j]
            S[j] = (
                sum(S[c] for c in net.children.get(j, ()))
                + loads.get(j, 0j)
                + e.z * l[j]
            )
        # Forward: propagate voltages from the root, refresh currents.
        residual = 0.0
        for j in order[1:]:
            e = net.edge_of[j]
            vi = v[e.src]
            v[j] = vi + e.z_abs**2 * l[j] - 2 * (e.z.conjugate() * S[j]).real
            if v[j] <= 0:
                raise NonConvergence(f"voltage collapse at bus {j}")
            l_new = abs(S[j]) ** 2 / vi
            residual = max(residual, abs(l_new - l[j]))
            l[j] = l_new
        if residual <= tol:
            root_child = net.children[ROOT][0]
            return PowerFlowState(v=dict(v), S=dict(S), l=dict(l), s0=-S[root_child])
        if residual >= prev_residual:
            growth += 1
            if growth >= _GROWTH_CAP:
                raise NonConvergence("residual growth: no stable operating point")
        else:
            growth = 0
        prev_residual = residual
    raise NonConvergence(f"no fixed point within {max_iter} iterations")


def check_limits(
    state: PowerFlowState,
    limits: OperatingLimits,
    net: RadialNetwork,
    tol: float = 1e-9,
) -> ViolationReport:
    """Measure the worst capacity and voltage violation factors of a state."""
    cap_beta = 0.0
    worst_edge = None
    for j in net.non_root_buses:
        cap = net.edge_of[j].capacity
        mag = abs(state.S[j])
        if math.isinf(cap):
            ratio = 0.0
        elif cap == 0:
            ratio = 0.0 if mag <= tol else math.inf
        else:
            ratio = mag / cap
        if ratio > cap_beta:
            cap_beta, worst_edge = ratio, j
    volt_beta = 0.0
    worst_bus = None
    for j in net.non_root_buses:
        ratio = max(limits.vmin_sq / state.v[j], state.v[j] / limits.vmax_sq)
        if ratio > volt_beta:
            volt_beta, worst_bus = ratio, j
    feasible = (not limits.use_capacity or cap_beta <= 1 + tol) and (
        not limits.use_voltage or volt_beta <= 1 + tol
    )
    return ViolationReport(
        capacity_beta=cap_beta,
        voltage_beta=volt_beta,
        feasible=feasible,
        worst_edge=worst_edge,
        worst_bus=worst_bus,
    )


def opf_feasible(
    net: RadialNetwork,
    customers,
    allocation,
    limits: OperatingLimits | None = None,
) -> tuple[bool, ViolationReport]:
    """Decide operating feasibility of an allocation by exact power flow.

    Exact branch-flow feasibility implies feasibility of the loss-relaxed
    convex program over the same limits, so this check is conservative.
    """
    if limits is None:
        limits = OperatingLimits.for_network(net)
    loads = bus_loads(customers, allocation)
    try:
        state = sweep_solve(net, loads, v0=limits.v0)
    except NonConvergence as exc:
        report = ViolationReport(
            capacity_beta=math.inf,
            voltage_beta=math.inf,
            feasible=False,
            reason=str(exc),
        )
        return False, report
    report = check_limits(state, limits, net)
    return report.feasible, report


def dump_state_csv(state: PowerFlowState, net: RadialNetwork) -> str:
    """Debug dump: `bus,v_sq` rows then `edge,S_re,S_im,l` rows."""
    lines = ["bus,v_sq"]
    for b in net.topo_order:
        lines.append(f"{b},{state.v[b]!r}")
    lines.append("edge,S_re,S_im,l")
    for j in net.non_root_buses:
        e = net.edge_of[j]
        lines.append(
            f"({e.src},{e.dst}),{state.S[j].real!r},{state.S[j].imag!r},{state.l[j]!r}"
        )
    return "\n".join(lines) + "\n"
