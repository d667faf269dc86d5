"""Subset-sum reduction gadgets on a single-edge network.

Each generator embeds a subset-sum question into an allocation instance
whose achievable utility reaches 1 exactly when the subset-sum answer is
"yes": m low-utility customers carry real demands proportional to the
integers, one unit-utility customer carries a compensating negative
reactive demand, and the voltage window is sized so the books balance
only when a subset sums to the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .customers import Customer
from .network import PathIndex, RadialNetwork, single_edge_network
from .oracle import OracleResult, brute_force_maxopf, brute_force_smaxopf
from .powerflow import OperatingLimits
from .simplified import SimplifiedLimits

MAX_VALUE = 10**6  # keeps the |sum - target| < 1 integrality argument exact in doubles


@dataclass(frozen=True)
class SubSumInstance:
    values: tuple[int, ...]
    target: int

    def __post_init__(self):
        if not self.values:
            raise ValueError("need at least one value")
        for a in self.values:
            if not isinstance(a, int) or a < 1:
                raise ValueError("values must be integers >= 1")
            if a > MAX_VALUE:
                raise ValueError(f"values capped at {MAX_VALUE}")
        if not isinstance(self.target, int) or self.target < 1:
            raise ValueError("target must be an integer >= 1")
        if self.target > MAX_VALUE:
            raise ValueError(f"target capped at {MAX_VALUE}")


def subset_sum_dp(ss: SubSumInstance) -> bool:
    """Reference answer by bitset dynamic programming."""
    reachable = 1
    limit = (1 << (ss.target + 1)) - 1
    for a in ss.values:
        reachable |= reachable << a
        reachable &= limit
    return bool((reachable >> ss.target) & 1)


@dataclass(frozen=True)
class GadgetInstance:
    network: RadialNetwork
    customers: tuple[Customer, ...]
    scale: float
    variant: str  # "voltage" | "simplified"
    op_limits: OperatingLimits | None = None
    s_limits: SimplifiedLimits | None = None
    params: dict = field(default_factory=dict)


def gadget_voltage(
    ss: SubSumInstance, alpha: float = 1.0, beta: float = 1.0, delta: float = 0.01
) -> GadgetInstance:
    """Voltage-window gadget checked by exact power flow.

    The construction is circular as stated (the demand scale depends on the
    voltage window, which depends on the source voltage, which depends on
    the demands), so the scale is resolved by fixed-point iteration and
    the resulting window is re-verified against the inequalities the
    argument actually needs.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if beta < 1:
        raise ValueError("beta must be >= 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    eps = delta / 100
    m = len(ss.values)
    g = abs(sum(ss.values) - 1j * ss.target)  # |sum of unit-scale demands|
    # The 5*delta floor keeps the matched-subset loss term second order:
    # a matched selection's load points along 1-1i, so the 1+1i loss flow
    # is orthogonal to it and perturbs the drop by O((delta/(2*lam*B))^2),
    # while any integer mismatch overshoots the window by >= 2*lam - loss.
    # Iterate from the floor upward; lam_new is monotone in lam, so this
    # reaches the least fixed point if one exists and otherwise blows up
    # doubly exponentially (caught by the finiteness guard).
    lam = 5 * delta
    for _ in range(200):
        v0 = (lam * g) ** 2 / (delta / 2 - eps)
        vmin, vmax = v0 - delta, v0 + delta
        lam_new = max(v0 - vmin / beta, beta * vmax - v0, 5 * delta)
        if not math.isfinite(lam_new):
            raise ValueError("no self-consistent demand scale for these parameters")
        if lam_new <= lam * (1 + 1e-12):
            break
        lam = lam_new
    else:
        raise ValueError("no self-consistent demand scale for these parameters")
    v0 = (lam * g) ** 2 / (delta / 2 - eps)
    vmin, vmax = v0 - delta, v0 + delta
    if lam < v0 - vmin / beta - 1e-9 or lam < beta * vmax - v0 - 1e-9:
        raise ValueError("scale fails the window inequalities")
    if vmin <= 0:
        raise ValueError("voltage window collapsed; decrease delta")
    customers = tuple(
        Customer(bus=1, s=complex(lam * a, 0.0), u=alpha / (m + 1)) for a in ss.values
    ) + (Customer(bus=1, s=complex(0.0, -lam * ss.target), u=1.0),)
    net = single_edge_network(r=1.0, x=1.0, vmin_sq=vmin, vmax_sq=vmax)
    op = OperatingLimits(
        v0=v0, vmin_sq=vmin, vmax_sq=vmax, use_capacity=False, use_voltage=True
    )
    return GadgetInstance(
        network=net,
        customers=customers,
        scale=lam,
        variant="voltage",
        op_limits=op,
        params={"alpha": alpha, "beta": beta, "delta": delta, "eps": eps, "v0": v0},
    )


def gadget_simplified_voltage(
    ss: SubSumInstance,
    alpha: float = 1.0,
    beta: float = 1.0,
    v_window: tuple[float, float] = (-1.0, 1.0),
) -> GadgetInstance:
    """Voltage-accumulation gadget checked under the linearized constraints."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if beta < 1:
        raise ValueError("beta must be >= 1")
    v_lo, v_up = v_window
    if not (v_lo <= 0 <= v_up) or v_up <= 0:
        raise ValueError("window must straddle zero with positive upper side")
    m = len(ss.values)
    lam = max(-v_lo / beta, beta * v_up)
    customers = tuple(
        Customer(bus=1, s=complex(2 * lam * a, 0.0), u=alpha / (m + 1))
        for a in ss.values
    ) + (Customer(bus=1, s=complex(0.0, -2 * lam * ss.target), u=1.0),)
    net = single_edge_network(r=1.0, x=1.0)
    s_limits = SimplifiedLimits(
        chat={1: math.inf},
        lhat={1: 0.0},
        vbar={1: v_up},
        vlower={1: v_lo},
        leaves=frozenset({1}),
        include_lower_voltage=True,
    )
    return GadgetInstance(
        network=net,
        customers=customers,
        scale=lam,
        variant="simplified",
        s_limits=s_limits,
        params={"alpha": alpha, "beta": beta, "v_lo": v_lo, "v_up": v_up},
    )


def gadget_best_utility(g: GadgetInstance) -> OracleResult:
    paths = PathIndex(g.network)
    if g.variant == "voltage":
        return brute_force_maxopf(g.network, paths, list(g.customers), g.op_limits)
    return brute_force_smaxopf(g.network, paths, g.s_limits, list(g.customers))


def verify_reduction(g: GadgetInstance, ss: SubSumInstance) -> bool:
    """True when exhaustive search over the gadget agrees with the DP answer."""
    result = gadget_best_utility(g)
    reachable = result.best_utility >= 1.0 - 1e-9
    return reachable == subset_sum_dp(ss)
