"""Exact desk-scale reference solvers by exhaustive enumeration.

These replace external MILP baselines: they enumerate every binary
assignment of the inelastic customers (optionally solving the elastic
fractions per assignment) and therefore give true optima against which
the approximation algorithms are measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .alloc import (
    InfeasibleRelaxation,
    _common_prefix_len,
    solve_rmaxopf,
)
from .customers import Customer, elastic_indices, inelastic_indices
from .network import PathIndex, RadialNetwork
from .powerflow import OperatingLimits, opf_feasible
from .simplified import (
    FEAS_SLACK,
    SimplifiedLimits,
    loss_bounds,
    simplified_limits,
    voltage_check_edges,
    voltage_drop_weight,
)

SMAXOPF_GUARD = 24
MAXOPF_GUARD = 20


class TooLarge(ValueError):
    """Instance exceeds the enumeration guard; refuse rather than truncate."""


@dataclass(frozen=True)
class OracleResult:
    best_allocation: np.ndarray
    best_utility: float
    nodes_explored: int
    exact: bool = True


@lru_cache(maxsize=24)
def _bit_matrix(n: int) -> np.ndarray:
    """All 2^n binary rows; row index is the subset mask."""
    masks = np.arange(1 << n, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n)) & 1).astype(np.float64)


def _feasible_mask(
    net: RadialNetwork,
    paths: PathIndex,
    limits: SimplifiedLimits,
    sub: Sequence[Customer],
) -> np.ndarray:
    """Vectorized feasibility of every subset of `sub` under the limits."""
    n = len(sub)
    X = _bit_matrix(n)
    feas = np.ones(1 << n, dtype=bool)
    s = np.array([c.s for c in sub], dtype=complex)
    for j in net.non_root_buses:
        chat = limits.chat[j]
        if math.isinf(chat):
            continue
        sel = [k for k, c in enumerate(sub) if c.bus in paths.downstream[j]]
        if not sel:
            continue
        flows = X[:, sel] @ s[sel]
        feas &= np.abs(flows) <= chat + FEAS_SLACK
    for j in voltage_check_edges(net, paths, limits, sub):
        coef = np.zeros(n)
        for k, c in enumerate(sub):
            cpl = _common_prefix_len(paths.root_path[c.bus], paths.root_path[j])
            coef[k] = sum(
                voltage_drop_weight(net.edge_of[e].z, c.s)
                for e in paths.root_path[c.bus][:cpl]
            )
        vals = X @ coef
        if not math.isinf(limits.vbar[j]):
            feas &= vals <= limits.vbar[j] + FEAS_SLACK
        if limits.include_lower_voltage and not math.isinf(limits.vlower[j]):
            feas &= vals >= limits.vlower[j] - FEAS_SLACK
    return feas


def brute_force_smaxopf(
    net: RadialNetwork,
    paths: PathIndex,
    limits: SimplifiedLimits,
    customers: Sequence[Customer],
    guard: int = SMAXOPF_GUARD,
    tangents: int = 64,
) -> OracleResult:
    """Exact optimum of the linearized allocation problem.

    Inelastic assignments are enumerated; for each feasible one the
    elastic fractions (if any) are solved by the LP relaxation with the
    inelastic variables pinned.
    """
    n = len(customers)
    inelastic = inelastic_indices(customers)
    elastic = elastic_indices(customers)
    ni = len(inelastic)
    if ni > guard:
        raise TooLarge(f"{ni} inelastic customers exceeds guard {guard}")
    sub = [customers[i] for i in inelastic]
    feas = _feasible_mask(net, paths, limits, sub)
    X = _bit_matrix(ni)
    u_in = X @ np.array([c.u for c in sub]) if ni else np.zeros(1)
    nodes = 1 << ni
    if not elastic:
        if not feas.any():
            return OracleResult(np.zeros(n), 0.0, nodes, True)
        utils = np.where(feas, u_in, -np.inf)
        best_mask = int(np.argmax(utils))
        x = np.zeros(n)
        for b, i in enumerate(inelastic):
            x[i] = (best_mask >> b) & 1
        return OracleResult(x, float(utils[best_mask]), nodes, True)
    u_el_total = sum(customers[i].u for i in elastic)
    order = np.argsort(-u_in, kind="stable")
    best_util = -np.inf
    best_x = np.zeros(n)
    for mask in order:
        if not feas[mask]:
            continue
        if u_in[mask] + u_el_total <= best_util + 1e-15:
            break
        fixed = {i: float((int(mask) >> b) & 1) for b, i in enumerate(inelastic)}
        try:
            x = solve_rmaxopf(
                net, paths, limits, customers, tangents=tangents, fixed=fixed
            )
        except InfeasibleRelaxation:
            continue
        util = float(np.dot(x, [c.u for c in customers]))
        if util > best_util:
            best_util = util
            best_x = x
    if best_util == -np.inf:
        return OracleResult(np.zeros(n), 0.0, nodes, True)
    return OracleResult(best_x, best_util, nodes, True)


def brute_force_maxopf(
    net: RadialNetwork,
    paths: PathIndex,
    customers: Sequence[Customer],
    op_limits: OperatingLimits | None = None,
    guard: int = MAXOPF_GUARD,
    epsilon: float = 0.005,
    tangents: int = 32,
) -> OracleResult:
    """Exact optimum with feasibility certified by exact power flow.

    Inelastic assignments are walked in decreasing-utility order so that,
    without elastic customers, the first feasible assignment is optimal.
    Elastic fractions per assignment come from the LP relaxation and are
    uniformly scaled back in `epsilon` steps until the exact check passes.
    """
    if op_limits is None:
        op_limits = OperatingLimits.for_network(net)
    n = len(customers)
    inelastic = inelastic_indices(customers)
    elastic = elastic_indices(customers)
    ni = len(inelastic)
    if ni > guard:
        raise TooLarge(f"{ni} inelastic customers exceeds guard {guard}")
    sub = [customers[i] for i in inelastic]
    X = _bit_matrix(ni)
    u_in = X @ np.array([c.u for c in sub]) if ni else np.zeros(1)
    order = np.argsort(-u_in, kind="stable")
    nodes = 0
    slimits = None
    if elastic:
        bounds = loss_bounds(
            net, paths, customers, mode="zero", vmin_sq=op_limits.vmin_sq
        )
        slimits = simplified_limits(
            net,
            paths,
            bounds,
            v0=op_limits.v0,
            vmin_sq=op_limits.vmin_sq,
            vmax_sq=op_limits.vmax_sq,
            include_lower_voltage=False,
        )
    u_el_total = sum(customers[i].u for i in elastic)
    u_all = np.array([c.u for c in customers])
    best_util = -np.inf
    best_x = np.zeros(n)
    for mask in order:
        if u_in[mask] + u_el_total <= best_util + 1e-15:
            break
        nodes += 1
        x = np.zeros(n)
        for b, i in enumerate(inelastic):
            x[i] = (int(mask) >> b) & 1
        if not elastic:
            ok, _ = opf_feasible(net, customers, x, op_limits)
            if ok and u_in[mask] > best_util:
                best_util = float(u_in[mask])
                best_x = x
                # Descending order: the first feasible assignment is optimal.
                break
            continue
        fixed = {i: float(x[i]) for i in inelastic}
        try:
            x_lp = solve_rmaxopf(
                net, paths, slimits, customers, tangents=tangents, fixed=fixed
            )
        except InfeasibleRelaxation:
            continue
        delta = 0.0
        while delta < 1.0:
            x_try = x_lp.copy()
            for i in elastic:
                x_try[i] = (1.0 - delta) * x_lp[i]
            ok, _ = opf_feasible(net, customers, x_try, op_limits)
            if ok:
                util = float(np.dot(x_try, u_all))
                if util > best_util:
                    best_util = util
                    best_x = x_try
                break
            delta += epsilon
    if best_util == -np.inf:
        return OracleResult(np.zeros(n), 0.0, max(nodes, 1), True)
    return OracleResult(best_x, best_util, max(nodes, 1), True)
