"""Instance geometry, worst-case approximation-ratio formulas, and the
supporting planar-vector inequalities as checkable utilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .customers import Customer
from .network import PathIndex, RadialNetwork

FLOOR_SNAP_EPS = 1e-9


class PreconditionError(ValueError):
    """Inputs violate an inequality's hypothesis."""


def snapped_floor(value: float, eps: float = FLOOR_SNAP_EPS) -> int:
    """floor() that resolves to the nearest integer when within eps of one.

    The ratio formulas are exact-arithmetic expressions; without snapping,
    products that are algebraically integral (e.g. sec 72 * sec 36 = 4)
    would floor one too low under binary floating point.
    """
    nearest = round(value)
    if abs(value - nearest) <= eps:
        return int(nearest)
    return math.floor(value)


def angle_gap(a: float, b: float) -> float:
    """Absolute angle difference folded into [0, pi]."""
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


@dataclass(frozen=True)
class InstanceGeometry:
    theta: float  # max pairwise demand angle gap
    theta_zs: float  # max demand-vs-impedance angle gap along demand paths
    rho: float  # max per-path impedance magnitude ratio
    eta: int  # max path length in edges


def geometry(
    net: RadialNetwork, customers: Sequence[Customer], paths: PathIndex
) -> InstanceGeometry:
    if not customers:
        raise ValueError("geometry requires a nonempty customer set")
    args = [math.atan2(c.s.imag, c.s.real) for c in customers]
    theta = max(
        (angle_gap(a, b) for i, a in enumerate(args) for b in args[i + 1 :]),
        default=0.0,
    )
    theta_zs = 0.0
    for c, a in zip(customers, args):
        for e in paths.edge_path[c.bus]:
            z = net.edge_of[e].z
            theta_zs = max(theta_zs, angle_gap(a, math.atan2(z.imag, z.real)))
    rho = 1.0
    for j in net.non_root_buses:
        mags = [net.edge_of[e].z_abs for e in paths.edge_path[j]]
        rho = max(rho, max(mags) / min(mags))
    return InstanceGeometry(theta=theta, theta_zs=theta_zs, rho=rho, eta=paths.eta)


@dataclass(frozen=True)
class RatioBounds:
    alpha_C: float
    alpha_V: float
    alpha: float
    abar_C: float
    abar_V: float
    abar: float
    applicable: bool


def ratio_bounds(g: InstanceGeometry, n: int) -> RatioBounds:
    """Worst-case guarantees of the greedy and grouped-greedy allocators.

    Unit-utility ratios depend only on the geometry; the general-utility
    ratios scale them by (1 - 1/n) / (2 log2 n + 1).  When either angle
    reaches 90 degrees the formulas stop applying and the `applicable`
    flag is cleared (the values are still returned, computed at the
    capped angles, for logging purposes).
    """
    applicable = g.theta < math.pi / 2 and g.theta_zs < math.pi / 2
    theta = min(g.theta, math.pi / 2 - 1e-12)
    theta_zs = min(g.theta_zs, math.pi / 2 - 1e-12)
    term_c = snapped_floor(1 / (math.cos(theta) * math.cos(theta / 2)))
    term_v = snapped_floor(g.eta * g.rho / math.cos(theta_zs))
    alpha_c = 1.0 / (term_c + 1)
    alpha_v = 1.0 / (term_v + 1)
    alpha = 1.0 / (term_c + term_v + 2)
    if n >= 1:
        scale = (1 - 1 / n) / (2 * math.log2(n) + 1) if n > 1 else 0.0
    else:
        raise ValueError("n must be >= 1")
    return RatioBounds(
        alpha_C=alpha_c,
        alpha_V=alpha_v,
        alpha=alpha,
        abar_C=alpha_c * scale,
        abar_V=alpha_v * scale,
        abar=alpha * scale,
        applicable=applicable,
    )


def _vec_arg(v: tuple[float, float]) -> float | None:
    if v[0] == 0 and v[1] == 0:
        return None
    return math.atan2(v[1], v[0])


def _max_pairwise_angle(vectors) -> float:
    args = [a for a in (_vec_arg(v) for v in vectors) if a is not None]
    return max(
        (angle_gap(a, b) for i, a in enumerate(args) for b in args[i + 1 :]),
        default=0.0,
    )


def check_sec_half_bound(
    vectors: Sequence[tuple[float, float]], tol: float = 1e-12
) -> tuple[float, float, bool]:
    """Triangle-defect bound: sum of norms over norm of sum <= sec(theta/2).

    Requires non-negative components and max pairwise angle <= pi/2.
    Returns (lhs, bound, holds).
    """
    if not vectors:
        raise PreconditionError("need at least one vector")
    for v in vectors:
        if v[0] < 0 or v[1] < 0:
            raise PreconditionError("vector components must be non-negative")
    theta = _max_pairwise_angle(vectors)
    if theta > math.pi / 2 + tol:
        raise PreconditionError("max pairwise angle exceeds pi/2")
    total = (sum(v[0] for v in vectors), sum(v[1] for v in vectors))
    norm_sum = math.hypot(*total)
    if norm_sum == 0:
        raise PreconditionError("vectors sum to zero")
    lhs = sum(math.hypot(*v) for v in vectors) / norm_sum
    bound = 1.0 / math.cos(theta / 2)
    return lhs, bound, lhs <= bound + tol


def check_ratio_bound(
    d0: tuple[float, float],
    d1: tuple[float, float],
    d2: tuple[float, float],
    tol: float = 1e-12,
) -> tuple[float, float, bool]:
    """Displacement-ratio bound: |d2|/|d1| <= sec(theta) whenever
    |d0 + d1| >= |d0 + d2| and all arguments lie in [0, pi/2).

    Returns (ratio, bound, holds).
    """
    for v in (d0, d1, d2):
        a = _vec_arg(v)
        if a is not None and not (0 <= a < math.pi / 2):
            raise PreconditionError("vector arguments must lie in [0, pi/2)")
    if math.hypot(d0[0] + d1[0], d0[1] + d1[1]) < math.hypot(
        d0[0] + d2[0], d0[1] + d2[1]
    ) - tol:
        raise PreconditionError("requires |d0 + d1| >= |d0 + d2|")
    theta = _max_pairwise_angle((d0, d1, d2))
    if theta >= math.pi / 2:
        raise PreconditionError("max pairwise angle must be below pi/2")
    n1 = math.hypot(*d1)
    if n1 == 0:
        raise PreconditionError("d1 must be nonzero")
    ratio = math.hypot(*d2) / n1
    bound = 1.0 / math.cos(theta)
    return ratio, bound, ratio <= bound + tol
