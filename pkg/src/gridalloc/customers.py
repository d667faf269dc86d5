"""Customer demands and allocation vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Customer:
    """One demand: attachment bus, complex demand (p.u.), utility, elasticity."""

    bus: int
    s: complex
    u: float = 1.0
    elastic: bool = False

    def __post_init__(self):
        if self.bus <= 0:
            raise ValueError("customers attach to non-root buses")
        if self.u < 0:
            raise ValueError("utility must be non-negative")


def utilities(customers) -> np.ndarray:
    return np.array([c.u for c in customers], dtype=float)


def demands(customers) -> np.ndarray:
    return np.array([c.s for c in customers], dtype=complex)


def inelastic_indices(customers) -> list[int]:
    return [i for i, c in enumerate(customers) if not c.elastic]


def elastic_indices(customers) -> list[int]:
    return [i for i, c in enumerate(customers) if c.elastic]


def total_utility(customers, x) -> float:
    return float(sum(c.u * xi for c, xi in zip(customers, x)))


def bus_loads(customers, x) -> dict[int, complex]:
    """Aggregate served demand per bus for an allocation vector."""
    loads: dict[int, complex] = {}
    for c, xi in zip(customers, x):
        if xi != 0:
            loads[c.bus] = loads.get(c.bus, 0j) + c.s * xi
    return loads


def check_allocation(customers, x) -> None:
    x = np.asarray(x, dtype=float)
    if len(x) != len(customers):
        raise ValueError("allocation length does not match customer count")
    if np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
        raise ValueError("allocation entries must lie in [0, 1]")
    for i, c in enumerate(customers):
        if not c.elastic and x[i] not in (0.0, 1.0):
            raise ValueError(f"inelastic customer {i} has fractional allocation")
