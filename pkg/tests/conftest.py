"""Shared generators for randomized tests."""

from __future__ import annotations

import math

import numpy as np
import pytest

from gridalloc import Customer, Edge, PathIndex, RadialNetwork, network_38


def random_tree(
    rng: np.random.Generator,
    n_buses: int,
    r_range=(1e-4, 1e-2),
    x_range=(1e-4, 1e-2),
    capacity_range=(0.5, 5.0),
    z_angle_range=None,
) -> RadialNetwork:
    """Random rooted tree on buses 0..n_buses-1 (bus 0 root, single child)."""
    assert n_buses >= 2
    edges = []
    for j in range(1, n_buses):
        parent = 0 if j == 1 else int(rng.integers(1, j))
        if z_angle_range is None:
            r = float(rng.uniform(*r_range))
            x = float(rng.uniform(*x_range))
        else:
            mag = float(rng.uniform(r_range[0], r_range[1]))
            ang = float(rng.uniform(*z_angle_range))
            r, x = mag * math.cos(ang), mag * math.sin(ang)
        cap = float(rng.uniform(*capacity_range))
        edges.append(Edge(parent, j, r, x, cap))
    return RadialNetwork(edges=tuple(edges))


def random_customers(
    rng: np.random.Generator,
    net: RadialNetwork,
    n: int,
    mag_range=(1e-3, 0.2),
    phase_range=(-math.radians(36), math.radians(36)),
    unit_utilities=False,
) -> list[Customer]:
    buses = net.non_root_buses
    out = []
    for _ in range(n):
        mag = float(rng.uniform(*mag_range))
        ang = float(rng.uniform(*phase_range))
        s = mag * complex(math.cos(ang), math.sin(ang))
        u = 1.0 if unit_utilities else float(rng.uniform(0.1, 10.0))
        out.append(Customer(bus=int(rng.choice(buses)), s=s, u=u))
    return out


def narrow_angle_instance(rng: np.random.Generator, n_max: int = 18):
    """Instance with demand and impedance angle spreads strictly below 90 deg."""
    n_buses = int(rng.integers(3, 9))
    net = random_tree(
        rng,
        n_buses,
        r_range=(5e-3, 5e-2),
        capacity_range=(0.05, 0.6),
        z_angle_range=(math.radians(15), math.radians(75)),
    )
    n = int(rng.integers(1, n_max + 1))
    customers = random_customers(
        rng,
        net,
        n,
        mag_range=(5e-3, 0.3),
        phase_range=(math.radians(10), math.radians(60)),
    )
    return net, customers


@pytest.fixture(scope="session")
def net38():
    return network_38()


@pytest.fixture(scope="session")
def paths38(net38):
    return PathIndex(net38)
