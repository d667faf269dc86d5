import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridalloc import (
    Customer,
    PathIndex,
    check_ratio_bound,
    check_sec_half_bound,
    geometry,
    ratio_bounds,
    single_edge_network,
)
from gridalloc.network import Edge, RadialNetwork
from gridalloc.theory import (
    FLOOR_SNAP_EPS,
    InstanceGeometry,
    PreconditionError,
    angle_gap,
    snapped_floor,
)


def test_snapped_floor():
    assert snapped_floor(3.9999999999) == 4
    assert snapped_floor(4.0000000001) == 4
    assert snapped_floor(3.7) == 3
    assert snapped_floor(-0.2) == -1
    assert snapped_floor(4.0 - 2 * FLOOR_SNAP_EPS) == 3


def test_angle_gap_folding():
    assert angle_gap(0.1, 0.3) == pytest.approx(0.2)
    assert angle_gap(0.1, 2 * math.pi - 0.1) == pytest.approx(0.2)
    assert angle_gap(0.0, math.pi) == pytest.approx(math.pi)


def test_ratio_constants():
    g = InstanceGeometry(theta=math.radians(72), theta_zs=0.0, rho=1.0, eta=1)
    rb = ratio_bounds(g, 10)
    # sec 72 * sec 36 is exactly 4; the floor must not land on 3.
    assert rb.alpha_C == pytest.approx(0.2, abs=0)
    g0 = InstanceGeometry(theta=0.0, theta_zs=0.0, rho=1.0, eta=1)
    assert ratio_bounds(g0, 10).alpha_C == 0.5
    g3 = InstanceGeometry(theta=0.0, theta_zs=0.0, rho=1.0, eta=3)
    assert ratio_bounds(g3, 10).alpha_V == 0.25


def test_ratio_combined_and_scaled():
    g = InstanceGeometry(theta=0.0, theta_zs=0.0, rho=1.0, eta=1)
    rb = ratio_bounds(g, 4)
    assert rb.alpha == pytest.approx(1.0 / 4.0)  # 1 + 1 + 2
    scale = (1 - 1 / 4) / (2 * math.log2(4) + 1)
    assert rb.abar == pytest.approx(rb.alpha * scale)
    assert rb.abar_C == pytest.approx(rb.alpha_C * scale)
    assert rb.applicable


def test_ratio_bounds_n_edge_cases():
    g = InstanceGeometry(theta=0.0, theta_zs=0.0, rho=1.0, eta=1)
    assert ratio_bounds(g, 1).abar == 0.0
    with pytest.raises(ValueError):
        ratio_bounds(g, 0)


def test_ratio_bounds_inapplicable_flag():
    g = InstanceGeometry(theta=math.pi / 2, theta_zs=0.0, rho=1.0, eta=1)
    rb = ratio_bounds(g, 10)
    assert not rb.applicable
    assert 0 < rb.alpha_C < 1


def test_geometry_single_edge():
    net = single_edge_network(r=1.0, x=1.0)
    paths = PathIndex(net)
    customers = [
        Customer(bus=1, s=complex(1.0, 0.0)),
        Customer(bus=1, s=complex(0.0, 1.0)),
    ]
    g = geometry(net, customers, paths)
    assert g.theta == pytest.approx(math.pi / 2)
    # z at 45 deg, demands at 0 and 90: gap 45 deg each.
    assert g.theta_zs == pytest.approx(math.pi / 4)
    assert g.rho == 1.0
    assert g.eta == 1


def test_geometry_rho_eta():
    net = RadialNetwork(
        edges=(Edge(0, 1, 3.0, 4.0), Edge(1, 2, 0.3, 0.4), Edge(2, 3, 3.0, 4.0))
    )
    paths = PathIndex(net)
    g = geometry(net, [Customer(bus=3, s=1 + 1j)], paths)
    assert g.rho == pytest.approx(10.0)
    assert g.eta == 3


def test_geometry_empty_rejected():
    net = single_edge_network()
    with pytest.raises(ValueError):
        geometry(net, [], PathIndex(net))


def test_sec_half_bound_basic():
    lhs, bound, holds = check_sec_half_bound([(1.0, 0.0), (0.0, 1.0)])
    assert lhs == pytest.approx(math.sqrt(2))
    assert bound == pytest.approx(1 / math.cos(math.pi / 4))
    assert holds


def test_sec_half_bound_preconditions():
    with pytest.raises(PreconditionError):
        check_sec_half_bound([])
    with pytest.raises(PreconditionError):
        check_sec_half_bound([(-1.0, 0.5), (1.0, 0.5)])


def test_ratio_bound_basic():
    ratio, bound, holds = check_ratio_bound((1.0, 0.0), (1.0, 1.0), (1.0, 0.5))
    assert holds
    assert ratio <= bound


def test_ratio_bound_preconditions():
    with pytest.raises(PreconditionError):
        check_ratio_bound((0.0, 1.0), (1.0, 0.0), (-1.0, 0.0))
    with pytest.raises(PreconditionError):
        # |d0 + d1| < |d0 + d2| violates the hypothesis.
        check_ratio_bound((1.0, 0.0), (0.1, 0.0), (2.0, 0.0))
    with pytest.raises(PreconditionError):
        check_ratio_bound((1.0, 0.0), (0.0, 0.0), (0.5, 0.0))


@given(st.integers(min_value=0, max_value=10**9))
@settings(max_examples=200, deadline=None)
def test_sec_half_bound_property(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 8))
    # First-quadrant vectors always satisfy the angle precondition.
    vecs = [(float(rng.uniform(0, 5)), float(rng.uniform(0, 5))) for _ in range(k)]
    if all(v == (0.0, 0.0) for v in vecs):
        vecs[0] = (1.0, 0.0)
    lhs, bound, holds = check_sec_half_bound(vecs)
    assert holds, (lhs, bound, vecs)


@given(st.integers(min_value=0, max_value=10**9))
@settings(max_examples=200, deadline=None)
def test_ratio_bound_property(seed):
    rng = np.random.default_rng(seed)

    def vec(lim=math.radians(80)):
        a = float(rng.uniform(0, lim))
        m = float(rng.uniform(0.1, 5))
        return (m * math.cos(a), m * math.sin(a))

    d0, d1, d2 = vec(), vec(), vec()
    if math.hypot(d0[0] + d1[0], d0[1] + d1[1]) < math.hypot(d0[0] + d2[0], d0[1] + d2[1]):
        d1, d2 = d2, d1
    ratio, bound, holds = check_ratio_bound(d0, d1, d2)
    assert holds, (ratio, bound, d0, d1, d2)
