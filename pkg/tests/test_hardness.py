import itertools
import math

import numpy as np
import pytest

from gridalloc import (
    SubSumInstance,
    gadget_simplified_voltage,
    gadget_voltage,
    subset_sum_dp,
    verify_reduction,
)
from gridalloc.customers import bus_loads
from gridalloc.hardness import MAX_VALUE, gadget_best_utility
from gridalloc.powerflow import sweep_solve


def _dp_reference(values, target):
    return any(
        sum(combo) == target
        for r in range(len(values) + 1)
        for combo in itertools.combinations(values, r)
    )


def test_subsum_validation():
    with pytest.raises(ValueError):
        SubSumInstance(values=(), target=3)
    with pytest.raises(ValueError):
        SubSumInstance(values=(0, 1), target=3)
    with pytest.raises(ValueError):
        SubSumInstance(values=(1,), target=0)
    with pytest.raises(ValueError):
        SubSumInstance(values=(MAX_VALUE + 1,), target=1)
    with pytest.raises(ValueError):
        SubSumInstance(values=(1,), target=MAX_VALUE + 1)


def test_dp_against_exhaustive():
    rng = np.random.default_rng(13)
    for _ in range(50):
        m = int(rng.integers(1, 9))
        values = tuple(int(v) for v in rng.integers(1, 15, size=m))
        target = int(rng.integers(1, 40))
        ss = SubSumInstance(values=values, target=target)
        assert subset_sum_dp(ss) == _dp_reference(values, target)


def test_gadget_voltage_structure():
    ss = SubSumInstance(values=(1, 2, 3), target=3)
    g = gadget_voltage(ss, alpha=0.6)
    assert len(g.customers) == 4
    m = 3
    for k, c in enumerate(g.customers[:-1]):
        assert c.u == pytest.approx(0.6 / (m + 1))
        assert c.s == pytest.approx(g.scale * ss.values[k])
    tail = g.customers[-1]
    assert tail.u == 1.0
    assert tail.s == pytest.approx(complex(0.0, -g.scale * ss.target))
    assert g.network.edge_of[1].z == complex(1.0, 1.0)
    lim = g.op_limits
    assert lim.vmax_sq - lim.v0 == pytest.approx(0.01)
    assert lim.v0 - lim.vmin_sq == pytest.approx(0.01)
    assert not lim.use_capacity


def test_gadget_voltage_param_validation():
    ss = SubSumInstance(values=(1,), target=1)
    with pytest.raises(ValueError):
        gadget_voltage(ss, alpha=0.0)
    with pytest.raises(ValueError):
        gadget_voltage(ss, beta=0.5)
    with pytest.raises(ValueError):
        gadget_voltage(ss, delta=-1.0)


def test_gadget_voltage_known_examples():
    yes = SubSumInstance(values=(1, 2, 3), target=3)
    no = SubSumInstance(values=(2, 4), target=3)
    one = SubSumInstance(values=(1,), target=1)
    assert gadget_best_utility(gadget_voltage(yes)).best_utility >= 1.0
    assert gadget_best_utility(gadget_voltage(no)).best_utility < 1.0
    assert gadget_best_utility(gadget_voltage(one)).best_utility >= 1.0


def test_gadget_matched_subset_drop_is_pure_loss():
    # Serving a matched subset leaves zero net linear drop, so the solved
    # voltage satisfies v0 - v1 = 2 * l exactly.
    ss = SubSumInstance(values=(2, 3), target=5)
    g = gadget_voltage(ss)
    x = [1.0, 1.0, 1.0]
    loads = bus_loads(g.customers, x)
    state = sweep_solve(g.network, loads, v0=g.op_limits.v0)
    assert g.op_limits.v0 - state.v[1] == pytest.approx(2 * state.l[1], rel=1e-9)
    assert g.op_limits.vmin_sq <= state.v[1] <= g.op_limits.vmax_sq


def test_gadget_simplified_structure():
    ss = SubSumInstance(values=(1, 2), target=2)
    g = gadget_simplified_voltage(ss)
    assert g.customers[0].s == pytest.approx(2 * g.scale * 1)
    assert g.customers[-1].s == pytest.approx(complex(0.0, -2 * g.scale * 2))
    assert g.s_limits.include_lower_voltage
    assert math.isinf(g.s_limits.chat[1])


def test_gadget_simplified_window_validation():
    ss = SubSumInstance(values=(1,), target=1)
    with pytest.raises(ValueError):
        gadget_simplified_voltage(ss, v_window=(0.5, 1.0))
    with pytest.raises(ValueError):
        gadget_simplified_voltage(ss, alpha=2.0)


def test_gadget_simplified_known_examples():
    yes = SubSumInstance(values=(1, 2, 3), target=3)
    no = SubSumInstance(values=(2, 4), target=3)
    assert gadget_best_utility(gadget_simplified_voltage(yes)).best_utility >= 1.0
    assert gadget_best_utility(gadget_simplified_voltage(no)).best_utility < 1.0


def test_verify_reduction_trivial():
    ss = SubSumInstance(values=(7,), target=7)
    assert verify_reduction(gadget_voltage(ss), ss)
    assert verify_reduction(gadget_simplified_voltage(ss), ss)


def test_verify_reduction_beta_scaled():
    ss = SubSumInstance(values=(3, 5), target=8)
    g = gadget_simplified_voltage(ss, beta=2.0)
    assert verify_reduction(g, ss)


def test_verify_reduction_random_batch_small():
    rng = np.random.default_rng(17)
    for _ in range(15):
        m = int(rng.integers(1, 7))
        values = tuple(int(v) for v in rng.integers(1, 20, size=m))
        target = int(rng.integers(1, 25))
        ss = SubSumInstance(values=values, target=target)
        assert verify_reduction(gadget_voltage(ss), ss)
        assert verify_reduction(gadget_simplified_voltage(ss), ss)
