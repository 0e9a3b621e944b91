import numpy as np
import pytest
from hypothesis import given, strategies as st

from closednet.reflection import ReflectionError, StepPath, phi, psi, reflect, regulator

jumps = st.lists(st.integers(-3, 3), min_size=1, max_size=40)


def path_from(js, spacing=1.0):
    return StepPath.from_jumps(spacing * np.arange(1, len(js) + 1), js)


def test_hand_example():
    x = path_from([1, -2, -1, 3, -5])
    # values 0, 1, -1, -2, 1, -4
    assert [psi(x, t) for t in range(6)] == [0, 0, 1, 2, 2, 4]
    assert [phi(x, t) for t in range(6)] == [0, 1, 0, 0, 3, 0]


def test_nonnegative_driver_is_unchanged():
    x = path_from([1, 1, -1, 2])
    assert np.array_equal(reflect(x).values, x.values)


def test_rejects_nonzero_start():
    x = StepPath([0.0, 1.0], [1.0, 0.0])
    with pytest.raises(ReflectionError):
        reflect(x)


def test_rejects_unsorted_times():
    with pytest.raises(ReflectionError):
        StepPath([0.0, 2.0, 1.0], [0.0, 1.0, 2.0])


def test_coincident_jumps_merge():
    x = StepPath.from_jumps([1.0, 1.0, 2.0], [1, 1, -1])
    assert x.times.tolist() == [0.0, 1.0, 2.0]
    assert x.values.tolist() == [0.0, 2.0, 1.0]


@given(jumps)
def test_reflected_path_is_nonnegative(js):
    assert np.all(reflect(path_from(js)).values >= 0)


@given(jumps)
def test_regulator_nondecreasing_from_zero(js):
    reg = regulator(path_from(js)).values
    assert reg[0] == 0 and np.all(np.diff(reg) >= 0)


@given(jumps)
def test_regulator_grows_only_at_zero(js):
    x = path_from(js)
    q, reg = reflect(x).values, regulator(x).values
    grows = np.nonzero(np.diff(reg) > 0)[0] + 1
    assert np.all(q[grows] == 0)


@given(jumps, jumps)
def test_lipschitz_in_sup_norm(a, b):
    n = max(len(a), len(b))
    a = a + [0] * (n - len(a))
    b = b + [0] * (n - len(b))
    xa, xb = path_from(a), path_from(b)
    dx = np.max(np.abs(xa.values - xb.values))
    dq = np.max(np.abs(reflect(xa).values - reflect(xb).values))
    dr = np.max(np.abs(regulator(xa).values - regulator(xb).values))
    assert dq <= 2 * dx and dr <= dx


@given(jumps)
def test_pointwise_matches_pathwise(js):
    x = path_from(js, 0.5)
    q = reflect(x)
    for t in np.linspace(0, 0.5 * len(js) + 1, 17):
        assert q(t) == phi(x, t)


def test_sup_distance_uses_union_of_epochs():
    a = StepPath([0.0, 1.0], [0.0, 1.0])
    b = StepPath([0.0, 2.0], [0.0, 3.0])
    assert a.sup_distance(b, 3.0) == 2.0
    assert a.sup_distance(b, 1.5) == 1.0
