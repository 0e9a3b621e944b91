import numpy as np
import pytest
from hypothesis import given, strategies as st

from closednet import stats
from closednet.des import Trajectory
from closednet.model import NetworkSpec, derive


def synthetic(Q_rows, grid=(0.0, 1.0, 2.0), L=10, records=None, rep=0):
    """Trajectory with given grid queue lengths for a single client."""
    G = len(grid)
    Q = np.asarray(Q_rows, dtype=np.int64).reshape(G, 1)
    z = lambda *s: np.zeros(s)
    zi = lambda *s: np.zeros(s, dtype=np.int64)
    return Trajectory(
        rep=rep, grid=np.asarray(grid, dtype=float), Q=Q, Qij=zi(G, 1, 1), sigma=zi(G, 1),
        predep=zi(G, 1), predep_has=np.zeros((G, 1), dtype=bool),
        occ_time=z(G, 1, L + 2), occ_q=z(G, 1, L + 2), predep_time=z(G, 1, L + 2),
        up=zi(1, L + 1), down=zi(1, L + 1), final_Q=zi(1), A=zi(1), D=zi(1), S=zi(1),
        Aij=zi(1, 1), anomalies=0, events=0, records=records,
    )


def test_all_zero_queues():
    trajs = [synthetic([0, 0, 0]) for _ in range(5)]
    est = stats.pmf_at(trajs, 0, 1.0, L=4)
    assert est.pmf.tolist() == [1, 0, 0, 0, 0] and est.tail == 0


def test_exact_frequencies_and_stderr():
    values = [0, 0, 1, 2, 2, 2, 7, 12]
    trajs = [synthetic([0, v, 0]) for v in values]
    est = stats.pmf_at(trajs, 0, 1.0, L=5)
    assert est.pmf.tolist() == [2 / 8, 1 / 8, 3 / 8, 0, 0, 0]
    assert est.tail == pytest.approx(2 / 8)
    assert np.allclose(est.stderr, np.sqrt(est.pmf * (1 - est.pmf) / 8))


@given(st.lists(st.integers(0, 30), min_size=1, max_size=60), st.integers(1, 12))
def test_mass_closes(values, L):
    est = stats.pmf_at([synthetic([0, v, 0]) for v in values], 0, 1.0, L)
    assert abs(est.pmf.sum() + est.tail - 1) <= 1e-12


@given(st.lists(st.integers(0, 8), min_size=2, max_size=40), st.randoms())
def test_permutation_invariant(values, rnd):
    trajs = [synthetic([0, v, 0]) for v in values]
    shuffled = trajs[:]
    rnd.shuffle(shuffled)
    a, b = stats.pmf_at(trajs, 0, 1.0, 5), stats.pmf_at(shuffled, 0, 1.0, 5)
    assert np.array_equal(a.pmf, b.pmf) and a.tail == b.tail


def test_stderr_shrinks_by_sqrt2_when_reps_double():
    trajs = [synthetic([0, v, 0]) for v in [0, 1, 1, 2, 0, 3, 1, 0]]
    a = stats.pmf_at(trajs, 0, 1.0, 4)
    b = stats.pmf_at(trajs + trajs, 0, 1.0, 4)
    nz = a.stderr > 0
    ratio = a.stderr[nz] / b.stderr[nz]
    assert np.all(np.abs(ratio / np.sqrt(2) - 1) <= 0.2)


def test_off_grid_time_raises():
    with pytest.raises(ValueError):
        stats.pmf_at([synthetic([0, 0, 0])], 0, 0.5)


def test_predeparture_from_hand_records():
    recs = [(np.array([0.4, 1.0, 1.7]), np.array([2, 0, 5]))]
    trajs = [synthetic([0, 0, 0], records=recs)]
    assert stats.predeparture_values(trajs, 0, 0.3) == (pytest.approx([0]), 1)
    assert stats.predeparture_values(trajs, 0, 0.4)[0].tolist() == [2]
    assert stats.predeparture_values(trajs, 0, 1.0)[0].tolist() == [0]
    assert stats.predeparture_values(trajs, 0, 2.0)[0].tolist() == [5]


def test_predeparture_falls_back_to_grid_snapshot():
    tr = synthetic([0, 0, 0])
    tr.predep[1, 0] = 3
    tr.predep_has[1, 0] = True
    est = stats.predeparture_pmf_at([tr], 0, 1.0, 4)
    assert est.pmf.tolist() == [0, 0, 0, 1, 0] and est.no_epoch_fraction == 0
    est0 = stats.predeparture_pmf_at([tr], 0, 0.0, 4)
    assert est0.pmf[0] == 1 and est0.no_epoch_fraction == 1


def test_integrals_hand_case():
    spec = NetworkSpec([100], [4.0], [[0.5, 0.5]], [4.0, 1.0])
    params = derive(spec)
    tr = synthetic([0, 0, 0], L=4)
    tr.occ_time[1, 0, :3] = [0.5, 0.3, 0.2]
    tr.occ_q[1, 0, :3] = [0.1, 0.05, 0.0]
    tr.predep_time[1, 0, :4] = [0.4, 0.25, 0.15, 0.2]
    est = stats.theorem1_integrals([tr], 0, 1.0, 3, params)
    assert np.allclose(est.lhs, [0.5 * 0.5 - 0.5 * 0.1, 0.5 * 0.3 - 0.5 * 0.05, 0.1, 0.0])
    assert np.allclose(est.rhs, [0.25, 0.15, 0.2, 0.0])


def test_integrals_zero_beyond_observed_levels():
    spec = NetworkSpec([100], [4.0], [[0.5, 0.5]], [4.0, 1.0])
    tr = synthetic([0, 0, 0], L=10)
    tr.occ_time[1, 0, 0] = 1.0
    tr.predep_time[1, 0, 0] = 1.0
    est = stats.theorem1_integrals([tr, tr], 0, 1.0, 9, derive(spec))
    assert np.all(est.lhs[1:] == 0) and np.all(est.rhs == 0)


def test_integrals_reject_too_many_levels():
    spec = NetworkSpec([100], [4.0], [[0.5, 0.5]], [4.0, 1.0])
    with pytest.raises(ValueError):
        stats.theorem1_integrals([synthetic([0, 0, 0], L=3)], 0, 1.0, 3, derive(spec))


@pytest.mark.parametrize("p, q, d", [
    ([0.2, 0.3, 0.5], [0.2, 0.3, 0.5], 0.0),
    ([1.0, 0.0], [0.0, 1.0], 1.0),
    ([0.5, 0.5], [1.0, 0.0], 0.5),
])
def test_tv_examples(p, q, d):
    assert stats.tv_distance(p, q) == pytest.approx(d)


def test_tv_needs_same_support():
    with pytest.raises(ValueError):
        stats.tv_distance([1.0], [0.5, 0.5])


@given(st.floats(0.0, 0.99), st.integers(0, 20))
def test_geometric_pmf_closes(rho, L):
    g = stats.geometric_pmf(rho, L)
    assert g.size == L + 2 and abs(g.sum() - 1) <= 1e-12


def test_invariance_identical_laws():
    trajs = [synthetic([0, v, v]) for v in [0, 1, 2, 0, 1]]
    rep = stats.time_invariance_check(trajs, 0, 1.0, 2.0, mu_j=1.0)
    assert rep.tv == 0 and rep.passed


def test_invariance_burn_in_enforced():
    trajs = [synthetic([0, 1, 1])]
    with pytest.raises(ValueError):
        stats.time_invariance_check(trajs, 0, 1.0, 2.0, mu_j=0.25)


def test_crossing_violation_detected():
    tr = synthetic([0, 0, 0], L=3)
    tr.up[0, :] = [2, 1, 0, 0]
    tr.down[0, :] = [0, 2, 1, 0]
    assert stats.crossing_identity_violations(tr) == []
    tr.down[0, 2] = 0
    assert stats.crossing_identity_violations(tr) == [(0, 2)]
