import math

import numpy as np
import pytest
from scipy import stats as sps

from closednet.pointproc import (
    PointProcessError, PointProcessSpec, clt_constant, empirical_rate, make_stream,
    sample_gaps, stationary_distribution,
)

MEAN = 0.01
MMPP = PointProcessSpec("markov_modulated", rates=[0.5, 2.0], transition=[[0.9, 0.1], [0.2, 0.8]])
ALL_KINDS = [
    PointProcessSpec("poisson"),
    PointProcessSpec("gamma", shape=2.0),
    PointProcessSpec("gamma", shape=0.5),
    PointProcessSpec("deterministic"),
    MMPP,
]


def test_aliases_resolve():
    assert PointProcessSpec("erlang", shape=2).kind == "gamma"
    assert PointProcessSpec("mmpp", rates=[1.0], transition=[[1.0]]).kind == "markov_modulated"


def test_stream_needs_mean():
    with pytest.raises(PointProcessError):
        make_stream(PointProcessSpec("poisson"), 1)


@pytest.mark.parametrize("bad", [
    PointProcessSpec("gamma", mean=1.0, shape=0.0),
    PointProcessSpec("weird", mean=1.0),
    PointProcessSpec("markov_modulated", mean=1.0, rates=[1.0, 1.0], transition=[[0.5, 0.6], [0.5, 0.5]]),
    PointProcessSpec("poisson", mean=-1.0),
])
def test_bad_specs_reported(bad):
    assert bad.problems()


@pytest.mark.parametrize("spec", ALL_KINDS, ids=lambda s: f"{s.kind}-{s.shape}")
def test_mean_gap_matches(spec):
    gaps = sample_gaps(spec.with_mean(MEAN), 3, 40_000)
    assert abs(gaps.mean() - MEAN) < 5 * MEAN * math.sqrt(max(spec.scv(), 0.01) / 40_000) * 3


@pytest.mark.parametrize("spec", ALL_KINDS, ids=lambda s: f"{s.kind}-{s.shape}")
def test_epochs_strictly_increase(spec):
    e = make_stream(spec.with_mean(MEAN), 4).take(2000)
    assert np.all(np.diff(e) > 0) and e[0] > 0


def test_poisson_gaps_ks():
    gaps = sample_gaps(PointProcessSpec("poisson", mean=MEAN), 5, 20_000)
    assert sps.kstest(gaps, "expon", args=(0, MEAN)).pvalue > 1e-3


def test_erlang_gaps_ks():
    gaps = sample_gaps(PointProcessSpec("gamma", mean=MEAN, shape=2.0), 6, 20_000)
    assert sps.kstest(gaps, "gamma", args=(2.0, 0, MEAN / 2)).pvalue > 1e-3


def test_deterministic_epochs_are_exact_multiples():
    e = make_stream(PointProcessSpec("deterministic", mean=0.25), 0).take(8)
    assert e.tolist() == [0.25 * n for n in range(1, 9)]


def test_stationary_distribution_two_state():
    pi = stationary_distribution([[0.9, 0.1], [0.2, 0.8]])
    assert np.allclose(pi, [2 / 3, 1 / 3])


def test_modulated_dispersion_matches_simulation():
    spec = MMPP.with_mean(1.0)
    counts = [make_stream(spec, s).count(400.0) for s in range(400)]
    disp = np.var(counts, ddof=1) / np.mean(counts)
    assert abs(disp - spec.scv()) < 0.25 * spec.scv()


def test_count_and_last_before_agree():
    s = make_stream(PointProcessSpec("poisson", mean=0.1), 9)
    assert s.last_before(0.0) is None
    for t in (0.5, 1.0, 3.7):
        n = s.count(t)
        last = s.last_before(t)
        if n:
            assert last == s.history[n - 1] and last <= t
        else:
            assert last is None


def test_peek_does_not_consume():
    s = make_stream(PointProcessSpec("poisson", mean=1.0), 2)
    a = s.peek()
    assert s.peek() == a == s.advance()
    assert s.peek() > a


@pytest.mark.parametrize("spec", ALL_KINDS, ids=lambda s: f"{s.kind}-{s.shape}")
def test_rate_law_at_clt_scale(spec):
    N, mu, t = 10_000, 1.0, 1.0
    stream = make_stream(spec.with_mean(1.0 / (mu * N)), 21)
    dev = abs(empirical_rate(stream, t, N) - mu * t)
    assert dev <= 4 * clt_constant(spec, mu, t) / math.sqrt(N) + 1e-12


def test_clt_constant_poisson():
    assert clt_constant(PointProcessSpec("poisson"), 2.0, 3.0) == pytest.approx(math.sqrt(6.0))


def test_spec_round_trips_through_dict():
    for spec in ALL_KINDS:
        assert PointProcessSpec.from_dict(spec.to_dict()) == spec
