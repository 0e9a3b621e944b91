import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from closednet import fluid
from closednet.model import NetworkSpec, derive


def spec_with_load(rho_k, mu_k):
    # one server, half the traffic to each client: loads (0.25, rho_k)
    lam = 2.0 * rho_k * mu_k
    return NetworkSpec([100], [lam], [[0.5, 0.5]], [4.0 * rho_k * mu_k, mu_k])


def test_closed_form_q(one_server):
    p = derive(one_server)
    t = 1.3
    assert fluid.q_of_t(p, t) == pytest.approx(0.5 * (1 - math.exp(-2 * t)), rel=1e-15)


def test_q_starts_at_zero_and_saturates(one_server):
    p = derive(one_server)
    assert fluid.q_of_t(p, 0.0) == 0.0
    assert fluid.q_of_t(p, 60.0) == pytest.approx(0.5, abs=1e-15)


def test_no_bottleneck_raises():
    spec = NetworkSpec([100], [2.0], [[0.5, 0.5]], [4.0, 1.0])
    p = derive(spec)
    p_bad = p.__class__(**{**p.__dict__, "rho": np.array([0.25, 0.5])})
    with pytest.raises(fluid.FluidDomainError):
        fluid.q_of_t(p_bad, 1.0)


def test_critical_load_gives_zero():
    spec = NetworkSpec([100], [2.0], [[0.5, 0.5]], [4.0, 1.0])
    p = derive(spec)
    t = np.linspace(0, 20, 201)
    assert np.all(fluid.q_of_t(p, t) == 0.0)
    assert np.all(fluid.int_q(p, t) == 0.0)


@given(st.floats(1.01, 8.0), st.floats(0.1, 5.0))
def test_ode_residual_small(rho_k, mu_k):
    p = derive(spec_with_load(rho_k, mu_k))
    assert p.rho[1] == pytest.approx(rho_k)
    t = np.linspace(0, 10, 401)
    assert np.max(np.abs(fluid.q_residual(p, t))) <= 1e-8


def test_int_q_matches_simpson(shared_hub):
    p = derive(shared_hub)
    g = np.linspace(0, 5, 51)
    quad = fluid.cumulative_simpson(lambda s: fluid.q_of_t(p, s), g, tol=1e-12)
    assert np.max(np.abs(quad - fluid.int_q(p, g))) <= 1e-9


def test_euler_error_halves(shared_hub):
    p = derive(shared_hub)
    errs = []
    for n in (500, 1000, 2000):
        g = np.linspace(0, 5, n + 1)
        errs.append(np.max(np.abs(fluid.solve_fluid_numeric(p, g).q - fluid.q_of_t(p, g))))
    for a, b in zip(errs, errs[1:]):
        assert 1.5 <= a / b <= 2.5


def test_euler_needs_uniform_grid(one_server):
    with pytest.raises(fluid.FluidDomainError):
        fluid.solve_fluid_numeric(derive(one_server), [0.0, 0.1, 0.3])


def test_class_system_occupancy_matches_balance_form(shared_hub):
    p = derive(shared_hub)
    g = np.linspace(0, 5, 5001)
    num = fluid.solve_fluid_numeric(p, g, "class")
    occ = fluid.occupancy(p, g, "balance")
    # per-class pools do not reproduce q exactly (proportional drain), so compare loosely
    assert np.max(np.abs(num.occupancy - occ)) < 0.05


def test_forms_agree_with_one_server(one_server):
    p = derive(one_server)
    assert fluid.rho_coefficients(p, 0, "beta_product") == pytest.approx(fluid.rho_coefficients(p, 0, "balance"))
    g = np.linspace(0, 5, 11)
    assert np.allclose(fluid.occupancy(p, g, "beta_product"), fluid.occupancy(p, g, "balance"))


def test_forms_differ_with_shared_servers(shared_hub):
    p = derive(shared_hub)
    product = fluid.rho_coefficients(p, 0, "beta_product")
    balance = fluid.rho_coefficients(p, 0, "balance")
    assert product[0] == balance[0]
    assert product[1] == pytest.approx(0.3) and balance[1] == pytest.approx(0.6)


def test_rho_of_t_one_server_closed_form(one_server):
    p = derive(one_server)
    t = 3.0
    q = 0.5 * (1 - math.exp(-6.0))
    assert fluid.rho_j_of_t(p, 0, t) == pytest.approx(0.5 * (1 - q), rel=1e-14)


def test_bottleneck_has_no_utilization_curve(one_server):
    with pytest.raises(fluid.FluidDomainError):
        fluid.rho_coefficients(derive(one_server), 1)


def test_occupancy_starts_at_alpha(shared_hub):
    p = derive(shared_hub)
    occ = fluid.occupancy(p, [0.0])
    assert np.allclose(occ[:, 0], p.alpha)


def test_x_star_shapes_and_start(shared_hub):
    p = derive(shared_hub)
    g = np.linspace(0, 5, 21)
    c = fluid.x_star(p, g)
    assert c.x_star_j.shape == (4, 21) and c.x_star_ij.shape == (2, 4, 21)
    assert np.all(c.x_star_j[:, 0] == 0)
    assert np.allclose(c.x_star_j[3], c.q)


def test_x_star_nonbottleneck_is_nonpositive_drift(shared_hub):
    # Non-bottleneck loads < 1 keep the centred fluid driver nonincreasing.
    p = derive(shared_hub)
    c = fluid.x_star(p, np.linspace(0, 5, 51))
    for j in range(3):
        assert np.all(np.diff(c.x_star_j[j]) <= 1e-12)


def test_negative_time_rejected(one_server):
    with pytest.raises(fluid.FluidDomainError):
        fluid.q_of_t(derive(one_server), -1.0)


@pytest.mark.parametrize("f, F", [
    (np.sin, lambda t: 1 - np.cos(t)),
    (lambda t: math.exp(-3 * t), lambda t: (1 - np.exp(-3 * t)) / 3),
    (lambda t: t ** 4, lambda t: t ** 5 / 5),
])
def test_simpson_on_known_integrals(f, F):
    g = np.linspace(0, 2, 9)
    assert np.max(np.abs(fluid.cumulative_simpson(f, g, tol=1e-13) - F(g))) <= 1e-11
