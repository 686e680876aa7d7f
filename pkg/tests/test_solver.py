import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from calogero.dynamics import PhaseState, lax
from calogero.errors import FactorizationError, PreconditionError
from calogero.matfun import expm
from calogero.models import get_model, random_state
from calogero.solver import (algebra_factorize, compare_runs, drift, integrate_rk4,
                             polar_factorize, rk4_step, solve_geodesic,
                             solve_geodesic_algebra)


def _group_element(e, q, eta):
    m, sp = e.model, e.split
    x = sp.embed_perp(eta)
    return (expm(m.to_matrix(e.theta.inverse_operator @ x)) @ expm(m.to_matrix(sp.embed(q)))
            @ expm(-m.to_matrix(x)))


@pytest.mark.parametrize("name", ["A1-split", "A2-compact", "A2-split-folded", "A1-split-cyclic2"])
def test_polar_factorization_recovers_forward_data(name):
    e = get_model(name)
    rng = np.random.default_rng(1)
    q = random_state(e, rng).q
    eta = 0.1 * rng.standard_normal(e.split.m)
    fac = polar_factorize(e.spec, _group_element(e, q, eta), (q, np.zeros(e.split.m)))
    assert fac.residual < 1e-12
    assert fac.reconstruction < 1e-10
    assert np.allclose(fac.q, q, atol=1e-10)
    assert np.allclose(fac.eta, eta, atol=1e-8)


def test_polar_factorization_of_pure_torus_element():
    e = get_model("A2-split-folded")
    q = random_state(e, np.random.default_rng(9)).q
    g = expm(e.model.to_matrix(e.split.embed(q)))
    fac = polar_factorize(e.spec, g, (q, np.zeros(e.split.m)))
    assert fac.iterations <= 1
    assert np.allclose(fac.q, q, atol=1e-12) and np.allclose(fac.eta, 0.0, atol=1e-12)


def test_rk4_preserves_constraint():
    e = get_model("A2-compact-folded")
    s = random_state(e, np.random.default_rng(10), scale=0.5)
    rec = integrate_rk4(e.spec, s, np.linspace(0, 0.5, 6), dt=1e-2)
    assert max(np.max(np.abs(e.split.k_coords(x))) for x in rec.series("xi")) < 1e-9


def test_algebra_geodesic_spectrum_of_x_is_q():
    e = get_model("A2-compact-rational")
    s = random_state(e, np.random.default_rng(11), scale=0.5)
    L0 = e.model.to_matrix(lax(e.spec, s).L)
    q0 = e.model.to_matrix(e.split.embed(s.q))
    rec = solve_geodesic(e.spec, s, np.linspace(0, 1, 6))
    for t, q in zip(rec.recorded_times, rec.series("q")):
        x_ev = np.sort(np.linalg.eigvals(q0 + t * L0).imag)
        q_ev = np.sort(np.diagonal(e.model.to_matrix(e.split.embed(q))).imag)
        assert np.allclose(x_ev, q_ev, atol=1e-10)


def test_polar_factorization_fails_loudly_far_from_identity():
    e = get_model("A2-split")
    rng = np.random.default_rng(2)
    q = random_state(e, rng).q
    eta = 100 * rng.standard_normal(e.split.m)
    with pytest.raises(FactorizationError):
        polar_factorize(e.spec, _group_element(e, q, eta))


@pytest.mark.parametrize("name", ["A2-split-rational", "A3-compact-rational", "D3-split-rational"])
def test_algebra_factorization_recovers_forward_data(name):
    e = get_model(name)
    m, sp = e.model, e.split
    rng = np.random.default_rng(3)
    q = random_state(e, rng).q
    eta = 0.1 * rng.standard_normal(sp.m)
    x = expm(m.ad(sp.embed_perp(eta))) @ sp.embed(q)
    fac = algebra_factorize(e.spec, x, (q, np.zeros(sp.m)))
    assert np.allclose(fac.q, q, atol=1e-10)
    back = fac.rho @ m.to_matrix(sp.embed(fac.q)) @ np.linalg.inv(fac.rho)
    assert np.allclose(back, m.to_matrix(x), atol=1e-10)


def test_free_motion_is_straight():
    e = get_model("A2-split")
    s = PhaseState([1.5, 0.5], [0.3, -0.2], np.zeros(8))
    times = np.linspace(0, 1, 5)
    for rec in (solve_geodesic(e.spec, s, times), integrate_rk4(e.spec, s, times, 0.01)):
        assert not rec.truncated
        expected = s.q + np.outer(times, s.p)
        assert np.allclose(rec.series("q"), expected, atol=1e-10)


def test_rk4_truncates_at_a_collision():
    e = get_model("A1-split")
    s = PhaseState([1.0], [-2.0], np.zeros(3))
    rec = integrate_rk4(e.spec, s, np.linspace(0, 1, 11), dt=0.01)
    assert rec.truncated
    assert 0 < len(rec) <= 6
    assert "singular" in rec.message


def test_rk4_step_matches_exact_free_flight():
    e = get_model("A1-split")
    s = PhaseState([1.0], [0.5], np.zeros(3))
    s2 = rk4_step(e.spec, s, 0.1)
    assert np.isclose(s2.q[0], 1.05) and np.isclose(s2.t, 0.1)


@pytest.mark.parametrize("name", ["A1-split", "A2-compact", "A2-compact-folded"])
def test_geodesic_conserves_invariants(name):
    e = get_model(name)
    s = random_state(e, np.random.default_rng(4), scale=0.5)
    rec = solve_geodesic(e.spec, s, np.linspace(0, 1, 11))
    assert not rec.truncated
    d = drift(rec)
    assert d["H"] < 1e-9 and d["eigenvalues"] < 1e-9 and d["casimir2"] < 1e-9


@settings(max_examples=5)
@given(st.integers(0, 2 ** 31))
def test_solvers_agree_on_sl2(seed):
    e = get_model("A1-compact")
    s = random_state(e, np.random.default_rng(seed), scale=0.5)
    times = np.linspace(0, 0.5, 6)
    rep = compare_runs(solve_geodesic(e.spec, s, times), integrate_rk4(e.spec, s, times, 1e-3))
    assert rep.passed, rep.to_dict()


def test_rational_geodesic_needs_rational_spec():
    e = get_model("A1-split")
    s = random_state(e, np.random.default_rng(5))
    with pytest.raises(PreconditionError):
        solve_geodesic_algebra(e.spec, s, [0.0, 1.0])


def test_initial_state_must_be_constrained():
    e = get_model("A1-split")
    s = PhaseState([1.0], [0.0], [0.3, 1.0, 1.0])
    with pytest.raises(PreconditionError):
        integrate_rk4(e.spec, s, [0.0, 1.0])


def test_compare_runs_needs_same_grid():
    e = get_model("A1-split")
    s = random_state(e, np.random.default_rng(6))
    a = integrate_rk4(e.spec, s, [0.0, 0.1])
    b = integrate_rk4(e.spec, s, [0.0, 0.2])
    with pytest.raises(PreconditionError):
        compare_runs(a, b)


def test_csv_layout_and_determinism():
    e = get_model("A1-split")
    s = random_state(e, np.random.default_rng(7))
    a = integrate_rk4(e.spec, s, [0.0, 0.1])
    b = integrate_rk4(e.spec, s, [0.0, 0.1])
    assert a.to_csv() == b.to_csv()
    header = a.to_csv().splitlines()[0].split(",")
    assert header[:4] == ["t", "q_1", "p_1", "xi_1"]
    assert header[-3:] == ["casimir2", "solver", "newton_iters"]
    assert "trL2" in header and "eig_1" in header and "eigim_1" in header
