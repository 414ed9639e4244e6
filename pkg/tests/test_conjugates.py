import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gldual import conjugates as cj
from gldual import oracles
from gldual.errors import DenominatorNonPositive, NonSolvable, SupNotAttained
from gldual.grid import DIRICHLET, GridSpec, ScalarField, mean
from gldual.primal import GLParams
from gldual.theorem1 import K_of, construct_dual, eval_Jtilde
from gldual.theorem2 import construct_dual_t2, eval_J3
from gldual.verify import fd_gradient

from conftest import cosine, manufactured_instance, neumann_instance


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def _pairing(grid, a, b):
    return float(grid.weights @ (a.values * b.values))


def test_F_trivial_and_constant():
    g = GridSpec.line(5)
    res = cj.conj_F(ScalarField.zeros(g), ScalarField.constant(g, 2.0))
    assert res.value == 0.0 and res.maximizer.max_abs() == 0.0
    res = cj.conj_F(ScalarField.constant(g, 3.0), ScalarField.constant(g, 2.0))
    assert res.value == pytest.approx(9.0 / 4.0)
    with pytest.raises(DenominatorNonPositive):
        cj.conj_F(ScalarField.zeros(g), ScalarField.constant(g, 0.0))


def test_G0_examples():
    g = GridSpec.line(201, 1.0, DIRICHLET)
    r = ScalarField.from_function(g, lambda x: np.pi**2 * np.sin(np.pi * x))
    res = cj.conj_G0(r, ScalarField.zeros(g), 1.0)
    assert res.value == pytest.approx(np.pi**2 / 4, rel=1e-3)
    quad = _pairing(g, r.restrict(), res.maximizer) - cj.primal_G0(res.maximizer, 1.0)
    assert quad == pytest.approx(res.value, rel=1e-12)
    z = ScalarField.from_function(g, np.cos)
    assert cj.conj_G0(z, z, 1.0).value == 0.0


def test_G0_neumann_mean_guard(rng):
    g = GridSpec.line(6)
    with pytest.raises(NonSolvable):
        cj.conj_G0(ScalarField.constant(g, 1.0), ScalarField.zeros(g), 1.0)


def test_G1K_trivial_and_guard():
    g = GridSpec.line(4)
    p = GLParams(g, 1.0, 2.0, 0.5, 1e-2)
    zero = ScalarField.zeros(g)
    K = ScalarField.constant(g, 1.0)
    res = cj.conj_G1K(zero, zero, K, p)
    assert res.value == 0.0
    v1, v0 = ScalarField.constant(g, 0.6), ScalarField.constant(g, 0.2)
    expected = 0.5 * 0.36 / 1.4 + 0.04 / 4.0 + 0.5 * 0.2
    assert cj.conj_G1K(v1, v0, K, p).value == pytest.approx(expected)
    with pytest.raises(SupNotAttained) as info:
        cj.conj_G1K(v1, ScalarField(g, [0.2, -0.5, 0.2, 0.2]), K, p)
    assert info.value.node == 1


def test_guard_is_sharp():
    at_edge = oracles._g1k_node(0.5, 0.2, -0.4, 1.0, 1.0)
    inside = oracles._g1k_node(0.5, 0.2, 0.0, 1.0, 1.0)
    assert oracles.grows_without_bound(oracles.sup_growth(at_edge))
    assert not oracles.grows_without_bound(oracles.sup_growth(inside))


def _random_inputs(rng, boundary, n=6):
    g = GridSpec.line(n, 1.3, boundary)
    f = ScalarField(g, rng.normal(size=n)).restrict() if boundary == DIRICHLET else None
    p = GLParams(g, 0.8, 1.4, 0.6, 1e-2, f)
    z = ScalarField(g, rng.normal(size=n))
    v1 = ScalarField(g, rng.normal(size=n))
    if boundary != DIRICHLET:
        v1 = v1 + mean(z - v1)
    v0 = ScalarField(g, 0.4 * rng.normal(size=n))
    K = ScalarField(g, np.maximum(0.0, -2 * v0.values) + rng.uniform(0.2, 1.5, n))
    return p, z, v1, v0, K


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["neumann", "dirichlet"]))
def test_closed_forms_match_oracles(seed, boundary):
    rng = np.random.default_rng(seed)
    p, z, v1, v0, K = _random_inputs(rng, boundary)
    assert _rel(cj.conj_F(z, K).value, oracles.sup_F(z, K)[0]) < 1e-5
    assert _rel(cj.conj_G0(z, v1, p.gamma).value, oracles.sup_G0(z, v1, p.gamma)[0]) < 1e-5
    for with_f in (False, True) if p.source is not None else (False,):
        closed = cj.conj_G1K(v1, v0, K, p, with_f).value
        assert _rel(closed, oracles.sup_G1K(v1, v0, K, p, with_f)[0]) < 1e-5


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["neumann", "dirichlet"]))
def test_fenchel_young(seed, boundary):
    rng = np.random.default_rng(seed)
    p, z, v1, v0, K = _random_inputs(rng, boundary)
    g = p.grid
    with_f = p.source is not None
    res = cj.conj_F(z, K)
    assert res.value == pytest.approx(_pairing(g, z, res.maximizer) - cj.primal_F(res.maximizer, K), abs=1e-9)
    u = ScalarField(g, rng.normal(size=g.size)).restrict()
    assert res.value >= _pairing(g, z, u) - cj.primal_F(u, K) - 1e-12
    res = cj.conj_G0(z, v1, p.gamma)
    r = (z - v1).restrict()
    assert res.value == pytest.approx(_pairing(g, r, res.maximizer) - cj.primal_G0(res.maximizer, p.gamma), abs=1e-9)
    assert res.value >= _pairing(g, r, u) - cj.primal_G0(u, p.gamma) - 1e-12
    res = cj.conj_G1K(v1, v0, K, p, with_f)
    um, vm = res.maximizer
    attained = _pairing(g, v1, um) + _pairing(g, v0, vm) - cj.primal_G1K(um, vm, K, p, with_f)
    assert res.value == pytest.approx(attained, abs=1e-9)
    v = ScalarField(g, rng.normal(size=g.size))
    assert res.value >= _pairing(g, v1, u) + _pairing(g, v0, v) - cj.primal_G1K(u, v, K, p, with_f) - 1e-12


def test_decomposition_zero_fields():
    g = GridSpec.line(5)
    p = GLParams(g, 1.0, 1.0, 1.0, 1e-3)
    zero = ScalarField.zeros(g)
    assert cj.eval_JK_decomposition(p, zero, zero, zero, ScalarField.constant(g, 1e-3)) == 0.0


def test_elimination_reproduces_dual_functionals():
    p, cp = neumann_instance(17, seed_shape=cosine(2))
    d = construct_dual(p, cp.u0)
    K = K_of(d.v0s, p.epsilon)
    v1 = cj.eliminated_multiplier(p, d.v0s, d.zs)
    assert _rel(cj.eval_JK_decomposition(p, d.v0s, v1, d.zs, K), eval_Jtilde(p, d)) < 1e-9
    p2, u_star = manufactured_instance(17)
    d2 = construct_dual_t2(p2, u_star)
    K2 = K_of(d2.v0s, p2.epsilon)
    z2 = K2 * d2.uhat
    v1 = cj.eliminated_multiplier(p2, d2.v0s, z2)
    assert _rel(cj.eval_JK_decomposition(p2, d2.v0s, v1, z2, K2), eval_J3(p2, d2)) < 1e-9


def test_z_stationarity_needs_eliminated_multiplier(rng):
    # Dirichlet instance: in the Neumann regime G0* is infinite off zero-mean z* - v1*
    p, u_star = manufactured_instance(9)
    d = construct_dual_t2(p, u_star)
    K = K_of(d.v0s, p.epsilon)
    g = p.grid
    zs = K * d.uhat

    def along_z(v1):
        return lambda x: cj.eval_JK_decomposition(p, d.v0s, v1, ScalarField(g, x), K)

    v1_hat = cj.eliminated_multiplier(p, d.v0s, zs)
    assert fd_gradient(along_z(v1_hat), zs.values, free=g.active).norm() < 1e-7
    other = v1_hat + ScalarField(g, rng.normal(size=g.size))
    assert fd_gradient(along_z(other), zs.values, free=g.active).norm() > 1e-3
