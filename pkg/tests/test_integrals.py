import math

import numpy as np
import pytest

from rblab import catalog, integrals as ig
from rblab import jets as jm
from rblab.chartcalc import LocalGeometry
from rblab.errors import ParameterError, PreconditionError
from rblab.soliton import SolitonData

ROUND = catalog.round_sphere_soliton()


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def test_weights_positive_and_volumes():
    g = ig.sphere_grid(1.0, 32, 64)
    assert np.all(g.weights > 0)
    assert ig.integrate(g, lambda x, t: 1.0) == pytest.approx(4 * math.pi, rel=1e-14)
    assert ig.integrate(ig.sphere_grid(4.0, 32, 64), lambda x, t: 1.0) == pytest.approx(math.pi, rel=1e-14)
    assert abs(ig.integrate(g, lambda x, t: np.cos(x[0]))) < 1e-14
    tor = ig.torus_grid(2.0, 3.0, 16, 16)
    assert ig.integrate(tor, lambda x, t: 1.0) == pytest.approx(6.0, rel=1e-14)


def test_fejer_rule_integrates_polynomials_in_cos_theta():
    g = ig.sphere_grid(1.0, 16, 32)
    for k in range(0, 12, 2):
        want = 4 * math.pi / (k + 1)
        assert ig.integrate(g, lambda x, t: np.cos(x[0]) ** k) == pytest.approx(want, rel=1e-13)


def test_midpoint_rule_is_second_order():
    errs = []
    for n in (16, 32, 64, 128):
        g = ig.sphere_grid(1.0, n, 2 * n, rule="midpoint")
        errs.append(abs(ig.integrate(g, lambda x, t: 1.0) - 4 * math.pi))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(r >= 4.0 - 1e-3 for r in ratios), ratios


def test_torus_quadrature_is_spectral():
    f = lambda x, t: np.exp(np.sin(x[0])) * np.cos(x[1]) ** 2
    want = 2 * math.pi * 1.2660658777520082 * math.pi  # 2 pi I0(1) times pi
    e16 = abs(ig.integrate(ig.torus_grid(nx=16, ny=16), f) - want)
    e32 = abs(ig.integrate(ig.torus_grid(nx=32, ny=32), f) - want)
    assert e16 < 1e-10 and e32 < 1e-12


def test_exact_divergence_integrates_to_zero_on_torus():
    d = catalog.torus_field()
    grid = ig.grid_for(d)
    geo = LocalGeometry(d.metric, grid.nodes, order=1)
    div = geo.div(geo.vector(d.xi)).value
    assert abs(ig.integrate_values(grid, div)) < 1e-10


def test_grid_errors():
    with pytest.raises(ParameterError):
        ig.sphere_grid(1.0, 4, 8)
    with pytest.raises(ParameterError):
        ig.torus_grid(nx=64, ny=7)
    with pytest.raises(ValueError):
        ig.sphere_grid(rule="gauss-legendre")
    with pytest.raises(ValueError):
        ig.QuadratureGrid(None, np.zeros((2, 2)), np.array([1.0, 0.0]), "bad")
    with pytest.raises(PreconditionError):
        ig.grid_for(catalog.hamilton_cigar())
    with pytest.raises(FloatingPointError), np.errstate(divide="ignore"):
        ig.integrate(ig.torus_grid(nx=8, ny=8), lambda x, t: 1.0 / x[0])


# ---------------------------------------------------------------------------
# Yano / Bochner
# ---------------------------------------------------------------------------

def test_yano_bochner_trivial_inputs():
    g = ig.sphere_grid(1.0, 16, 32)
    r = ig.yano_residual(g, g.metric, lambda x, t: (0.0, 0.0))
    assert r.lhs == 0 and r.rhs == 0 and r.residual == 0
    r = ig.bochner_residual(g, g.metric, lambda x, t: 0.0 * x[0] + 3.0)
    assert r.residual == 0


def test_yano_on_round_sphere_soliton_field():
    g = ig.grid_for(ROUND)
    assert ig.yano_residual(g, ROUND.metric, ROUND.xi).residual < 1e-5


def test_torus_field_identities():
    d = catalog.torus_field()
    g = ig.grid_for(d)
    y = ig.yano_residual(g, d.metric, d.xi)
    b = ig.bochner_residual(g, d.metric, d.lam)
    assert y.residual < 1e-10 and b.residual < 1e-10
    assert y.passed and b.passed
    assert max(y.l1.values()) > 0.1  # the terms are not individually zero


@pytest.mark.parametrize("which", ["yano", "bochner"])
def test_identities_converge_on_generic_sphere_inputs(which):
    d = catalog.sphere_field()
    res = []
    for n in (8, 12, 16):
        g = ig.grid_for(d, (n, 2 * n))
        r = ig.yano_residual(g, d.metric, d.xi) if which == "yano" else ig.bochner_residual(g, d.metric, d.lam)
        res.append(r.residual)
    floor = 1e-12
    assert all(b <= a / 2 or b < floor for a, b in zip(res, res[1:])), res
    assert res[-1] < 1e-6


def test_result_unpacks_and_rows():
    g = ig.grid_for(ROUND, (16, 32))
    r = ig.yano_residual(g, ROUND.metric, ROUND.xi)
    lhs, rhs, residual = r
    assert residual == abs(lhs - rhs)
    row = r.row()
    assert row[0] == "yano" and row[-1] in (True, False)
    assert ig.lemma_tolerance({"a": 2.0, "b": -1.0}, 1e-4) == pytest.approx(3e-4)


# ---------------------------------------------------------------------------
# lemmas
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("idn", ig.LEMMAS)
def test_lemmas_on_round_sphere(idn):
    d = catalog.round_sphere_soliton(1.0, (0.2, -0.4, 1.0), rho=0.1)
    r = ig.lemma_residual(idn, d, ig.grid_for(d, (48, 96)))
    assert r.passed, (r.residual, r.tolerance, r.terms)


def test_lemma_2_2_both_sides_vanish_on_sphere():
    r = ig.lemma_residual("L2.2", ROUND, ig.grid_for(ROUND, (32, 64)))
    assert abs(r.lhs) < 1e-6 and abs(r.rhs) < 1e-6


def test_lemma_2_3a_records_quarter_coefficient():
    r = ig.lemma_residual("L2.3a", ROUND, ig.grid_for(ROUND, (32, 64)))
    assert "quarter-coefficient rhs" in r.terms


def test_trivial_soliton_lemma_integrands_vanish():
    d = catalog.einstein_trivial(1.0, 0.2)
    g = ig.grid_for(d, (16, 32))
    for idn in ig.LEMMAS:
        r = ig.lemma_residual(idn, d, g)
        assert r.passed
        if idn != "L2.1":
            assert max(r.l1.values()) < 1e-10, (idn, r.l1)


def test_lemma_preconditions():
    with pytest.raises(PreconditionError, match="compact"):
        ig.lemma_residual("L2.1", catalog.hamilton_cigar())
    with pytest.raises(PreconditionError, match="soliton residual"):
        ig.lemma_residual("L2.1", catalog.sphere_field(), ig.sphere_grid(1.0, 16, 32, metric=catalog.sphere_field().metric))
    no_potential = SolitonData(ROUND.metric, ROUND.xi, 0.0, compact=True, params=ROUND.params, name="no-f")
    with pytest.raises(PreconditionError, match="gradient"):
        ig.lemma_residual("L2.3b", no_potential, ig.grid_for(ROUND, (16, 32)))
    schouten = catalog.round_sphere_soliton(rho=0.5)
    with pytest.raises(PreconditionError, match="undefined"):
        ig.lemma_residual("L2.3a", schouten, ig.grid_for(schouten, (16, 32)))
    with pytest.raises(ValueError):
        ig.lemma_residual("L9.9", ROUND)


def test_lemma_residual_decreases_with_refinement():
    d = catalog.round_sphere_soliton(1.0, (0.5, 0.0, 1.0), rho=0.2)
    prev = None
    for n in (8, 16, 32):
        r = ig.lemma_residual("L2.4", d, ig.grid_for(d, (n, 2 * n)))
        noise = 1e-12 * (1 + max(r.l1.values()))
        if prev is not None:
            assert r.residual <= max(prev * 1.5, noise)
        prev = r.residual


# ---------------------------------------------------------------------------
# Bianchi sweep
# ---------------------------------------------------------------------------

def test_bianchi_sweep_values():
    assert ig.bianchi_sweep(ig.sphere_grid(1.0, 16, 32)) < 1e-10
    assert ig.bianchi_sweep(ig.torus_grid(nx=16, ny=16)) == 0
    m = catalog.perturbed_sphere_metric(0.1)
    assert ig.bianchi_sweep(ig.sphere_grid(1.0, 40, 80, metric=m)) < 1e-7


def test_integrand_with_jets_helper():
    g = ig.sphere_grid(1.0, 16, 32)
    val = ig.integrate(g, lambda x, t: jm.cos(x[0]) ** 2)
    assert val == pytest.approx(4 * math.pi / 3, rel=1e-13)


def test_bochner_trace_lambda_needs_soliton_data():
    from rblab.errors import ConfigurationError
    from rblab.soliton import SOLVE
    g = ig.grid_for(ROUND, (8, 16))
    with pytest.raises(ConfigurationError):
        ig.bochner_residual(g, ROUND.metric, SOLVE)
    assert ig.bochner_residual(g, ROUND.metric, SOLVE, d=ROUND).residual < 1e-6
