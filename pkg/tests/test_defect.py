import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from nhedge.capacitance import capacitance_at_gamma_points, capacitance_sweep
from nhedge.defect import (
    PTClass,
    classify_pt,
    decay_roots,
    defect_frequency,
    defect_matrices,
    edge_parameters,
    mu_closed_form,
    mu_flat_band,
    mu_pm,
    predict_defect,
    quasi_defect_eigenproblem_residual,
    select_decaying_root,
)
from nhedge.errors import InconsistentRootsError, NoFlatBandError
from nhedge.spectra import MaterialConfig, alpha_grid

moduli = st.builds(complex, st.floats(0.2, 3.0), st.floats(-3.0, 3.0))
ells = st.floats(1.0001, 6.0)


@settings(max_examples=200, deadline=None)
@given(k1=moduli, k2=moduli, l=ells)
def test_root_identities(k1, k2, l):
    bp, bm = decay_roots(k1, k2, l)
    r = k1 / k2
    assert abs(bp * bm + r) <= 1e-12 * max(1.0, abs(r))
    assert abs(bp + bm - l * (1 - r)) <= 1e-12 * max(1.0, abs(l * (1 - r)), abs(bp))
    for b in (bp, bm):
        assert abs(b * b - l * (1 - r) * b - r) <= 1e-11 * max(1.0, abs(b) ** 2)


@settings(max_examples=200, deadline=None)
@given(re=st.floats(0.2, 3.0), frac=st.floats(0.0, 0.999), l=ells)
def test_unbroken_roots_on_unit_circle(re, frac, l):
    # the exceptional point itself is a double root, accurate only to sqrt(eps)
    im = frac * re / np.sqrt(l * l - 1)
    k = complex(re, im)
    assert classify_pt(k, k.conjugate(), l) is PTClass.UNBROKEN
    for b in decay_roots(k, k.conjugate(), l):
        assert abs(abs(b) - 1) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(re=st.floats(0.2, 3.0), extra=st.floats(1e-6, 3.0), l=ells)
def test_broken_has_one_decaying_root(re, extra, l):
    im = re / np.sqrt(l * l - 1) * (1 + extra)
    k = complex(re, im)
    assert classify_pt(k, k.conjugate(), l) is PTClass.BROKEN
    bp, bm = decay_roots(k, k.conjugate(), l)
    assert abs(abs(bp * bm) - 1) < 1e-12
    b = select_decaying_root(bp, bm)
    assert b is not None and abs(b) < 1


def test_classification():
    l = 1.65
    bound = 1 / np.sqrt(l * l - 1)
    assert classify_pt(1 + 0.999 * bound * 1j, 1 - 0.999 * bound * 1j, l) is PTClass.UNBROKEN
    assert classify_pt(1 + 1.001 * bound * 1j, 1 - 1.001 * bound * 1j, l) is PTClass.BROKEN
    assert classify_pt(1 + 0.8j, 1 - 0.6j, l) is PTClass.NONE


def test_select_root_cases():
    assert select_decaying_root(2.0, 0.5) == 0.5
    assert select_decaying_root(1.0, -1.0) is None
    with pytest.raises(InconsistentRootsError):
        select_decaying_root(0.5, 0.2j)


@settings(max_examples=100, deadline=None)
@given(k1=moduli, k2=moduli, b=st.builds(complex, st.floats(-0.95, 0.95), st.floats(-0.95, 0.95)),
       c11=st.floats(1.0, 6.0), frac=st.floats(0.0, 0.99), ph=st.floats(-np.pi, np.pi))
def test_mu_closed_form_matches_eigenvalues(k1, k2, b, c11, frac, ph):
    c12 = frac * c11 * np.exp(1j * ph)
    C = np.array([[c11, c12], [np.conj(c12), c11]])
    assume(abs(b * b * k2 * k2 - k1 * k1) > 1e-3)
    _, _, M = defect_matrices(C, k1, k2, 7000.0, b)
    mu = np.array(mu_closed_form(C, k1, k2, 7000.0, b))
    scale = np.linalg.norm(M)
    assert abs(mu.sum() - np.trace(M)) <= 1e-10 * scale
    assert abs(mu.prod() - np.linalg.det(M)) <= 1e-10 * scale ** 2


def test_mu_pm_at_symmetric_points(geom):
    C0, Cpi = capacitance_at_gamma_points(geom)
    k1, k2, b = 1 + 1.38j, 1 - 1.42j, 0.3 - 0.2j
    for C in (C0, Cpi.real.astype(complex)):
        ref = np.linalg.eigvals(defect_matrices(C, k1, k2, 7000.0, b)[2])
        got = np.array(mu_pm(C, k1, k2, 7000.0, b))
        err = min(abs(got[0] - ref[0]) + abs(got[1] - ref[1]), abs(got[0] - ref[1]) + abs(got[1] - ref[0]))
        assert err < 1e-10 * np.abs(ref).max()


def test_edge_parameters_are_edge_eigenvalues(geom):
    edge = edge_parameters(geom)
    C0, Cpi = capacitance_at_gamma_points(geom)
    assert edge.lam1 == pytest.approx(np.linalg.eigvalsh(Cpi)[0], rel=1e-10)
    assert edge.lam2 == pytest.approx(np.linalg.eigvalsh(C0)[1], rel=1e-8)
    assert 0 < edge.lam1 < edge.lam2
    assert edge.l > 1


@pytest.fixture(scope="module")
def fig11(geom, alphas, sweep):
    return predict_defect(geom, MaterialConfig(1 + 1.38j, 1 - 1.42j), alphas, C=sweep)


def test_fig11_flat_band(fig11):
    f = fig11.flat
    assert f.flatness <= 1e-3
    assert f.other_flatness >= 1e-1
    assert abs(fig11.b0) == pytest.approx(0.44, abs=0.03)
    assert fig11.pt_class is PTClass.NONE
    assert f.curves.winding % 2 == 1
    assert fig11.omega == pytest.approx(defect_frequency(fig11.mu, np.pi))


def test_flatness_decreases_with_order(geom, alphas, sweep6):
    mat = MaterialConfig(1 + 1.38j, 1 - 1.42j)
    p6 = predict_defect(geom, mat, alphas, 6, sweep6)
    p8 = predict_defect(geom, mat, alphas, 8, capacitance_sweep(geom, alphas, 8))
    assert p8.flatness < p6.flatness


def test_flat_mu_solves_reduced_problem(geom, alphas, sweep, fig11):
    mat = MaterialConfig(1 + 1.38j, 1 - 1.42j)
    res = quasi_defect_eigenproblem_residual(geom, mat, fig11.b0, fig11.mu, alphas, C=sweep)
    assert res <= 1e-3
    off = quasi_defect_eigenproblem_residual(geom, mat, fig11.b0, 1.1 * fig11.mu, alphas, C=sweep)
    assert off > 10 * res


def test_fig9_decay_constant(geom, alphas, sweep):
    p = predict_defect(geom, MaterialConfig(1 + 0.8j, 1 - 0.6j), alphas, C=sweep)
    assert abs(p.b0) == pytest.approx(0.88, abs=0.03)


def test_unbroken_pt_has_no_flat_band(geom, alphas, sweep):
    mat = MaterialConfig(1 + 0.7j, 1 - 0.7j)
    with pytest.raises(NoFlatBandError):
        predict_defect(geom, mat, alphas, C=sweep)
    edge = edge_parameters(geom)
    b = select_decaying_root(*decay_roots(mat.kappa1, mat.kappa2, edge.l))
    assert b is None
    with pytest.raises(NoFlatBandError):
        mu_flat_band(geom, mat, b, alphas, C=sweep)
    with pytest.raises(NoFlatBandError):
        mu_flat_band(geom, mat, 1.0, alphas, C=sweep)


def test_flat_band_threshold_enforced(geom, alphas, sweep, fig11):
    mat = MaterialConfig(1 + 1.38j, 1 - 1.42j)
    with pytest.raises(NoFlatBandError):
        mu_flat_band(geom, mat, fig11.b0, alphas, C=sweep, threshold=1e-6)


def test_swapped_moduli_conjugate_prediction(geom, alphas, sweep):
    a = predict_defect(geom, MaterialConfig(1 + 1.4j, 1 - 1.4j), alphas, C=sweep)
    b = predict_defect(geom, MaterialConfig(1 - 1.4j, 1 + 1.4j), alphas, C=sweep)
    assert b.omega == pytest.approx(np.conj(a.omega), rel=1e-10)


def test_hermitian_balanced_has_no_small_residual(geom):
    al = alpha_grid(geom.period, 32)
    C = capacitance_sweep(geom, al)
    mat = MaterialConfig(1.0, 1.0)
    best = np.inf
    for r in np.linspace(0.05, 0.95, 10):
        for t in np.linspace(-np.pi, np.pi, 24, endpoint=False):
            b = r * np.exp(1j * t)
            for mu in mu_pm(C[0], 1.0, 1.0, mat.rho_bg, b):
                best = min(best, quasi_defect_eigenproblem_residual(geom, mat, b, mu, al, C=C))
    assert best > 1e-2
