"""Acceptance criteria; each test records one PASS/FAIL line shown in the terminal summary."""

import time

import numpy as np
import pytest

from nhedge import cli
from nhedge.bem import bem_quasi_capacitance
from nhedge.capacitance import (
    _capacitance_cached,
    capacitance_at,
    capacitance_at_gamma_points,
    capacitance_sweep,
    realspace_coeffs,
)
from nhedge.defect import decay_roots, predict_defect
from nhedge.errors import NoFlatBandError
from nhedge.finite import (
    detect_localized_mode,
    finite_spectrum,
    fit_decay,
    geometric_defect_spectrum,
    laurent_truncation_check,
    localized_modes,
)
from nhedge.geometry import build_material_defect_array, build_periodic
from nhedge.green import oracle_comparison
from nhedge.spectra import MaterialConfig, alpha_grid, band_structure, reflection_asymmetry, vorticity
from nhedge.topology import total_zak, zak_phases


@pytest.fixture
def report(record_property):
    def emit(n, ok, detail):
        line = f"C{n} {'PASS' if ok else 'FAIL'}: {detail}"
        print(line)
        record_property("acceptance", line)
        assert ok, line
    return emit


@pytest.fixture(scope="module")
def geom():
    return build_periodic()


@pytest.fixture(scope="module")
def grid(geom):
    return alpha_grid(geom.period, 128)


def _fresh():
    _capacitance_cached.cache_clear()
    return time.perf_counter()


def test_c1_green_oracle(geom, report):
    t0 = time.perf_counter()
    _, _, _, fast, slow = oracle_comparison(geom.period, n_points=100, n_terms=100_000)
    dt = time.perf_counter() - t0
    err = float(np.max(np.abs(fast - slow) / np.abs(slow)))
    report(1, err <= 1e-8 and dt < 10, f"max relative error {err:.2e} (<= 1e-8), {dt:.1f} s (< 10 s)")


def test_c2_capacitance(geom, grid, report):
    t0 = _fresh()
    L = geom.period
    probe = (-1 + (2 * np.arange(8) + 1) / 8) * np.pi / L
    bem = max(float(np.abs(capacitance_at(geom, a).C - B).max() / np.abs(B).max())
              for a in probe for B in [bem_quasi_capacitance(geom, a, 256)])
    C = capacitance_sweep(geom, grid)
    scale = np.linalg.norm(C, axis=(1, 2))
    herm = float(np.max(np.linalg.norm(C - C.conj().transpose(0, 2, 1), axis=(1, 2)) / scale))
    diag = float(np.max((np.abs(C[:, 0, 0] - C[:, 1, 1]) + np.abs(C[:, 0, 0].imag)) / scale))
    pd = float(np.min(np.linalg.eigvalsh(0.5 * (C + C.conj().transpose(0, 2, 1)))[:, 0] / scale))
    mirror = [int(np.argmin(np.abs(np.angle(np.exp(1j * (grid + a) * L))))) for a in grid]
    refl = float(np.max(np.linalg.norm(C[mirror] - C.conj(), axis=(1, 2)) / scale))
    dt = time.perf_counter() - t0
    ok = bem <= 1e-5 and max(herm, diag, refl) <= 1e-8 and pd >= -1e-8 and dt < 60
    report(2, ok, f"BEM error {bem:.1e}; hermitian {herm:.0e}, C11=C22 real {diag:.0e}, "
                  f"min eig/|C| {pd:.1e}, reflection {refl:.0e}; {dt:.0f} s")


def test_c3_gamma_identity(geom, report):
    t0 = _fresh()
    C0, _ = capacitance_at_gamma_points(geom)
    dt = time.perf_counter() - t0
    d = float(abs(C0[0, 1] + C0[0, 0]) / C0[0, 0].real)
    report(3, d <= 1e-4 and dt < 10, f"|C12+C11|/C11 = {d:.1e} (<= 1e-4), {dt:.1f} s")


def test_c4_vorticity(geom, grid, report):
    t0 = _fresh()
    C = capacitance_sweep(geom, grid)
    parts, ok = [], True
    for k1, k2 in ((1 + 1.2j, 1 - 1.6j), (1 + 0.8j, 1 - 0.6j)):
        spec = band_structure(geom, MaterialConfig(k1, k2), grid, C=C)
        nu, asym = vorticity(spec), reflection_asymmetry(spec)
        ok &= isinstance(nu, int) and nu == 0 and asym <= 1e-8
        parts.append(f"nu={nu} asym={asym:.0e}")
    dt = time.perf_counter() - t0
    report(4, ok and dt < 30, f"{'; '.join(parts)}; {dt:.1f} s")


def test_c5_zak(geom, grid, report):
    t0 = _fresh()
    C = capacitance_sweep(geom, grid)
    Cs = capacitance_sweep(geom.swapped(), grid)
    triv = max(abs(p) for p in zak_phases(geom, MaterialConfig(), grid, C=C).phases)
    swp = max(abs(abs(p) - np.pi) for p in zak_phases(geom.swapped(), MaterialConfig(), grid, C=Cs).phases)
    anti, total = 0.0, 0.0
    for k1, k2 in ((1 + 0.8j, 1 - 0.6j), (1 + 1.2j, 1 - 1.6j)):
        a = zak_phases(geom, MaterialConfig(k1, k2), grid, C=C).phases
        b = zak_phases(geom, MaterialConfig(k2, k1), grid, C=C).phases
        anti = max(anti, *(abs(x + y) for x, y in zip(a, b)))
        total = max(total, abs(total_zak(geom, MaterialConfig(k1, k2), grid, C=C)))
    unbroken = max(abs(p) for p in zak_phases(geom, MaterialConfig(1 + 0.7j, 1 - 0.7j), grid, C=C).phases)
    dt = time.perf_counter() - t0
    ok = triv <= 1e-3 and swp <= 1e-3 and anti <= 1e-6 and unbroken <= 1e-6 and total <= 1e-3 and dt < 60
    report(5, ok, f"trivial {triv:.0e}, swapped-pi {swp:.0e}, antisymmetry {anti:.0e}, "
                  f"unbroken {unbroken:.0e}, total {total:.0e}; {dt:.0f} s")


def test_c6_root_identities(report):
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    prod = ssum = circ = 0.0
    for _ in range(1000):
        k1, k2 = rng.uniform(0.5, 1.5, 2) + 1j * rng.uniform(-1.5, 1.5, 2)
        l = rng.uniform(1.0, 3.0)
        bp, bm = decay_roots(k1, k2, l)
        prod = max(prod, abs(bp * bm + k1 / k2))
        ssum = max(ssum, abs(bp + bm - l * (1 - k1 / k2)))
        re = rng.uniform(0.5, 1.5)
        k = complex(re, rng.uniform(0, 1) * re / np.sqrt(l * l - 1))
        circ = max(circ, *(abs(abs(b) - 1) for b in decay_roots(k, k.conjugate(), l)))
    dt = time.perf_counter() - t0
    ok = max(prod, ssum, circ) <= 1e-12 and dt < 1
    report(6, ok, f"product {prod:.0e}, sum {ssum:.0e}, unit circle {circ:.0e}; {dt:.2f} s")


def test_c7_flat_band(geom, grid, report):
    t0 = _fresh()
    mat = MaterialConfig(1 + 1.38j, 1 - 1.42j)
    p6 = predict_defect(geom, mat, grid, 6, capacitance_sweep(geom, grid, 6))
    p8 = predict_defect(geom, mat, grid, 8, capacitance_sweep(geom, grid, 8))
    dt = time.perf_counter() - t0
    ok = p6.flatness <= 1e-3 and p8.flatness < p6.flatness and p6.flat.other_flatness >= 0.1 and dt < 60
    report(7, ok, f"flatness {p6.flatness:.7e} (order 6) -> {p8.flatness:.7e} (order 8), "
                  f"other branch {p6.flat.other_flatness:.2f}; {dt:.0f} s")


def test_c8_defect_modes(geom, grid, report):
    C = capacitance_sweep(geom, grid)
    layout = build_material_defect_array(geom, 12)
    parts, ok = [], True
    for (k1, k2), target in (((1 + 1.38j, 1 - 1.42j), 0.44), ((1 + 0.8j, 1 - 0.6j), 0.88)):
        t0 = time.perf_counter()
        pred = predict_defect(geom, MaterialConfig(k1, k2), grid, C=C)
        modes = finite_spectrum(layout, layout.kappa_vector(k1, k2))
        found = localized_modes(modes)
        k = found[0] if len(found) == 1 else int(np.argmin(np.abs(modes.omega - pred.omega)))
        fit = fit_decay(modes, k, pred.omega)
        dt = time.perf_counter() - t0
        good = fit.e_omega <= 5e-3 and abs(fit.b_abs - target) <= 0.03 and len(found) == 1 and dt < 120
        ok &= good
        parts.append(f"|b|={fit.b_abs:.3f} (target {target}), e_omega={100 * fit.e_omega:.3f}%, "
                     f"localized modes {len(found)} (PR {modes.scores[k]:.3f})")
    report(8, ok, "; ".join(parts))


def test_c9_no_mode_unbroken(geom, grid, report):
    t0 = time.perf_counter()
    k1, k2 = 1 + 0.7j, 1 - 0.7j
    layout = build_material_defect_array(geom, 12)
    none_found = detect_localized_mode(finite_spectrum(layout, layout.kappa_vector(k1, k2))) is None
    try:
        predict_defect(geom, MaterialConfig(k1, k2), grid, C=capacitance_sweep(geom, grid))
        raised = False
    except NoFlatBandError:
        raised = True
    dt = time.perf_counter() - t0
    report(9, none_found and raised and dt < 60,
           f"no localized mode: {none_found}, no flat band raised: {raised}; {dt:.1f} s")


def test_c10_geometric_defect(geom, report):
    t0 = time.perf_counter()
    parts, ok = [], True
    for k1, k2 in ((1 - 0.5j, 1 + 0.5j), (1.0, 1.0)):
        modes, k, _ = geometric_defect_spectrum(geom, k1, k2, M=12)
        peak = int(np.argmax(np.abs(modes.vectors[:, k])))
        centred = modes.n == 49 and peak == 24
        ok &= centred
        parts.append(f"kappa1={k1}: peak resonator {peak} of {modes.n}, PR {modes.scores[k]:.3f}")
    dt = time.perf_counter() - t0
    report(10, ok and dt < 120, f"{'; '.join(parts)}; {dt:.1f} s")


def test_c11_laurent(geom, grid, report):
    t0 = time.perf_counter()
    mat = MaterialConfig(1 + 1.38j, 1 - 1.42j)
    b0 = predict_defect(geom, mat, grid, C=capacitance_sweep(geom, grid)).b0
    coeffs = realspace_coeffs(geom, 16)
    sizes = (8, 12, 16, 24)
    defects = [laurent_truncation_check(geom, mat, 16, n, b0, coeffs=coeffs)[0] for n in sizes]
    dt = time.perf_counter() - t0
    decreasing = all(b < a for a, b in zip(defects, defects[1:]))
    ok = defects[-1] <= 1e-2 and decreasing and dt < 60
    table = ", ".join(f"{n}: {d:.3f}" for n, d in zip(sizes, defects))
    report(11, ok, f"ratio defect by cells {table} (<= 1e-2 at 24, strictly decreasing); {dt:.0f} s")


REDUCED = """
[numerics]
grid = 32
n_mult = 6

[material]
kappa1 = [1.0, 1.38]
kappa2 = [1.0, -1.42]

[run]
cells_per_side = 6
defect_pairs = 6
laurent_cells = 8
m_max = 8
green_points = 20
green_terms = 20000
"""


def test_c12_determinism(tmp_path, report):
    cfg = tmp_path / "reduced.toml"
    cfg.write_text(REDUCED)
    pipelines = [[c] for c in cli.COMMANDS] + [["reproduce", "--figure", str(f)] for f in sorted(cli.FIGURES)]
    runs = {}
    for threads in (1, 4, 8):
        for argv in pipelines:
            _capacitance_cached.cache_clear()
            out = tmp_path / f"t{threads}" / "-".join(argv)
            code = cli.main([*argv, "--config", str(cfg), "--threads", str(threads), "--out", str(out)])
            files = {p.name: p.read_bytes() for p in out.iterdir() if p.name != "manifest.json"} if out.exists() else {}
            runs.setdefault(tuple(argv), []).append((code, files))
    differ = [" ".join(k) for k, v in runs.items() if any(r != v[0] for r in v[1:])]
    nfiles = sum(len(v[0][1]) for v in runs.values())
    report(12, not differ, f"{len(pipelines)} pipelines, {nfiles} files, threads 1/4/8; "
                           f"differing: {', '.join(differ) or 'none'}")
