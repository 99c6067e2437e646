"""Command-line front end: every pipeline writes CSV/JSON datasets and a manifest.

Exit codes: 0 success, 2 configuration error, 3 numerical accuracy error,
4 nothing found (no localized mode or no flat band).
"""

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .capacitance import capacitance_at, capacitance_at_gamma_points, capacitance_sweep, realspace_coeffs
from .config import config_from_dict, load_config
from .defect import classify_pt, decay_roots, edge_parameters, predict_defect
from .errors import AccuracyError, ConfigError, InvalidGeometryError, NHEdgeError, NoFlatBandError, NotFoundError
from .finite import (
    detect_localized_mode,
    finite_spectrum,
    fit_decay,
    geometric_defect_spectrum,
    laurent_truncation_check,
)
from .geometry import ChainGeometry, build_material_defect_array
from .green import GreenParams, QuasiPeriodicity, oracle_comparison
from .spectra import MaterialConfig, alpha_grid, band_structure, reflection_asymmetry, vorticity
from .topology import find_winding_point, phase_factor_trace, winding_number, zak_phases

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NOT_FOUND = 0, 2, 3, 4

FIGURES = {
    2: ("bands", [("", 1 + 1.4j, 1 - 1.4j)]),
    3: ("bands", [("", 1 + 1.2j, 1 - 1.6j)]),
    5: ("phasefactor", [("a", 1 + 0.8j, 1 - 0.6j), ("b", 1 + 0.7j, 1 - 0.7j), ("c", 1 + 0.6j, 1 - 0.8j)]),
    6: ("phasefactor", [("a", 1 + 1.38j, 1 - 1.42j), ("b", 1 + 1.4j, 1 - 1.4j), ("c", 1 + 1.42j, 1 - 1.38j)]),
    8: ("finite", [("", 1 + 1.38j, 1 - 1.42j)]),
    9: ("finite", [("", 1 + 0.8j, 1 - 0.6j)]),
    10: ("geomdefect", [("", 1 - 0.5j, 1 + 0.5j)]),
    11: ("defect", [("", 1 + 1.38j, 1 - 1.42j)]),
}


class Outputs:
    """Files of one run, kept in memory until written."""

    def __init__(self):
        self.files = {}
        self.timings = {}

    def csv(self, name, header, rows):
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_num(v) for v in row))
        self.files[name] = "\n".join(lines) + "\n"

    def json(self, name, data):
        self.files[name] = json.dumps(_plain(data), indent=2, sort_keys=True) + "\n"


def _num(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


class Context:
    """Module inputs built from a configuration, with a cached capacitance sweep."""

    def __init__(self, cfg):
        self.cfg = cfg
        g, m, n = cfg.geometry, cfg.material, cfg.numerics
        try:
            self.geom = ChainGeometry(g.radius, g.gap_in, g.gap_out, g.separation)
            k1, k2 = cfg.kappas()
            self.mat = MaterialConfig(k1, k2, m.kappa_bg, m.rho_bg, m.rho_b)
            self.params = GreenParams(target_tol=n.ewald_tol)
        except InvalidGeometryError as exc:
            raise ConfigError(f"[geometry] {exc}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.n_mult = n.n_mult
        self.alphas = alpha_grid(self.geom.period, n.grid)
        self.eps = n.eps_factor * np.pi / self.geom.period
        self._C = None

    @property
    def C(self):
        if self._C is None:
            self._C = capacitance_sweep(self.geom, self.alphas, self.n_mult, params=self.params,
                                        workers=self.cfg.run.threads, eps=self.eps)
        return self._C

    def with_kappas(self, k1, k2):
        other = Context.__new__(Context)
        other.__dict__.update(self.__dict__)
        other.cfg = self.cfg.with_kappas(k1, k2)
        m = self.mat
        other.mat = MaterialConfig(k1, k2, m.kappa_bg, m.rho_bg, m.rho_b)
        return other

    def predict(self):
        return predict_defect(self.geom, self.mat, self.alphas, self.n_mult, self.C, self.cfg.numerics.flatness,
                              self.eps, self.params)


def _cplx_cols(name, unit):
    return [f"re_{name} [{unit}]", f"im_{name} [{unit}]"]


def _cplx(z):
    return [z.real, z.imag]


# subcommands: each fills ``out`` and returns an optional pending error

def cmd_greencheck(ctx, out, prefix=""):
    r = ctx.cfg.run
    alphas, x, y, fast, slow = oracle_comparison(ctx.geom.period, r.green_points, r.green_terms, r.seed,
                                                 params=ctx.params)
    rel = np.abs(fast - slow) / np.abs(slow)
    header = ["alpha [1/length]", "x1 [length]", "x2 [length]", "y1 [length]", "y2 [length]",
              *_cplx_cols("accelerated", "1"), *_cplx_cols("oracle", "1"), "rel_err [1]"]
    rows = [[a, *p, *q, *_cplx(f), *_cplx(s), e] for a, p, q, f, s, e in zip(alphas, x, y, fast, slow, rel)]
    out.csv(prefix + "greencheck.csv", header, rows)
    worst = float(rel.max())
    out.json(prefix + "greencheck.json", {"max_rel_err": worst, "tolerance": r.green_tol, "points": len(rel),
                                           "spectral_terms": r.green_terms, "passed": worst <= r.green_tol})
    if worst > r.green_tol:
        return AccuracyError(f"accelerated kernel differs from the spectral sum by {worst:.2e}", worst)
    return None


def cmd_capmatrix(ctx, out, prefix=""):
    C = ctx.C
    header = ["alpha [1/length]", "re_C11 [1]", "re_C12 [1]", "im_C12 [1]", "residual [1]"]
    rows = []
    for a, c in zip(ctx.alphas, C):
        # alpha = 0 is extrapolated; report the truncation indicator at the first step
        qp = QuasiPeriodicity(a, ctx.geom.period)
        at = ctx.eps if qp.is_singular else a
        res = capacitance_at(ctx.geom, at, ctx.n_mult, params=ctx.params).residual
        rows.append([a, c[0, 0].real, c[0, 1].real, c[0, 1].imag, res])
    out.csv(prefix + "capmatrix.csv", header, rows)
    C0, Cpi = capacitance_at_gamma_points(ctx.geom, ctx.n_mult, ctx.eps, params=ctx.params)
    out.json(prefix + "capmatrix.json", {
        "period": ctx.geom.period,
        "C_zero": C0.tolist(),
        "C_edge": [[_plain(complex(v)) for v in row] for row in Cpi],
        "gamma_identity_defect": float(abs(C0[0, 1] + C0[0, 0]) / C0[0, 0]),
        "n_mult": ctx.n_mult,
    })


def cmd_bands(ctx, out, prefix=""):
    spec = band_structure(ctx.geom, ctx.mat, ctx.alphas, ctx.n_mult, ctx.C)
    header = ["alpha [1/length]", *_cplx_cols("lambda1", "length^2/time^2"),
              *_cplx_cols("lambda2", "length^2/time^2"), *_cplx_cols("omega1", "1/time"),
              *_cplx_cols("omega2", "1/time")]
    rows = [[a, *_cplx(l[0]), *_cplx(l[1]), *_cplx(w[0]), *_cplx(w[1])]
            for a, l, w in zip(spec.alphas, spec.lam, spec.omega)]
    out.csv(prefix + "bands.csv", header, rows)
    out.json(prefix + "bands.json", {"kappa1": ctx.mat.kappa1, "kappa2": ctx.mat.kappa2,
                                      "separable": spec.separable, "ambiguous_labels": list(spec.flagged)})
    return cmd_trace(ctx, out, prefix, spec)


def cmd_trace(ctx, out, prefix="", spec=None):
    spec = band_structure(ctx.geom, ctx.mat, ctx.alphas, ctx.n_mult, ctx.C) if spec is None else spec
    rows = [[j + 1, a, *_cplx(w[j])] for j in range(2) for a, w in zip(spec.alphas, spec.omega)]
    out.csv(prefix + "trace.csv", ["band [1]", "alpha [1/length]", *_cplx_cols("omega", "1/time")], rows)
    points = []
    for label, other in (("kappa1|kappa2", ctx), ("kappa2|kappa1", ctx.with_kappas(ctx.mat.kappa2, ctx.mat.kappa1))):
        try:
            p = other.predict()
        except NoFlatBandError:
            continue
        points.append([len(points) + 1, *_cplx(p.omega)])
    out.csv(prefix + "trace_defect.csv", ["structure [1]", *_cplx_cols("omega", "1/time")], points)


def cmd_vorticity(ctx, out, prefix=""):
    spec = band_structure(ctx.geom, ctx.mat, ctx.alphas, ctx.n_mult, ctx.C)
    nu = vorticity(spec)
    gap = spec.omega[:, 1] - spec.omega[:, 0]
    out.csv(prefix + "vorticity.csv", ["alpha [1/length]", *_cplx_cols("gap", "1/time")],
            [[a, *_cplx(g)] for a, g in zip(spec.alphas, gap)])
    out.json(prefix + "vorticity.json", {"vorticity": nu, "reflection_asymmetry": reflection_asymmetry(spec)})


def cmd_zak(ctx, out, prefix=""):
    res = zak_phases(ctx.geom, ctx.mat, ctx.alphas, ctx.n_mult, ctx.C)
    out.json(prefix + "zak.json", {"phase1": res.phases[0], "phase2": res.phases[1], "total": res.total,
                                    "grid": res.grid_size, "min_overlap": res.min_overlap,
                                    "kappa1": ctx.mat.kappa1, "kappa2": ctx.mat.kappa2})


def cmd_phasefactor(ctx, out, prefix=""):
    pf = [phase_factor_trace(ctx.geom, ctx.mat, ctx.alphas, j, ctx.n_mult, ctx.C) for j in (1, 2)]
    header = ["alpha [1/length]", *_cplx_cols("phase_factor1", "1"), *_cplx_cols("phase_factor2", "1")]
    out.csv(prefix + "phasefactor.csv", header,
            [[a, *_cplx(p1), *_cplx(p2)] for a, p1, p2 in zip(ctx.alphas, *pf)])
    windings = {}
    for j, trace in enumerate(pf, 1):
        try:
            windings[f"winding_origin{j}"] = winding_number(trace, 0.0)
        except NHEdgeError:
            windings[f"winding_origin{j}"] = None
        found = find_winding_point(trace)
        windings[f"winding_point{j}"] = None if found is None else {"point": found[0], "winding": found[1]}
        windings[f"max_unit_circle_defect{j}"] = float(np.max(np.abs(np.abs(trace) - 1.0)))
    out.json(prefix + "phasefactor.json", {"kappa1": ctx.mat.kappa1, "kappa2": ctx.mat.kappa2, **windings})


def cmd_defect(ctx, out, prefix=""):
    edge = edge_parameters(ctx.geom, ctx.n_mult, ctx.eps, ctx.params)
    bp, bm = decay_roots(ctx.mat.kappa1, ctx.mat.kappa2, edge.l)
    pt = classify_pt(ctx.mat.kappa1, ctx.mat.kappa2, edge.l)
    summary = {"lambda1": edge.lam1, "lambda2": edge.lam2, "l": edge.l, "b_plus": bp, "b_minus": bm,
               "pt_class": pt.value, "kappa1": ctx.mat.kappa1, "kappa2": ctx.mat.kappa2}
    try:
        pred = ctx.predict()
    except NoFlatBandError as exc:
        summary["error"] = str(exc)
        out.json(prefix + "defect.json", summary)
        return exc
    f = pred.flat
    summary.update({"b0": pred.b0, "abs_b0": abs(pred.b0), "mu": pred.mu, "omega": pred.omega,
                    "flatness": f.flatness, "other_flatness": f.other_flatness, "flat_branch": f.branch,
                    "gamma_winding": f.curves.winding, "branch_swap": f.swap})
    out.json(prefix + "defect.json", summary)
    if ctx.cfg.run.emit_mu:
        header = ["alpha [1/length]", *_cplx_cols("mu1", "length^2/time^2"), *_cplx_cols("mu2", "length^2/time^2")]
        out.csv(prefix + "defect_mu.csv", header,
                [[a, *_cplx(m[0]), *_cplx(m[1])] for a, m in zip(f.alphas, f.mu_branches)])
    return None


def _mode_rows(modes, k):
    u = modes.plot_vector(k)
    x = modes.layout.centers[:, 0]
    return [[i, x[i], u[i].real, u[i].imag, abs(u[i])] for i in range(len(u))]


MODE_HEADER = ["resonator [1]", "x_center [length]", "re_u [arb]", "im_u [arb]", "abs_u [arb]"]


def _spectrum_csv(out, name, modes):
    out.csv(name, ["index [1]", *_cplx_cols("omega", "1/time"), "participation_ratio [1]"],
            [[i, *_cplx(w), s] for i, (w, s) in enumerate(zip(modes.omega, modes.scores))])


def cmd_finite(ctx, out, prefix=""):
    cfg = ctx.cfg
    layout = build_material_defect_array(ctx.geom, cfg.run.cells_per_side)
    modes = finite_spectrum(layout, layout.kappa_vector(ctx.mat.kappa1, ctx.mat.kappa2), ctx.mat.rho_bg,
                            ctx.n_mult)
    _spectrum_csv(out, prefix + "finite_spectrum.csv", modes)
    try:
        pred = ctx.predict()
        predicted = pred.omega
    except NoFlatBandError:
        predicted = None
    summary = {"resonators": layout.n, "predicted_omega": predicted,
               "threshold": cfg.numerics.localization}
    found = detect_localized_mode(modes, cfg.numerics.localization)
    if found is None:
        summary["localized"] = False
        if predicted is not None:
            k = int(np.argmin(np.abs(modes.omega - predicted)))
            fit = fit_decay(modes, k, predicted)
            out.csv(prefix + "finite_nearest_mode.csv", MODE_HEADER, _mode_rows(modes, k))
            summary.update({"nearest_index": k, "nearest_omega": modes.omega[k], "nearest_score": modes.scores[k],
                            "nearest_b": fit.b, "nearest_abs_b": fit.b_abs, "nearest_e_omega": fit.e_omega})
        out.json(prefix + "finite.json", summary)
        return NotFoundError(f"no mode with participation ratio below {cfg.numerics.localization}")
    k, score = found
    fit = fit_decay(modes, k, predicted)
    out.csv(prefix + "finite_mode.csv", MODE_HEADER, _mode_rows(modes, k))
    summary.update({"localized": True, "index": k, "omega": modes.omega[k], "score": score,
                    "b": fit.b, "abs_b": fit.b_abs, "fit_residual": fit.residual, "cell_decay": fit.cell_decay,
                    "e_omega": fit.e_omega})
    out.json(prefix + "finite.json", summary)
    return None


def cmd_geomdefect(ctx, out, prefix=""):
    cfg = ctx.cfg
    modes, k, fit = geometric_defect_spectrum(ctx.geom, ctx.mat.kappa1, ctx.mat.kappa2, cfg.run.defect_pairs,
                                              ctx.mat.rho_bg, ctx.n_mult, cfg.numerics.localization)
    _spectrum_csv(out, prefix + "geomdefect_spectrum.csv", modes)
    out.csv(prefix + "geomdefect_mode.csv", MODE_HEADER, _mode_rows(modes, k))
    centre = int(np.nonzero(modes.layout.site == 0)[0][0])
    peak = int(np.argmax(np.abs(modes.vectors[:, k])))
    out.json(prefix + "geomdefect.json", {"resonators": modes.n, "index": k, "omega": modes.omega[k],
                                           "score": modes.scores[k], "peak_resonator": peak,
                                           "centre_resonator": centre, "cell_decay": fit.b_abs,
                                           "fit_residual": fit.residual})


def cmd_laurent(ctx, out, prefix=""):
    r = ctx.cfg.run
    pred = ctx.predict()
    coeffs = realspace_coeffs(ctx.geom, r.m_max, r.coeff_grid, ctx.n_mult, params=ctx.params)
    defect, b_est = laurent_truncation_check(ctx.geom, ctx.mat, r.m_max, r.laurent_cells, pred.b0, ctx.n_mult,
                                             coeffs, threshold=ctx.cfg.numerics.localization)
    out.json(prefix + "laurent.json", {"cells": r.laurent_cells, "m_max": r.m_max, "b0": pred.b0,
                                        "b_edge_cell": b_est, "ratio_defect": defect})


COMMANDS = {
    "greencheck": cmd_greencheck,
    "capmatrix": cmd_capmatrix,
    "bands": cmd_bands,
    "trace": cmd_trace,
    "vorticity": cmd_vorticity,
    "zak": cmd_zak,
    "phasefactor": cmd_phasefactor,
    "defect": cmd_defect,
    "finite": cmd_finite,
    "geomdefect": cmd_geomdefect,
    "laurent": cmd_laurent,
}


def reproduce(ctx, out, figure):
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure {figure}; choose from {sorted(FIGURES)}")
    name, presets = FIGURES[figure]
    pending = None
    for tag, k1, k2 in presets:
        sub = ctx.with_kappas(k1, k2)
        if figure == 11:
            sub.cfg = replace(sub.cfg, run=replace(sub.cfg.run, emit_mu=True))
        prefix = f"fig{figure}{tag}_"
        t0 = time.perf_counter()
        err = COMMANDS[name](sub, out, prefix)
        out.timings[prefix.rstrip("_")] = time.perf_counter() - t0
        pending = pending or err
    return pending


def run(cfg, command, figure=None):
    """Run one pipeline; returns ``(outputs, pending_error)`` without touching the disk."""
    ctx = Context(cfg)
    out = Outputs()
    t0 = time.perf_counter()
    if command == "reproduce":
        err = reproduce(ctx, out, figure)
    else:
        err = COMMANDS[command](ctx, out)
    out.timings["total"] = time.perf_counter() - t0
    return out, err


def write_outputs(out, cfg, command, directory, figure=None, status=EXIT_OK):
    os.makedirs(directory, exist_ok=True)
    digests = {}
    for name, text in sorted(out.files.items()):
        with open(os.path.join(directory, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        digests[name] = hashlib.sha256(text.encode()).hexdigest()
    manifest = {
        "command": command,
        "figure": figure,
        "version": __version__,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "files": digests,
        "timings_s": {k: round(v, 6) for k, v in sorted(out.timings.items())},
        "exit_status": status,
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _exit_code(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (NotFoundError, NoFlatBandError)):
        return EXIT_NOT_FOUND
    return EXIT_NUMERIC


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration or a previous run's manifest.json")
    common.add_argument("--out", help="output directory (overrides [run] out)")
    common.add_argument("--grid", type=int, help="alpha grid size (overrides [numerics] grid)")
    common.add_argument("--nmult", type=int, help="multipole order (overrides [numerics] n_mult)")
    common.add_argument("--threads", type=int, help="worker threads for alpha sweeps")
    common.add_argument("--kappa1", type=complex, help="bulk modulus of resonator 1, e.g. 1+1.38j")
    common.add_argument("--kappa2", type=complex, help="bulk modulus of resonator 2")
    parser = argparse.ArgumentParser(prog="nhedge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "greencheck": "accelerated kernel vs spectral partial sums",
        "capmatrix": "capacitance matrices over the alpha grid",
        "bands": "band functions and their complex-plane traces",
        "trace": "complex-plane band traces and defect frequencies",
        "vorticity": "winding of the complex band gap",
        "zak": "biorthogonal Zak phases",
        "phasefactor": "eigenmode phase-factor traces",
        "defect": "edge-mode prediction (decay constant, flat band, frequency)",
        "finite": "finite material-edge array eigenmodes",
        "geomdefect": "finite geometric-defect array eigenmodes",
        "laurent": "intra-cell ratio constancy on a Laurent section",
        "reproduce": "preset pipeline for one figure",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        if name == "defect":
            p.add_argument("--emit-mu", action="store_true", help="also write the mu branches as CSV")
        if name == "reproduce":
            p.add_argument("--figure", type=int, required=True, choices=sorted(FIGURES))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = cfg.override("numerics", grid=args.grid, n_mult=args.nmult)
        cfg = cfg.override("run", out=args.out, threads=args.threads)
        if getattr(args, "emit_mu", False):
            cfg = cfg.override("run", emit_mu=True)
        if args.kappa1 is not None or args.kappa2 is not None:
            k1, k2 = cfg.kappas()
            cfg = cfg.with_kappas(args.kappa1 if args.kappa1 is not None else k1,
                                  args.kappa2 if args.kappa2 is not None else k2)
        cfg = config_from_dict(cfg.to_dict())
    except ConfigError as exc:
        print(f"nhedge: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    figure = getattr(args, "figure", None)
    try:
        out, err = run(cfg, args.command, figure)
    except NHEdgeError as exc:
        code = _exit_code(exc)
        print(f"nhedge {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    except np.linalg.LinAlgError as exc:
        print(f"nhedge {args.command}: linear algebra failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    status = EXIT_OK if err is None else _exit_code(err)
    write_outputs(out, cfg, args.command, cfg.run.out, figure, status)
    if err is not None:
        print(f"nhedge {args.command}: {type(err).__name__}: {err}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
