"""TOML experiment configuration with strict key checking.

Four tables are recognised; every key is optional and defaults to the
value below.

``[geometry]``
    ``radius = 1.0``, ``gap_in = 0.5``, ``gap_out = 6.0``,
    ``separation = "gap"`` (or ``"center"``: gaps are centre distances).
``[material]``
    ``kappa1 = [1.0, 0.0]``, ``kappa2 = [1.0, 0.0]`` as ``[re, im]`` pairs,
    ``kappa_bg = 7000.0``, ``rho_bg = 7000.0``, ``rho_b = 1.0``.
``[numerics]``
    ``n_mult = 10`` (multipole order), ``grid = 128`` (alpha points),
    ``eps_factor = 1e-3`` (alpha -> 0 extrapolation step in units of pi/L),
    ``ewald_tol = 1e-10``, ``flatness = 1e-3``, ``localization = 0.25``.
``[run]``
    ``out = "out"``, ``threads = 1``, ``cells_per_side = 12`` (material-edge
    array, 4 * cells_per_side resonators), ``defect_pairs = 12`` (geometric
    defect, 4 M + 1 resonators), ``m_max = 16``, ``laurent_cells = 24``,
    ``coeff_grid = 64``, ``green_points = 100``, ``green_terms = 100000``,
    ``green_tol = 1e-8``, ``seed = 0``, ``emit_mu = false``.
"""

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class GeometryBlock:
    radius: float = 1.0
    gap_in: float = 0.5
    gap_out: float = 6.0
    separation: str = "gap"


@dataclass(frozen=True)
class MaterialBlock:
    kappa1: tuple = (1.0, 0.0)
    kappa2: tuple = (1.0, 0.0)
    kappa_bg: float = 7000.0
    rho_bg: float = 7000.0
    rho_b: float = 1.0


@dataclass(frozen=True)
class NumericsBlock:
    n_mult: int = 10
    grid: int = 128
    eps_factor: float = 1e-3
    ewald_tol: float = 1e-10
    flatness: float = 1e-3
    localization: float = 0.25


@dataclass(frozen=True)
class RunBlock:
    out: str = "out"
    threads: int = 1
    cells_per_side: int = 12
    defect_pairs: int = 12
    m_max: int = 16
    laurent_cells: int = 24
    coeff_grid: int = 64
    green_points: int = 100
    green_terms: int = 100000
    green_tol: float = 1e-8
    seed: int = 0
    emit_mu: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: GeometryBlock = field(default_factory=GeometryBlock)
    material: MaterialBlock = field(default_factory=MaterialBlock)
    numerics: NumericsBlock = field(default_factory=NumericsBlock)
    run: RunBlock = field(default_factory=RunBlock)

    def to_dict(self):
        d = asdict(self)
        for k in ("kappa1", "kappa2"):
            d["material"][k] = list(d["material"][k])
        return d

    def digest(self):
        """SHA-256 of the canonical JSON form."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def kappas(self):
        return complex(*self.material.kappa1), complex(*self.material.kappa2)

    def with_kappas(self, kappa1, kappa2):
        k1, k2 = complex(kappa1), complex(kappa2)
        mat = replace(self.material, kappa1=(k1.real, k1.imag), kappa2=(k2.real, k2.imag))
        return replace(self, material=mat)

    def override(self, block, **values):
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        return replace(self, **{block: replace(getattr(self, block), **values)})


BLOCKS = {
    "geometry": GeometryBlock,
    "material": MaterialBlock,
    "numerics": NumericsBlock,
    "run": RunBlock,
}


def _line_of(text, table, key):
    """1-based line of ``key`` inside ``[table]``, or None."""
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line.strip("[] ")
            if key is None and current == table:
                return n
            continue
        if current == table and line.split("=", 1)[0].strip().strip('"') == key:
            return n
    return None


def _where(text, table, key=None):
    n = _line_of(text, table, key) if text else None
    return f"line {n}: " if n else ""


def _coerce(cls, table, key, value, text):
    kind = {f.name: f.type for f in fields(cls)}[key]
    default = getattr(cls(), key)
    where = _where(text, table, key)
    if isinstance(default, tuple):
        if (not isinstance(value, (list, tuple)) or len(value) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
            raise ConfigError(f"{where}[{table}] {key} must be a [re, im] pair of numbers")
        return (float(value[0]), float(value[1]))
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}[{table}] {key} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}[{table}] {key} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}[{table}] {key} must be a number")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}[{table}] {key} must be a string ({kind})")
    return value


def config_from_dict(data, text=None):
    """Build a validated :class:`ExperimentConfig`; ``text`` is used for line numbers."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    blocks = {}
    for table, value in data.items():
        if table not in BLOCKS:
            raise ConfigError(f"{_where(text, table)}unknown table [{table}] "
                              f"(expected one of {', '.join(BLOCKS)})")
        if not isinstance(value, dict):
            raise ConfigError(f"{table} must be a table")
        cls = BLOCKS[table]
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, v in value.items():
            if key not in known:
                raise ConfigError(f"{_where(text, table, key)}unknown key {key!r} in [{table}] "
                                  f"(allowed: {', '.join(sorted(known))})")
            kwargs[key] = _coerce(cls, table, key, v, text)
        blocks[table] = cls(**kwargs)
    cfg = ExperimentConfig(**blocks)
    _check_ranges(cfg)
    return cfg


def _check_ranges(cfg):
    g, n, r = cfg.geometry, cfg.numerics, cfg.run
    checks = [
        (g.separation in ("gap", "center"), "geometry", "separation", "must be \"gap\" or \"center\""),
        (n.n_mult >= 1, "numerics", "n_mult", "must be >= 1"),
        (n.grid >= 4 and n.grid % 2 == 0, "numerics", "grid", "must be even and >= 4"),
        (n.eps_factor > 0, "numerics", "eps_factor", "must be positive"),
        (n.ewald_tol > 0, "numerics", "ewald_tol", "must be positive"),
        (n.flatness > 0, "numerics", "flatness", "must be positive"),
        (0 < n.localization <= 1, "numerics", "localization", "must lie in (0, 1]"),
        (r.threads >= 1, "run", "threads", "must be >= 1"),
        (r.cells_per_side >= 4, "run", "cells_per_side", "must be >= 4"),
        (r.defect_pairs >= 1, "run", "defect_pairs", "must be >= 1"),
        (r.m_max >= 1, "run", "m_max", "must be >= 1"),
        (r.laurent_cells >= 2, "run", "laurent_cells", "must be >= 2"),
        (r.coeff_grid >= 64 and r.coeff_grid % 2 == 0, "run", "coeff_grid", "must be even and >= 64"),
        (r.green_points >= 1, "run", "green_points", "must be >= 1"),
        (r.green_terms >= 1, "run", "green_terms", "must be >= 1"),
    ]
    for ok, table, key, msg in checks:
        if not ok:
            raise ConfigError(f"[{table}] {key} {msg}")


def load_config(path=None):
    """Read a TOML file, or the ``config`` block of a run manifest (``.json``).

    ``None`` gives the defaults.
    """
    if path is None:
        return ExperimentConfig()
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    text = raw.decode("utf-8", errors="replace")
    if str(path).endswith(".json"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(data, dict) or "config" not in data:
            raise ConfigError(f"{path} is not a run manifest (no 'config' entry)")
        return config_from_dict(data["config"])
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data, text)
