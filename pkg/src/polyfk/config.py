"""INI-style run configuration.

Sections and keys are documented in the README. Every validation error is
raised as :class:`~polyfk.errors.ConfigError` naming the offending key.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import elements_in_box
from .assembly import PenaltySpec
from .errors import ConfigError, ContractError, InputError
from .mesh import BOUNDARY_TAGS, SIDES, agglomerate, generate_cartesian_mesh, generate_voronoi_mesh, load_mesh
from .physics import Field, ModelParams, load_field_table, synthetic_fiber_field
from .timestepper import StepperConfig

MODES = ("convergence", "wave", "simulate")


@dataclass
class RunConfig:
    path: Path
    text: str
    mode: str
    output: Path
    seed: int
    snapshot_every: int
    sections: dict
    stepper: StepperConfig | None = None
    penalty: PenaltySpec | None = None
    degree: int = 1
    regions: dict = field(default_factory=dict)
    activation_threshold: float | None = None


class _Sec:
    """Typed accessor over one config section; errors carry ``section.key``."""

    def __init__(self, cp, name):
        self.name = name
        self.data = dict(cp[name]) if cp.has_section(name) else {}

    def key(self, k):
        return f"{self.name}.{k}"

    def has(self, k):
        return k in self.data

    def str(self, k, default=None, choices=None):
        if k not in self.data:
            if default is None:
                raise ConfigError("missing required key", key=self.key(k))
            return default
        v = self.data[k].strip()
        if choices is not None and v not in choices:
            raise ConfigError(f"{v!r} is not one of {list(choices)}", key=self.key(k))
        return v

    def float(self, k, default=None, positive=False, nonneg=False):
        raw = self.str(k, None if default is None else repr(default))
        try:
            v = float(raw)
        except ValueError:
            raise ConfigError(f"expected a number, got {raw!r}", key=self.key(k)) from None
        if not math.isfinite(v):
            raise ConfigError(f"expected a finite number, got {raw!r}", key=self.key(k))
        if positive and not v > 0:
            raise ConfigError(f"must be positive, got {v}", key=self.key(k))
        if nonneg and v < 0:
            raise ConfigError(f"must be non-negative, got {v}", key=self.key(k))
        return v

    def int(self, k, default=None, minimum=None):
        raw = self.str(k, None if default is None else str(default))
        try:
            v = int(raw)
        except ValueError:
            raise ConfigError(f"expected an integer, got {raw!r}", key=self.key(k)) from None
        if minimum is not None and v < minimum:
            raise ConfigError(f"must be >= {minimum}, got {v}", key=self.key(k))
        return v

    def ints(self, k, default=None, minimum=None):
        raw = self.str(k, None if default is None else " ".join(map(str, default)))
        try:
            vals = [int(t) for t in raw.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"expected integers, got {raw!r}", key=self.key(k)) from None
        if not vals:
            raise ConfigError("empty list", key=self.key(k))
        if minimum is not None and min(vals) < minimum:
            raise ConfigError(f"values must be >= {minimum}", key=self.key(k))
        return vals

    def floats(self, k, n=None, default=None):
        raw = self.str(k, None if default is None else " ".join(map(repr, default)))
        try:
            vals = [float(t) for t in raw.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"expected numbers, got {raw!r}", key=self.key(k)) from None
        if n is not None and len(vals) != n:
            raise ConfigError(f"expected {n} numbers, got {len(vals)}", key=self.key(k))
        return vals


def read_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", key="config") from None
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], key="config") from None
    run = _Sec(cp, "run")
    mode = run.str("mode", choices=MODES)
    out = Path(run.str("output", "output"))
    if not out.is_absolute():
        out = path.parent / out
    cfg = RunConfig(
        path=path,
        text=text,
        mode=mode,
        output=out,
        seed=run.int("seed", 0),
        snapshot_every=run.int("snapshot_every", 0, minimum=0),
        sections={s: _Sec(cp, s) for s in cp.sections()},
    )
    for s in ("mesh", "space", "time", "model", "probes", "convergence", "wave"):
        cfg.sections.setdefault(s, _Sec(cp, s))
    return cfg


def section(cfg, name):
    return cfg.sections[name]


def stepper_config(sec, defaults=None):
    d = {"dt": None, "t_final": None, "scheme": "semi_implicit", "linear_solver": "iterative"}
    d.update(defaults or {})
    try:
        return StepperConfig(
            dt=sec.float("dt", d["dt"]),
            t_final=sec.float("t_final", d["t_final"]),
            scheme=sec.str("scheme", d["scheme"]),
            picard_tol=sec.float("picard_tol", 1e-10),
            picard_max_iter=sec.int("picard_max_iter", 20),
            linear_solver=sec.str("linear_solver", d["linear_solver"]),
            solver_tol=sec.float("solver_tol", 1e-12),
            store_every=sec.int("store_every", 1, minimum=1),
        )
    except ConfigError as exc:
        if exc.key and "." not in exc.key:
            raise ConfigError(str(exc).split("] ", 1)[-1], key=f"{sec.name}.{exc.key}") from None
        raise


def boundary_spec(sec):
    """Single tag or per-side mapping from ``boundary`` / ``boundary.<side>`` keys."""
    if sec.has("boundary"):
        tag = sec.str("boundary", choices=BOUNDARY_TAGS)
        spec = {s: tag for s in SIDES}
    else:
        spec = {s: "dirichlet" for s in SIDES}
    for s in SIDES:
        if sec.has(f"boundary.{s}"):
            spec[s] = sec.str(f"boundary.{s}", choices=BOUNDARY_TAGS)
    return spec


def build_mesh(sec, seed, base_dir, n_elements=None):
    """Mesh from ``[mesh]``: ``source = voronoi | cartesian | file``."""
    src = sec.str("source", "voronoi", choices=("voronoi", "cartesian", "file"))
    if src == "file":
        p = Path(sec.str("file"))
        mesh = load_mesh(p if p.is_absolute() else base_dir / p)
    else:
        domain = tuple(sec.floats("domain", 4, (0.0, 1.0, 0.0, 1.0)))
        bnd = boundary_spec(sec)
        if src == "cartesian":
            mesh = generate_cartesian_mesh(domain, sec.int("nx", minimum=1), sec.int("ny", minimum=1), bnd)
        else:
            n = sec.int("n_elements", minimum=1) if n_elements is None else n_elements
            mesh = generate_voronoi_mesh(domain, n, sec.int("lloyd_iterations", 50, minimum=0), seed, bnd)
    if sec.has("agglomerate"):
        mesh = agglomerate(mesh, sec.int("agglomerate", minimum=1), seed)
    return mesh


def parse_field(sec, k, default, base_dir):
    raw = sec.str(k, repr(float(default)))
    try:
        if raw.startswith("file:"):
            p = Path(raw[5:].strip())
            f = load_field_table(p if p.is_absolute() else base_dir / p)
            if not isinstance(f, Field):
                raise ConfigError("table holds vectors, expected scalars", key=sec.key(k))
            return f
        try:
            return Field.constant(float(raw))
        except ValueError:
            return Field.expression(raw)
    except ConfigError:
        raise
    except InputError as exc:
        raise ConfigError(str(exc), key=sec.key(k)) from None


def parse_fiber(sec, base_dir):
    if not sec.has("fiber"):
        return None
    raw = sec.str("fiber")
    if raw.startswith("file:"):
        p = Path(raw[5:].strip())
        f = load_field_table(p if p.is_absolute() else base_dir / p)
        if isinstance(f, Field):
            raise ConfigError("table holds scalars, expected vectors", key=sec.key("fiber"))
        return f
    tok = raw.split()
    try:
        if tok[0] == "constant" and len(tok) == 2:
            return synthetic_fiber_field("constant", theta=float(tok[1]))
        if tok[0] in ("radial", "circular") and len(tok) == 3:
            return synthetic_fiber_field(tok[0], center=(float(tok[1]), float(tok[2])))
    except ValueError:
        pass
    raise ConfigError(f"expected 'constant THETA', 'radial X Y', 'circular X Y' or 'file:PATH', got {raw!r}", key=sec.key("fiber"))


def model_params(sec, base_dir, n_elements=None):
    fiber = parse_fiber(sec, base_dir)
    kw = {
        name: parse_field(sec, name, default, base_dir)
        for name, default in (
            ("d_ext", 1.0),
            ("d_axn", 0.0),
            ("alpha", 0.0),
            ("forcing", 0.0),
            ("dirichlet", 0.0),
            ("neumann", 0.0),
            ("initial", 0.0),
        )
    }
    for name, f in kw.items():
        if n_elements is not None and f.table is not None and len(f.table) != n_elements:
            raise ConfigError(f"table has {len(f.table)} rows for {n_elements} elements", key=sec.key(name))
    if fiber is not None and fiber.table is not None and n_elements is not None and len(fiber.table) != n_elements:
        raise ConfigError(f"table has {len(fiber.table)} rows for {n_elements} elements", key=sec.key("fiber"))
    try:
        return ModelParams(fiber=fiber, **kw)
    except InputError as exc:
        raise ConfigError(str(exc), key=sec.name) from None


def parse_regions(sec, mesh):
    """``region.<name> = ids 1 2 3`` or ``region.<name> = box x0 x1 y0 y1``."""
    regions = {}
    for k in sorted(sec.data):
        if not k.startswith("region."):
            continue
        name = k.split(".", 1)[1]
        tok = sec.data[k].split()
        try:
            if tok and tok[0] == "ids":
                ids = [int(t) for t in tok[1:]]
            elif tok and tok[0] == "box" and len(tok) == 5:
                ids = elements_in_box(mesh, [float(t) for t in tok[1:]]).tolist()
            else:
                raise ValueError
        except ValueError:
            raise ConfigError("expected 'ids I J ...' or 'box X0 X1 Y0 Y1'", key=sec.key(k)) from None
        if not ids:
            raise ConfigError("region is empty", key=sec.key(k))
        bad = [i for i in ids if not 0 <= i < mesh.n_elements]
        if bad:
            raise ConfigError(f"element id {bad[0]} does not exist", key=sec.key(k))
        regions[name] = ids
    return regions


def penalty_spec(sec):
    try:
        return PenaltySpec(sec.float("eta0", 10.0))
    except ContractError as exc:
        raise ConfigError(str(exc), key=sec.key("eta0")) from None
