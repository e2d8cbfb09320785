"""Coefficient fields, boundary/initial data and the diffusion tensor.

All fields are evaluated as ``field(x, y, t, elem)`` on arrays of
coordinates; ``elem`` holds the owning element ids and is only needed by
per-element tables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import InputError, MeshParseError

_EXPR_NAMES = {
    "pi": np.pi,
    "e": np.e,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "arctan2": np.arctan2,
    "minimum": np.minimum,
    "maximum": np.maximum,
    "where": np.where,
}
_EXPR_VARS = ("x", "y", "t")


class Field:
    """Scalar field ``f(x, y, t, elem)``.

    Build one with :meth:`constant`, :meth:`expression`,
    :meth:`per_element` or :meth:`function`.
    """

    def __init__(self, func, time_dependent=True, label="", value=None, table=None):
        self._func = func
        self.time_dependent = time_dependent
        self.label = label
        self.value = value
        self.table = table

    @classmethod
    def constant(cls, value):
        v = float(value)
        return cls(lambda x, y, t, elem: np.full(np.shape(x), v), False, repr(v), value=v)

    @classmethod
    def expression(cls, text):
        """Closed-form expression in ``x``, ``y``, ``t`` using numpy math names."""
        try:
            code = compile(text, "<field>", "eval")
        except SyntaxError as exc:
            raise InputError(f"cannot parse expression {text!r}: {exc.msg}") from None
        unknown = set(code.co_names) - set(_EXPR_NAMES) - set(_EXPR_VARS)
        if unknown:
            raise InputError(f"expression {text!r} uses unknown names {sorted(unknown)}")
        env = dict(_EXPR_NAMES)

        def func(x, y, t, elem):
            val = eval(code, {"__builtins__": {}}, {**env, "x": x, "y": y, "t": t})
            return np.broadcast_to(np.asarray(val, dtype=float), np.shape(x)).copy()

        return cls(func, "t" in code.co_names, text)

    @classmethod
    def per_element(cls, values):
        table = np.asarray(values, dtype=float)

        def func(x, y, t, elem):
            if elem is None:
                raise InputError("per-element field evaluated without element ids")
            return np.broadcast_to(table[np.asarray(elem)], np.shape(x)).copy()

        return cls(func, False, f"per-element[{len(table)}]", table=table)

    @classmethod
    def function(cls, fn, time_dependent=True, label=""):
        """Wrap a vectorized callable ``fn(x, y, t)``."""
        return cls(lambda x, y, t, elem: np.broadcast_to(fn(x, y, t), np.shape(x)).astype(float), time_dependent, label)

    def __call__(self, x, y, t=0.0, elem=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if elem is not None:
            elem = np.broadcast_to(np.asarray(elem), x.shape)
        return self._func(x, y, t, elem)

    @property
    def is_zero(self):
        return self.value == 0.0

    def __repr__(self):
        return f"Field({self.label})"


class VectorField:
    """Unit-vector field ``n(x, y, t, elem)`` returning shape ``x.shape + (2,)``."""

    def __init__(self, func, label="", table=None):
        self._func = func
        self.label = label
        self.table = table

    def __call__(self, x, y, t=0.0, elem=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if elem is not None:
            elem = np.broadcast_to(np.asarray(elem), x.shape)
        return self._func(x, y, t, elem)

    @classmethod
    def per_element(cls, vectors):
        table = np.asarray(vectors, dtype=float)
        norms = np.linalg.norm(table, axis=1)
        if (norms == 0).any():
            raise InputError("per-element fiber table contains a zero vector")
        table = table / norms[:, None]

        def func(x, y, t, elem):
            if elem is None:
                raise InputError("per-element field evaluated without element ids")
            return table[np.asarray(elem)] * np.ones(np.shape(x) + (1,))

        return cls(func, f"per-element[{len(table)}]", table=table)

    def __repr__(self):
        return f"VectorField({self.label})"


def synthetic_fiber_field(kind, theta=0.0, center=(0.0, 0.0)):
    """Closed-form fiber directions.

    ``constant`` gives ``(cos theta, sin theta)``; ``radial`` points away from
    ``center``; ``circular`` is ``radial`` rotated by +90 degrees. At the
    center itself both fall back to ``(1, 0)``.
    """
    kind = kind.lower()
    cx, cy = (float(c) for c in center)
    if kind == "constant":
        d = np.array([math.cos(theta), math.sin(theta)])
        return VectorField(lambda x, y, t, elem: np.broadcast_to(d, np.shape(x) + (2,)).copy(), f"constant({theta})")
    if kind not in ("radial", "circular"):
        raise InputError(f"unknown fiber kind {kind!r}")

    def func(x, y, t, elem):
        rx = x - cx
        ry = y - cy
        r = np.hypot(rx, ry)
        safe = r > 0
        rs = np.where(safe, r, 1.0)
        ux = np.where(safe, rx / rs, 1.0)
        uy = np.where(safe, ry / rs, 0.0)
        if kind == "circular":
            ux, uy = np.where(safe, -uy, 1.0), np.where(safe, ux, 0.0)
        return np.stack([ux, uy], axis=-1)

    return VectorField(func, f"{kind}({cx}, {cy})")


def as_field(value):
    if isinstance(value, Field):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Field.constant(value)
    if isinstance(value, str):
        return Field.expression(value)
    if callable(value):
        return Field.function(value)
    raise InputError(f"cannot interpret {value!r} as a scalar field")


@dataclass
class ModelParams:
    """Coefficients and data of the Fisher-Kolmogorov problem.

    Numbers, expression strings and ``fn(x, y, t)`` callables are accepted
    for every scalar entry and converted to :class:`Field`.
    """

    d_ext: Field = 1.0
    d_axn: Field = 0.0
    fiber: VectorField | None = None
    alpha: Field = 0.0
    forcing: Field = 0.0
    dirichlet: Field = 0.0
    neumann: Field = 0.0
    initial: Field = 0.0
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        for f in fields(self):
            if f.name in ("fiber", "extras"):
                continue
            setattr(self, f.name, as_field(getattr(self, f.name)))
        for name in ("d_ext", "d_axn"):
            v = getattr(self, name).value
            if v is not None and v < 0:
                raise InputError(f"{name} must be >= 0, got {v}")
        if self.d_ext.value == 0.0 and self.d_axn.value == 0.0:
            raise InputError("diffusion tensor vanishes: d_ext and d_axn are both zero")
        if self.d_axn.value != 0.0 and self.fiber is None:
            raise InputError("d_axn is non-zero but no fiber field was given")

    @property
    def operators_time_dependent(self):
        return self.d_ext.time_dependent or self.d_axn.time_dependent or self.alpha.time_dependent

    def diffusion(self, x, y, t=0.0, elem=None):
        """Tensor ``d_ext I + d_axn n n^T`` at every point, shape ``x.shape + (2, 2)``."""
        x = np.asarray(x, dtype=float)
        de = self.d_ext(x, y, t, elem)
        D = de[..., None, None] * np.eye(2)
        if self.fiber is not None and not self.d_axn.is_zero:
            da = self.d_axn(x, y, t, elem)
            n = self.fiber(x, y, t, elem)
            D = D + da[..., None, None] * n[..., :, None] * n[..., None, :]
        return D

    def check_at(self, x, y, t=0.0, elem=None):
        """Sampled check of non-negativity, ellipticity and fiber normalization."""
        de = self.d_ext(x, y, t, elem)
        da = self.d_axn(x, y, t, elem)
        if (de < 0).any() or (da < 0).any():
            raise InputError("diffusion coefficients must be non-negative")
        if ((da <= 0) & (de <= 0)).any():
            raise InputError("d_ext vanishes where d_axn vanishes: tensor not elliptic")
        if de.min() <= 0:
            raise InputError("d_ext must be positive for uniform ellipticity")
        if self.fiber is not None and (da > 0).any():
            n = self.fiber(x, y, t, elem)
            err = np.abs(np.linalg.norm(n, axis=-1) - 1.0)[da > 0]
            if err.size and err.max() > 1e-12:
                raise InputError(f"fiber field is not unit length (deviation {err.max():.2e})")


def diffusion_tensor(params, x, t=0.0, elem=None):
    """Diffusion tensor at a single point ``x``; returns a 2x2 array."""
    x = np.asarray(x, dtype=float)
    e = None if elem is None else np.asarray([elem])
    return params.diffusion(x[..., 0:1], x[..., 1:2], t, e)[0]


def load_field_table(path):
    """Read a ``field per-element N`` table as a :class:`Field` or :class:`VectorField`."""
    rows = []
    header = None
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if header is None:
            if len(tok) != 3 or tok[:2] != ["field", "per-element"]:
                raise MeshParseError("header must be 'field per-element N'", line=n, path=path)
            try:
                header = int(tok[2])
            except ValueError:
                raise MeshParseError(f"bad count {tok[2]!r}", line=n, path=path) from None
            continue
        try:
            rows.append([float(v) for v in tok])
        except ValueError:
            raise MeshParseError(f"non-numeric value in {line!r}", line=n, path=path) from None
        if len(tok) not in (1, 2) or (len(rows) > 1 and len(tok) != len(rows[0])):
            raise MeshParseError("rows must all hold one value or all hold two", line=n, path=path)
    if header is None:
        raise MeshParseError("empty field file", path=path)
    if len(rows) != header:
        raise MeshParseError(f"expected {header} rows, found {len(rows)}", path=path)
    arr = np.array(rows)
    if arr.shape[1] == 1:
        return Field.per_element(arr[:, 0])
    return VectorField.per_element(arr)


def save_field_table(values, path):
    arr = np.asarray(values, dtype=float)
    lines = [f"field per-element {len(arr)}"]
    if arr.ndim == 1:
        lines += [repr(float(v)) for v in arr]
    else:
        lines += [f"{float(a)!r} {float(b)!r}" for a, b in arr]
    Path(path).write_text("\n".join(lines) + "\n")
