"""Run configuration: TOML files with domain, vorticity, numerics, tracers,
outputs and checks sections."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .biot_savart import VorticityConfig, init_from_grid
from .geometry import DomainSpec, contains

CONFIG_DIR = Path(__file__).with_name("configs")


class ConfigError(ValueError):
    """Configuration problem, reported with the offending field."""

    def __init__(self, fieldname: str, message: str):
        super().__init__(f"{fieldname}: {message}")
        self.field = fieldname


def _get(d: dict, key: str, where: str, kind=None, default: Any = ...):
    if key not in d:
        if default is ...:
            raise ConfigError(f"{where}.{key}", "missing")
        return default
    v = d[key]
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}.{key}", f"expected a number, got {v!r}")
        return float(v)
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{where}.{key}", f"expected an integer, got {v!r}")
        return v
    if kind is bool and not isinstance(v, bool):
        raise ConfigError(f"{where}.{key}", f"expected true/false, got {v!r}")
    if kind is str and not isinstance(v, str):
        raise ConfigError(f"{where}.{key}", f"expected a string, got {v!r}")
    return v


def _point(v, where) -> complex:
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v)):
        raise ConfigError(where, f"expected a point [x1, x2], got {v!r}")
    return complex(float(v[0]), float(v[1]))


def parse_domain(d: dict, where: str = "domain") -> DomainSpec:
    variant = _get(d, "variant", where, str)
    try:
        if variant == "disk":
            return DomainSpec.disk()
        if variant == "sector":
            if "theta_over_pi" in d:
                theta = math.pi * _get(d, "theta_over_pi", where, float)
            else:
                theta = _get(d, "theta", where, float)
            return DomainSpec.sector(theta, _get(d, "radius", where, float, 1.0))
        if variant == "polygon":
            verts = _get(d, "vertices", where)
            return DomainSpec.polygon([_point(v, f"{where}.vertices[{i}]") for i, v in enumerate(verts)])
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(where, str(exc)) from exc
    raise ConfigError(f"{where}.variant", f"unknown variant {variant!r}")


# ---------------------------------------------------------------- initial data


def smooth_bump(r, width, cutoff):
    """exp(-r^2 / (2 w^2)), shifted so it vanishes continuously at r = cutoff w."""
    r = np.asarray(r, dtype=np.float64)
    edge = math.exp(-0.5 * cutoff**2)
    g = (np.exp(-0.5 * (r / width) ** 2) - edge) / (1.0 - edge)
    return np.where(r < cutoff * width, g, 0.0)


@dataclass
class InitialTerm:
    kind: str
    amplitude: float
    center: complex = 0j
    width: float = 0.05
    cutoff: float = 3.0
    polygon: tuple[complex, ...] = ()

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        if self.kind == "gaussian_blob":
            return self.amplitude * smooth_bump(np.abs(z - self.center), self.width, self.cutoff)
        if self.kind == "odd_pair":
            c = self.center
            return self.amplitude * (
                smooth_bump(np.abs(z - c), self.width, self.cutoff)
                - smooth_bump(np.abs(z - c.conjugate()), self.width, self.cutoff)
            )
        if self.kind == "patch":
            poly = DomainSpec.polygon(self.polygon)
            return self.amplitude * contains(poly, z, tol=0.0).astype(np.float64)
        raise ValueError(self.kind)

    def support_points(self) -> list[complex]:
        """Points bounding the support, used to validate placement."""
        if self.kind == "patch":
            return list(self.polygon)
        rad = self.width * self.cutoff
        ring = [self.center + rad * np.exp(2j * math.pi * k / 32) for k in range(32)]
        if self.kind == "odd_pair":
            ring += [p.conjugate() for p in ring]
        return ring


def parse_term(d: dict, where: str) -> InitialTerm:
    kind = _get(d, "kind", where, str)
    amp = _get(d, "amplitude", where, float)
    if kind in ("gaussian_blob", "odd_pair"):
        c = _point(_get(d, "center", where), f"{where}.center")
        w = _get(d, "width", where, float)
        if w <= 0:
            raise ConfigError(f"{where}.width", "must be positive")
        cut = _get(d, "cutoff", where, float, 3.0)
        if kind == "odd_pair" and c.imag <= 0:
            raise ConfigError(f"{where}.center", "odd_pair center needs x2 > 0")
        return InitialTerm(kind, amp, c, w, cut)
    if kind == "patch":
        poly = tuple(_point(v, f"{where}.polygon[{i}]") for i, v in enumerate(_get(d, "polygon", where)))
        try:
            DomainSpec.polygon(poly)
        except ValueError as exc:
            raise ConfigError(f"{where}.polygon", str(exc)) from exc
        return InitialTerm(kind, amp, polygon=poly)
    raise ConfigError(f"{where}.kind", f"unknown initial data {kind!r}")


# ---------------------------------------------------------------- run config


@dataclass
class Numerics:
    h: float = 0.02
    delta: float | None = None
    dt0: float = 0.05
    t_end: float = 1.0
    eps_hit: float = 1e-6
    record_every: float = 0.1
    method: str = "direct"


@dataclass
class RunConfig:
    domain: DomainSpec
    terms: list[InitialTerm] = field(default_factory=list)
    odd: bool = False
    background_a: float = 0.0
    numerics: Numerics = field(default_factory=Numerics)
    tracers: list[complex] = field(default_factory=list)
    axis_tracers: list[float] = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    name: str = "run"

    def omega0(self, z):
        z = np.asarray(z, dtype=np.complex128)
        out = np.zeros(z.shape)
        for t in self.terms:
            out = out + t(z)
        return out

    @property
    def omega_inf(self) -> float:
        return float(sum(abs(t.amplitude) for t in self.terms))

    def vorticity(self) -> VorticityConfig:
        n = self.numerics
        v = init_from_grid(self.domain, self.omega0, n.h, n.delta, odd=self.odd)
        if self.background_a:
            v.background_a = self.background_a
        return v

    def tracer_points(self) -> np.ndarray:
        pts = list(self.tracers) + [complex(x, 0.0) for x in self.axis_tracers]
        return np.array(pts, dtype=np.complex128)


def parse_config(data: dict, name: str = "run") -> RunConfig:
    if "domain" not in data:
        raise ConfigError("domain", "section missing")
    dom = parse_domain(data["domain"])
    vort = data.get("vorticity", {})
    odd = _get(vort, "odd", "vorticity", bool, False)
    terms = [parse_term(t, f"vorticity.terms[{i}]") for i, t in enumerate(vort.get("terms", []))]
    a = _get(vort, "background_a", "vorticity", float, 0.0)
    if odd and not dom.symmetric:
        raise ConfigError("vorticity.odd", "odd data need a domain symmetric in x2")
    if odd and a != 0.0:
        raise ConfigError("vorticity.background_a", "must be 0 in odd mode")
    for i, t in enumerate(terms):
        if t.kind == "odd_pair" and not dom.symmetric:
            raise ConfigError(f"vorticity.terms[{i}]", "odd_pair needs a symmetric domain")
        pts = np.array(t.support_points())
        if not np.all(contains(dom, pts, tol=0.0)):
            raise ConfigError(f"vorticity.terms[{i}]", "support leaves the domain")

    num = data.get("numerics", {})
    numerics = Numerics(
        h=_get(num, "h", "numerics", float, 0.02),
        delta=_get(num, "delta", "numerics", float, None),
        dt0=_get(num, "dt0", "numerics", float, 0.05),
        t_end=_get(num, "t_end", "numerics", float, 1.0),
        eps_hit=_get(num, "eps_hit", "numerics", float, 1e-6),
        record_every=_get(num, "record_every", "numerics", float, 0.1),
        method=_get(num, "method", "numerics", str, "direct"),
    )
    for key in ("h", "dt0", "t_end", "eps_hit", "record_every"):
        if getattr(numerics, key) <= 0:
            raise ConfigError(f"numerics.{key}", "must be positive")
    if numerics.method not in ("direct", "treecode"):
        raise ConfigError("numerics.method", "expected 'direct' or 'treecode'")

    tr = data.get("tracers", {})
    points = [_point(p, f"tracers.points[{i}]") for i, p in enumerate(tr.get("points", []))]
    axis = [float(x) for x in tr.get("axis", [])]
    if axis and not odd:
        raise ConfigError("tracers.axis", "axis seeds are only meaningful in odd mode")
    for i, p in enumerate(points):
        if not contains(dom, p):
            raise ConfigError(f"tracers.points[{i}]", f"{p} is not inside the domain")
        if odd and p.imag < 0:
            raise ConfigError(f"tracers.points[{i}]", "odd mode tracers need x2 >= 0")
    for i, x in enumerate(axis):
        if not contains(dom, complex(x, 0.0)):
            raise ConfigError(f"tracers.axis[{i}]", f"{x} is not on the axis inside the domain")

    return RunConfig(
        domain=dom,
        terms=terms,
        odd=odd,
        background_a=a,
        numerics=numerics,
        tracers=points,
        axis_tracers=axis,
        outputs=dict(data.get("outputs", {})),
        checks=dict(data.get("checks", {})),
        name=str(data.get("name", name)),
    )


def resolve_path(path) -> Path:
    """The given path, or a shipped config of the same file name."""
    path = Path(path)
    if not path.exists() and (CONFIG_DIR / path.name).exists():
        return CONFIG_DIR / path.name
    return path


def read_config_data(path) -> dict:
    path = resolve_path(path)
    try:
        return tomllib.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError("--config", f"file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("--config", f"invalid TOML: {exc}") from exc


def apply_override(data: dict, assignment: str) -> None:
    """Set ``section.key=value`` in place; the value is read as TOML."""
    key, sep, raw = assignment.partition("=")
    parts = key.strip().split(".")
    if not sep or not all(parts):
        raise ConfigError("--set", f"expected section.key=value, got {assignment!r}")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError("--set", f"{key} does not name a table entry")
    node[parts[-1]] = value


def load_config(path, overrides=()) -> RunConfig:
    data = read_config_data(path)
    for o in overrides:
        apply_override(data, o)
    return parse_config(data, name=resolve_path(path).stem)
