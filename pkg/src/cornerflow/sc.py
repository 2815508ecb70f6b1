"""Schwarz-Christoffel map from the unit disk onto a polygon.

The disk-to-polygon map is

    f(zeta) = c + C * integral_0^zeta prod_k (1 - s/zeta_k)^(alpha_k - 1) ds

with prevertices zeta_k on the unit circle, alpha_k = theta_k/pi and c the
polygon centroid.  The Riemann map T of the package is f^-1.  Integrals run
along straight segments; endpoint singularities at prevertices are absorbed
by Gauss-Jacobi rules and the remaining pieces use Gauss-Legendre panels
refined until every panel is no longer than its distance to the nearest
prevertex.
"""

from __future__ import annotations

import hashlib
import json
import math
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares, root
from scipy.special import roots_jacobi, roots_legendre

from .conformal import MapBackend, MapDomainError
from .geometry import DomainSpec, corner_angles, interior_anchor

N_NODES = 24
MAX_VERTICES = 12


class SCConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    return roots_legendre(n)


@lru_cache(maxsize=None)
def _gauss_jacobi(n: int, beta: float):
    # weight (1 + t)^beta on [-1, 1]; the singular end sits at t = -1
    return roots_jacobi(n, 0.0, beta)


class SCIntegrator:
    """Path integrals of the SC integrand for fixed prevertices and exponents."""

    def __init__(self, prevertices: np.ndarray, betas: np.ndarray, n: int = N_NODES):
        self.zk = np.asarray(prevertices, dtype=np.complex128)
        self.betas = np.asarray(betas, dtype=np.float64)
        self.n = n

    def integrand(self, s: np.ndarray, skip: int = -1) -> np.ndarray:
        out = np.ones_like(s, dtype=np.complex128)
        for k, (zk, b) in enumerate(zip(self.zk, self.betas)):
            if k == skip:
                continue
            out *= (1 - s / zk) ** b
        return out

    def _dist_to_segment(self, a: complex, b: complex) -> float:
        ab = b - a
        t = np.clip(((self.zk - a) * np.conj(ab)).real / max(abs(ab) ** 2, 1e-300), 0, 1)
        return float(np.min(np.abs(self.zk - (a + t * ab))))

    def _regular(self, a: complex, b: complex, depth: int = 0) -> complex:
        L = abs(b - a)
        if L == 0:
            return 0j
        if L <= self._dist_to_segment(a, b) or depth > 60:
            t, w = _gauss_legendre(self.n)
            s = a + (b - a) * (t + 1) / 2
            return complex((b - a) / 2 * np.sum(w * self.integrand(s)))
        m = (a + b) / 2
        return self._regular(a, m, depth + 1) + self._regular(m, b, depth + 1)

    def _singular_start(self, k: int, b: complex) -> complex:
        """Integral from prevertex k to b, singular only at the start."""
        a = self.zk[k]
        L = abs(b - a)
        others = np.delete(self.zk, k)
        rho = float(np.min(np.abs(others - a))) if len(others) else np.inf
        if L > rho / 2:
            c = a + (b - a) * (rho / 2) / L
            return self._jacobi(k, c) + self._regular(c, b)
        return self._jacobi(k, b)

    def _jacobi(self, k: int, b: complex) -> complex:
        a = self.zk[k]
        beta = self.betas[k]
        t, w = _gauss_jacobi(self.n, float(beta))
        s = a + (b - a) * (1 + t) / 2
        scale = (-(b - a) / (2 * a)) ** beta
        return complex((b - a) / 2 * scale * np.sum(w * self.integrand(s, skip=k)))

    def integrate(self, a: complex, b: complex, ka: int = -1, kb: int = -1) -> complex:
        """Integral from a to b; ka/kb flag endpoints that are prevertices."""
        if ka >= 0 and kb >= 0:
            m = (a + b) / 2
            return self._singular_start(ka, m) - self._singular_start(kb, m)
        if kb >= 0:
            return -self._singular_start(kb, a)
        if ka >= 0:
            return self._singular_start(ka, b)
        return self._regular(a, b)


def _gaps_from_vars(y: np.ndarray) -> np.ndarray:
    e = np.exp(np.concatenate([y, [0.0]]))
    return 2 * np.pi * e / e.sum()


def _prevertices_from_vars(y: np.ndarray) -> np.ndarray:
    gaps = _gaps_from_vars(y)
    phi = np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    return np.exp(1j * phi)


def _residual(y, verts, betas, center):
    zk = _prevertices_from_vars(y)
    integ = SCIntegrator(zk, betas)
    n = len(verts)
    sides = np.array(
        [integ.integrate(zk[j], zk[(j + 1) % n], j, (j + 1) % n) for j in range(n)]
    )
    target = np.abs(np.diff(np.concatenate([verts, verts[:1]])))
    res = []
    for j in range(1, n - 2):
        res.append(math.log(abs(sides[j]) / abs(sides[0])) - math.log(target[j] / target[0]))
    # conformal center: f(0) must land on the requested anchor point
    F1 = integ.integrate(0j, zk[0], -1, 0)
    lhs = -F1 / sides[0]
    rhs = (center - verts[0]) / (verts[1] - verts[0])
    res.extend([(lhs - rhs).real, (lhs - rhs).imag])
    return np.array(res)


def _solve(verts, betas, center, y0, max_nfev):
    """Levenberg-Marquardt from ``y0``, then a Powell hybrid polish."""
    args = (verts, betas, center)
    with np.errstate(all="ignore"):
        sol = least_squares(
            _residual, y0, args=args, method="lm", x_scale="jac",
            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev,
        )
        y, res = sol.x, _max_abs(sol.fun)
        if y.size:
            pol = root(_residual, y, args=args, method="hybr", options={"xtol": 1e-14})
            if _max_abs(pol.fun) < res:
                y, res = pol.x, _max_abs(pol.fun)
    return y, res


def _max_abs(v) -> float:
    v = np.asarray(v)
    if v.size == 0:
        return 0.0
    m = float(np.max(np.abs(v)))
    return m if np.isfinite(m) else np.inf


def solve_parameters(domain: DomainSpec, tol: float = 1e-10, max_nfev: int = 400):
    """Prevertices and scale for the SC map of ``domain``.

    The anchor (mapped to 0) is the centroid, or the deepest interior point
    when the centroid falls outside a non-convex polygon.  A direct solve
    from equal prevertex gaps is tried first; if it stalls, the polygon is
    reached by radial continuation about the anchor.

    Returns (prevertices, betas, scale, residual); the prevertices are
    rotated so that f'(0) = scale is real and positive.
    """
    if domain.variant != "polygon":
        raise ValueError("SC parameters need a polygon")
    verts = np.asarray(domain.vertices, dtype=np.complex128)
    n = len(verts)
    if n > MAX_VERTICES:
        raise ValueError(f"at most {MAX_VERTICES} vertices supported")
    betas = np.array([a / math.pi - 1 for _, a in corner_angles(domain)])
    center = interior_anchor(domain)
    y, residual = _solve(verts, betas, center, np.zeros(n - 1), max_nfev * n)
    if residual > tol:
        y, residual = _continuation(verts, center, max_nfev * n)
    if residual > tol:
        raise SCConvergenceError("SC parameter problem did not converge", residual)
    zk = _prevertices_from_vars(y)
    integ = SCIntegrator(zk, betas)
    C = (verts[1] - verts[0]) / integ.integrate(zk[0], zk[1], 0, 1)
    rot = C / abs(C)
    return zk * rot, betas, abs(C), residual


def _continuation(target: np.ndarray, center: complex, max_nfev: int):
    """Radial homotopy from a circle-inscribed polygon to the target.

    Vertices slide along rays from the anchor, so every intermediate polygon
    stays star-shaped about it (hence simple) whenever the target is.
    """
    rel = target - center
    ang = np.unwrap(np.angle(rel))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
    if np.any(gaps <= 0) or np.any(gaps >= np.pi):
        return np.zeros(len(target) - 1), np.inf
    radius = np.max(np.abs(rel))
    y = np.zeros(len(target) - 1)
    s, step = 0.0, 0.25
    residual = np.inf
    while s < 1.0 and step > 1e-4:
        s_try = min(1.0, s + step)
        verts = center + ((1 - s_try) * radius + s_try * np.abs(rel)) * np.exp(1j * np.angle(rel))
        dom = DomainSpec.polygon(verts)
        betas = np.array([a / math.pi - 1 for _, a in corner_angles(dom)])
        y_try, res = _solve(verts, betas, center, y, max_nfev)
        if res < 1e-10:
            y, s, residual = y_try, s_try, res
            step = min(step * 1.5, 0.5)
        else:
            step /= 2
    if s < 1.0:
        return y, np.inf
    return y, residual


def _cache_key(domain: DomainSpec) -> str:
    payload = json.dumps([[round(v.real, 15), round(v.imag, 15)] for v in domain.vertices])
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def save_parameters(path, domain, prevertices, scale, residual):
    data = {
        "key": _cache_key(domain),
        "vertices": [[v.real, v.imag] for v in domain.vertices],
        "prevertices": [[z.real, z.imag] for z in prevertices],
        "scale": scale,
        "residual": residual,
    }
    Path(path).write_text(json.dumps(data, indent=2))


def load_parameters(path, domain):
    data = json.loads(Path(path).read_text())
    if data.get("key") != _cache_key(domain):
        return None
    zk = np.array([complex(a, b) for a, b in data["prevertices"]])
    return zk, float(data["scale"]), float(data["residual"])


class SchwarzChristoffelMap(MapBackend):
    """Polygon onto disk; T is the numerical inverse of the SC integral."""

    def __init__(self, domain: DomainSpec, cache_dir=None):
        self.domain = domain
        self.vertices = np.asarray(domain.vertices, dtype=np.complex128)
        self.anchor = interior_anchor(domain)
        betas = np.array([a / math.pi - 1 for _, a in corner_angles(domain)])
        cached = None
        cache_file = None
        if cache_dir is not None:
            cache_file = Path(cache_dir) / f"sc_{_cache_key(domain)}.json"
            if cache_file.exists():
                cached = load_parameters(cache_file, domain)
        if cached is not None:
            zk, scale, residual = cached
        else:
            zk, betas, scale, residual = solve_parameters(domain)
            if cache_file is not None:
                cache_file.parent.mkdir(parents=True, exist_ok=True)
                save_parameters(cache_file, domain, zk, scale, residual)
        self.prevertices = zk
        self.betas = betas
        self.scale = scale
        self.residual = residual
        self.integrator = SCIntegrator(zk, betas)
        self._build_seeds()
        for k, c in enumerate(domain.corners):
            c.image_on_circle = complex(zk[k])

    # disk -> polygon -------------------------------------------------------
    def _increment(self, zeta: complex) -> tuple[complex, complex]:
        """(base point, C * integral from base prevertex or 0 to zeta)."""
        d = np.abs(zeta - self.prevertices)
        k = int(np.argmin(d))
        if d[k] < abs(zeta):
            return self.vertices[k], self.scale * self.integrator.integrate(
                self.prevertices[k], zeta, k, -1
            )
        return self.anchor, self.scale * self.integrator.integrate(0j, zeta)

    def _f(self, zeta: complex) -> complex:
        base, inc = self._increment(zeta)
        return base + inc

    def _fprime(self, zeta):
        return self.scale * self.integrator.integrand(np.asarray(zeta, dtype=np.complex128))

    def _inverse(self, zeta):
        return np.array([self._f(complex(z)) for z in zeta])

    def _inverse_derivative(self, zeta):
        return self._fprime(zeta)

    # polygon -> disk -------------------------------------------------------
    def _build_seeds(self):
        r = np.array([0.0, 0.3, 0.55, 0.75, 0.88, 0.95])
        ang = np.linspace(0, 2 * np.pi, 24, endpoint=False)
        zs = [0j] + [ri * np.exp(1j * a) for ri in r[1:] for a in ang]
        self._seed_zeta = np.array(zs)
        self._seed_w = self._inverse(self._seed_zeta)

    def _visible(self, a: complex, b: complex) -> bool:
        n = len(self.vertices)
        for k in range(n):
            p, q = self.vertices[k], self.vertices[(k + 1) % n]
            if _proper_cross(a, b, p, q):
                return False
        return True

    def _solve_one(self, x: complex) -> complex:
        order = np.argsort(np.abs(self._seed_w - x))
        z0 = None
        for i in order:
            if self._visible(self._seed_w[i], x):
                z0, w0 = self._seed_zeta[i], self._seed_w[i]
                break
        if z0 is None:
            raise MapDomainError("no visible seed point for SC inversion")
        dx = x - w0

        def rhs(_, y):
            z = complex(y[0], y[1])
            v = dx / complex(self._fprime(np.array([z]))[0])
            return [v.real, v.imag]

        sol = solve_ivp(rhs, (0.0, 1.0), [z0.real, z0.imag], rtol=1e-9, atol=1e-12)
        z = complex(sol.y[0, -1], sol.y[1, -1])
        if abs(z) >= 1:
            z = z / abs(z) * (1 - 1e-14)
        for _ in range(30):
            base, inc = self._increment(z)
            resid = (base - x) + inc
            step = resid / complex(self._fprime(np.array([z]))[0])
            znew = z - step
            while abs(znew) >= 1:
                step /= 2
                znew = z - step
            z = znew
            if abs(step) < 1e-16 + 1e-15 * abs(z):
                break
        return z

    def _forward(self, x):
        out = np.empty_like(x)
        for i, xi in enumerate(x):
            xi = complex(xi)
            hit = np.nonzero(np.abs(self.vertices - xi) == 0)[0]
            out[i] = self.prevertices[hit[0]] if len(hit) else self._solve_one(xi)
        return out

    def _derivative(self, x):
        return 1.0 / self._fprime(self._forward(x))

    def offset_from_corner(self, x, k: int):
        """T(x) - T(x_k) for points near corner k."""
        x = np.atleast_1d(np.asarray(x, dtype=np.complex128))
        return self._forward(x) - self.prevertices[k]


def _proper_cross(a, b, p, q) -> bool:
    def orient(u, v, w):
        return (v - u).real * (w - u).imag - (v - u).imag * (w - u).real

    d1, d2 = orient(p, q, a), orient(p, q, b)
    d3, d4 = orient(a, b, p), orient(a, b, q)
    return (d1 * d2 < 0) and (d3 * d4 < 0)
