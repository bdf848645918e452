"""Adaptive pole selection for the rational Krylov space.

The next shift maximizes

    |prod_j (s - s_j)| / |prod_j (s - lambda_j)|

over the border of the convex hull of the mirrored eigenvalues
``-lambda_j``. The ``lambda_j`` are the eigenvalues of either the projected
matrix ``T_k`` or the projected closed-loop matrix ``T_k - B_k B_k^T Y_k``.
The objective is evaluated in the log domain.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import ConvexHull, QhullError

SAMPLES_PER_EDGE = 500
SEGMENT_SAMPLES = 2000
MODES = ("t", "closed_loop")


class SpectralHitWarning(UserWarning):
    """Every border candidate coincides with a zero of the rational function."""


class ClippedEigenvalueWarning(UserWarning):
    """A mirrored eigenvalue had nonpositive real part and was moved into the right half-plane."""


@dataclass
class ShiftRegion:
    """Convex, conjugate-symmetric region in the open right half-plane.

    ``hull_vertices`` is ordered counterclockwise for a polygon; a segment has
    two vertices and a point one.
    """

    hull_vertices: np.ndarray
    kind: str  # "polygon", "segment" or "point"

    def edges(self):
        v = self.hull_vertices
        if self.kind == "point":
            return []
        if self.kind == "segment":
            return [(v[0], v[1])]
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def border_samples(self, per_edge=SAMPLES_PER_EDGE, segment=SEGMENT_SAMPLES):
        if self.kind == "point":
            return self.hull_vertices.copy()
        if self.kind == "segment":
            a, b = self.hull_vertices
            return a + (b - a) * np.linspace(0.0, 1.0, segment)
        tau = np.linspace(0.0, 1.0, per_edge, endpoint=False)
        return np.concatenate([a + (b - a) * tau for a, b in self.edges()])

    def contains(self, z, tol=1e-9) -> bool:
        """Point-in-region test (inclusive, relative tolerance ``tol``)."""
        v = self.hull_vertices
        scale = max(1.0, float(np.max(np.abs(v))))
        if self.kind == "point":
            return abs(z - v[0]) <= tol * scale
        if self.kind == "segment":
            a, b = v
            d = b - a
            tt = ((z - a) * np.conj(d)).real / abs(d) ** 2
            tt = min(max(tt, 0.0), 1.0)
            return abs(a + tt * d - z) <= tol * scale
        for a, b in self.edges():
            cross = ((b - a).real * (z - a).imag - (b - a).imag * (z - a).real)
            if cross < -tol * scale * abs(b - a):
                return False
        return True

    def to_dict(self):
        return {"kind": self.kind,
                "vertices": [[float(z.real), float(z.imag)] for z in self.hull_vertices]}


@dataclass
class RationalNodeSet:
    """Finite poles (with multiplicity) and zeros of the rational function.

    Infinite poles are simply left out: they contribute a unit factor.
    """

    poles: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    zeros: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    pole_weights: np.ndarray | None = None

    def __post_init__(self):
        poles = np.asarray(self.poles, dtype=complex).ravel()
        finite = np.isfinite(poles)
        w = (np.ones(poles.size) if self.pole_weights is None
             else np.asarray(self.pole_weights, dtype=float).ravel())
        self.poles = poles[finite]
        self.pole_weights = w[finite]
        self.zeros = np.asarray(self.zeros, dtype=complex).ravel()

    def log_objective(self, s):
        """``sum w_j log|s - s_j| - sum log|s - lambda_j|`` (vectorized over ``s``)."""
        s = np.asarray(s, dtype=complex)
        with np.errstate(divide="ignore"):
            val = np.zeros(s.shape)
            if self.poles.size:
                val = val + np.sum(self.pole_weights
                                   * np.log(np.abs(s[..., None] - self.poles)), axis=-1)
            if self.zeros.size:
                val = val - np.sum(np.log(np.abs(s[..., None] - self.zeros)), axis=-1)
        return val


def _hull_of(points):
    """Return (vertices, kind) for the convex hull of complex ``points``."""
    pts = np.unique(np.round(points, 14))
    scale = max(1.0, float(np.max(np.abs(pts))))
    if pts.size == 1 or np.max(np.abs(pts - pts[0])) <= 1e-13 * scale:
        return pts[:1], "point"
    xy = np.column_stack([pts.real, pts.imag])
    centered = xy - xy.mean(axis=0)
    _, sv, vt = np.linalg.svd(centered, full_matrices=False)
    if sv.size < 2 or sv[1] <= 1e-12 * sv[0] * max(1.0, np.sqrt(len(pts))):
        # collinear: project on the principal direction and keep the extremes
        proj = centered @ vt[0]
        a, b = pts[np.argmin(proj)], pts[np.argmax(proj)]
        if (a.real, a.imag) > (b.real, b.imag):
            a, b = b, a
        return np.array([a, b]), "segment"
    try:
        hull = ConvexHull(xy)
    except QhullError:
        proj = centered @ vt[0]
        return np.array([pts[np.argmin(proj)], pts[np.argmax(proj)]]), "segment"
    return pts[hull.vertices], "polygon"


def spectral_region(eigs, history=None) -> ShiftRegion:
    """Convex hull of the mirrored, conjugate-symmetrized eigenvalues.

    Eigenvalues with nonnegative real part (mirrored real part <= 0) are
    clipped into the right half-plane with a warning. ``history`` is an
    optional iterable of earlier regions whose vertices are merged in.
    """
    eigs = np.asarray(eigs, dtype=complex).ravel()
    if eigs.size == 0:
        raise ValueError("spectral_region needs at least one eigenvalue")
    mirrored = -eigs
    bad = mirrored.real <= 0
    if np.any(bad):
        good = mirrored.real[~bad]
        floor = good.min() if good.size else 1.0
        floor = max(floor * 1e-3, np.finfo(float).tiny)
        warnings.warn(f"{int(bad.sum())} eigenvalue(s) not in the open left half-plane; "
                      f"clipping mirrored real part to {floor:.3e}",
                      ClippedEigenvalueWarning, stacklevel=2)
        mirrored = np.where(bad, floor + 1j * mirrored.imag, mirrored)
    pts = [mirrored, np.conj(mirrored)]
    for reg in history or ():
        pts.append(reg.hull_vertices)
        pts.append(np.conj(reg.hull_vertices))
    verts, kind = _hull_of(np.concatenate(pts))
    return ShiftRegion(verts, kind)


def _refine_on_edge(nodes, a, b, t0, dt):
    lo, hi = max(0.0, t0 - dt), min(1.0, t0 + dt)
    if hi <= lo:
        return t0
    res = minimize_scalar(lambda tt: -float(nodes.log_objective(a + (b - a) * tt)),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(res.x)


def next_shift(region: ShiftRegion, nodes: RationalNodeSet, refine=True,
               per_edge=SAMPLES_PER_EDGE, segment=SEGMENT_SAMPLES, real_tol=1e-8) -> complex:
    """Border point of ``region`` maximizing ``|prod(s - s_j) / prod(s - lambda_j)|``.

    The border is sampled (``per_edge`` points per polygon edge, ``segment``
    points on a degenerate segment) and the best sample is refined by a
    bounded scalar search along its edge. A result whose imaginary part is
    below ``real_tol`` relative to its real part is returned as real.
    """
    if region.kind == "point":
        return complex(region.hull_vertices[0])
    cand = region.border_samples(per_edge, segment)
    vals = nodes.log_objective(cand)
    if np.all(np.isposinf(vals)):
        warnings.warn("all border samples hit a zero of the rational function",
                      SpectralHitWarning, stacklevel=2)
        return complex(cand[0])
    vals = np.where(np.isnan(vals), -np.inf, vals)
    i = int(np.argmax(vals))
    best, best_val = complex(cand[i]), float(vals[i])
    if refine and np.isfinite(best_val):
        if region.kind == "segment":
            a, b = region.hull_vertices
            t0, dt = i / (segment - 1), 1.0 / (segment - 1)
        else:
            edge = i // per_edge
            a, b = region.edges()[edge]
            t0, dt = (i % per_edge) / per_edge, 1.0 / per_edge
            # the sample at t0 = 0 also belongs to the previous edge
        tt = _refine_on_edge(nodes, a, b, t0, dt)
        z = a + (b - a) * tt
        zval = float(nodes.log_objective(z))
        if zval > best_val:
            best, best_val = complex(z), zval
    if abs(best.imag) <= real_tol * abs(best.real):
        best = complex(best.real, 0.0)
    return best


def grid_search_shift(region: ShiftRegion, nodes: RationalNodeSet, h=1e-4):
    """Brute-force reference: sample the border with spacing ``h`` (relative to edge length)."""
    if region.kind == "point":
        z = complex(region.hull_vertices[0])
        return z, float(nodes.log_objective(z))
    best, best_val = None, -np.inf
    for a, b in region.edges():
        m = int(np.ceil(1.0 / h)) + 1
        z = a + (b - a) * np.linspace(0.0, 1.0, m)
        v = nodes.log_objective(z)
        j = int(np.argmax(v))
        if v[j] > best_val:
            best, best_val = complex(z[j]), float(v[j])
    return best, best_val


def closed_loop_matrix(T, Bk, Y):
    """Projected closed-loop matrix ``T - B_k B_k^T Y``."""
    return T - Bk @ (Bk.T @ Y)


def eigs_for_mode(state, Y, mode) -> np.ndarray:
    """Eigenvalues of ``state.T`` (mode ``"t"``) or of ``T - B_k B_k^T Y`` (``"closed_loop"``)."""
    if mode == "t":
        M = state.T
    elif mode == "closed_loop":
        if Y is None:
            raise ValueError("closed_loop mode needs the reduced solution Y")
        M = closed_loop_matrix(state.T, state.Bk, Y)
    else:
        raise ValueError(f"unknown shift mode {mode!r}; expected one of {MODES}")
    return np.linalg.eigvals(M)
