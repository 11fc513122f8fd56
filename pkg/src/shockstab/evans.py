"""Evans-function machinery for first-order systems W' = A(x, λ) W.

A system supplies the coefficient matrix on the truncated line, its limits
at ±∞ (affine in λ), and the splitting dimensions k₋ (unstable at −∞) and
k₊ (stable at +∞).  Decaying solutions are normalized by

    W∓(x) e^{−M∓ x} → R∓(λ)   as x → ∓∞,

where R∓ are analytic bases of the limiting invariant subspaces and M∓ the
restricted limit matrices.  Frames are evolved in polar form (orthonormal
frame plus log-radius), and

    D̃(λ) = det[Ω₋(0), Ω₊(0)] · exp(ρ₋ + ρ₊).

The no-radial variant drops exp(ρ₋ + ρ₊); its zeros and winding agree with
D̃ because the dropped factor is zero-free with no net winding on closed
conjugate-symmetric contours.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .eos import EquationOfState, helmholtz_point
from .exceptions import (
    IllConditionedMoments,
    NoSignChange,
    NoncharacteristicViolation,
    RefinementBudgetExceeded,
    SplittingFailure,
)
from .numerics import fit_hf, orthonormalize, propagate_frames, propagate_frames_stiff
from .hugoniot import trace_backward
from .lopatinski import lopatinski_delta
from .profile import ViscousProfile, shoot_profile

__all__ = [
    "EvansSystem",
    "Bases",
    "spectral_projector",
    "init_bases",
    "kato_transport",
    "evans_eval",
    "ContourSpec",
    "ContourResult",
    "winding",
    "winding_of_function",
    "Circle",
    "Rectangle",
    "MomentRoot",
    "moment_roots",
    "polish_roots",
    "HFTable",
    "hf_samples",
    "hf_table",
    "hf_radius",
    "evans_parts",
    "GasEvansSystem",
    "build_system",
    "GasLowFrequency",
    "gas_low_freq_check",
    "ViscousTransition",
    "viscous_transition",
]

REF_LAMBDA = 1.0  # base point of Kato transport


class EvansSystem:
    """Interface shared by the gas-dynamics and rotating-model systems."""

    n: int
    k_minus: int
    k_plus: int
    x_minus: float  # left truncation point (negative)
    x_plus: float  # right truncation point (positive)

    def matrix(self, x: float, lams: np.ndarray) -> np.ndarray:
        """Stack (N, n, n) of A(x, λ_j)."""
        raise NotImplementedError

    def limit_parts(self, side: str):
        """(A0, A1) with A(±∞, λ) = A0 + λ A1."""
        raise NotImplementedError

    def limit(self, side: str, lams) -> np.ndarray:
        A0, A1 = self.limit_parts(side)
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        return A0[None] + lams[:, None, None] * A1[None]

    def explicit_bases(self, side: str, lams):
        """Closed-form analytic bases, or None to fall back on Kato transport."""
        return None

    def describe(self) -> dict:
        return {}


@dataclass
class Bases:
    frames: np.ndarray  # (N, n, k)
    trace: np.ndarray  # (N,) trace of the limit matrix restricted to the subspace


def _select(mu: np.ndarray, side: str):
    return np.real(mu) < 0 if side == "+" else np.real(mu) > 0


def spectral_projector(A: np.ndarray, side: str, k: int, A1: Optional[np.ndarray] = None):
    """Projector onto the decaying subspace, its trace, and optionally dP/dλ.

    ``side`` '+' selects the stable subspace, '−' the unstable one.
    """
    mu, V = np.linalg.eig(A)
    sel = _select(mu, side)
    if int(np.sum(sel)) != k:
        gap = float(np.min(np.abs(np.real(mu))))
        raise SplittingFailure(f"expected {k} decaying modes on side {side}, found {int(np.sum(sel))}; gap {gap:.3e}")
    Vi = np.linalg.inv(V)
    P = V[:, sel] @ Vi[sel, :]
    tr = complex(np.sum(mu[sel]))
    if A1 is None:
        return P, tr, None
    B = Vi @ A1 @ V
    diff = mu[:, None] - mu[None, :]
    G = np.zeros_like(B)
    out = ~sel
    G[np.ix_(sel, out)] = B[np.ix_(sel, out)] / diff[np.ix_(sel, out)]
    G[np.ix_(out, sel)] = -B[np.ix_(out, sel)] / diff[np.ix_(out, sel)]
    return P, tr, V @ G @ Vi


REGULAR_SHIFT = 1e-6


def _regular_lambda(lam: complex) -> complex:
    # In the integrated formulation several limiting eigenvalues vanish at
    # λ = 0.  The projectors stay analytic there, but eigendecompositions
    # separating eigenvalues O(λ) apart lose accuracy like 1/|λ|, so bases for
    # tiny λ are taken just to the right, an O(1e-6) perturbation.
    return lam if abs(lam) >= REGULAR_SHIFT else lam + REGULAR_SHIFT


def _canonical_basis(P: np.ndarray, k: int) -> np.ndarray:
    # P applied to a fixed orthonormal set depends continuously on the
    # system's parameters, so the sign of D̃ can be compared along a family;
    # an SVD basis with a phase rule can flip discontinuously.
    n = P.shape[0]
    probe = np.cos(np.add.outer(np.arange(1, n + 1), 0.7 * np.arange(1, k + 1)))
    V, _ = np.linalg.qr(probe)
    return P @ V


def _projector_batch(A: np.ndarray, A1: np.ndarray, side: str, k: int):
    """Batched version of :func:`spectral_projector` returning (P, trace, dP/dλ)."""
    mu, V = np.linalg.eig(A)
    sel = _select(mu, side)
    counts = np.sum(sel, axis=-1)
    if np.any(counts != k):
        j = int(np.nonzero(counts != k)[0][0])
        gap = float(np.min(np.abs(np.real(mu[j]))))
        raise SplittingFailure(f"expected {k} decaying modes on side {side}, found {int(counts[j])}; gap {gap:.3e}")
    Vi = np.linalg.inv(V)
    S = sel[..., :, None].astype(float)
    P = V @ (S * Vi)
    tr = np.sum(np.where(sel, mu, 0), axis=-1)
    B = Vi @ A1 @ V
    diff = mu[..., :, None] - mu[..., None, :]
    cross = sel[..., :, None] != sel[..., None, :]
    sign = np.where(sel[..., :, None], 1.0, -1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.where(cross, sign * B / np.where(cross, diff, 1.0), 0.0)
    return P, tr, V @ G @ Vi


def kato_transport(system: EvansSystem, side: str, R0: np.ndarray, start, ends, rtol: float = 1e-10):
    """Carry bases R0 (N, n, k) from ``start`` to ``ends`` (N,) along straight segments.

    Solves Kato's equation dR/dλ = [P', P] R, which keeps R inside the
    decaying subspace and is analytic in λ.  Returns (R, trace) at the ends.
    """
    from scipy.integrate import solve_ivp

    k = system.k_plus if side == "+" else system.k_minus
    A0, A1 = (np.asarray(m, dtype=complex) for m in system.limit_parts(side))
    start = np.broadcast_to(np.asarray(start, dtype=complex), np.shape(ends)).copy()
    ends = np.asarray(ends, dtype=complex)
    R0 = np.asarray(R0, dtype=complex)
    N, n = len(ends), system.n
    d = ends - start

    def rhs(s, y):
        lam = start + s * d
        R = y.reshape(N, n, k)
        P, _, dP = _projector_batch(A0[None] + lam[:, None, None] * A1[None], A1[None], side, k)
        return (d[:, None, None] * ((dP @ P - P @ dP) @ R)).ravel()

    if np.any(d != 0):
        res = solve_ivp(rhs, (0.0, 1.0), R0.ravel(), method="DOP853", rtol=rtol, atol=rtol * 1e-2)
        R = res.y[:, -1].reshape(N, n, k)
    else:
        R = R0
    P, tr, _ = _projector_batch(A0[None] + ends[:, None, None] * A1[None], A1[None], side, k)
    return P @ R, tr


def init_bases(system: EvansSystem, lams, side: str, base_point: complex = REF_LAMBDA) -> Bases:
    """Analytic bases of the decaying subspace at ±∞ for each λ.

    Explicit formulas are used when the system provides them.  Otherwise the
    basis is fixed at ``base_point`` and carried to each λ by Kato transport
    along the straight segment joining them.  The segments stay in the
    right half-plane, where the splitting is consistent, so the result is
    path independent and conjugate λ receive conjugate bases.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    exp = system.explicit_bases(side, lams)
    if exp is not None:
        return exp
    k = system.k_plus if side == "+" else system.k_minus
    A0, A1 = system.limit_parts(side)
    P0, _, _ = spectral_projector(np.asarray(A0 + base_point * A1, dtype=complex), side, k)
    R0 = _canonical_basis(P0, k).astype(complex)
    targets = np.array([_regular_lambda(complex(l)) for l in lams])
    frames, traces = kato_transport(system, side, np.broadcast_to(R0, (len(lams),) + R0.shape), base_point,
                                    targets)
    return Bases(frames, traces)


def evans_eval(system: EvansSystem, lams, mode: str = "polar", tol: float = 1e-8,
               bases: Optional[tuple] = None, return_parts: bool = False):
    """Evans function at each λ (vectorized over λ).

    ``mode`` is 'polar' (full D̃) or 'polar-no-radial'.  With
    ``return_parts`` the tuple (D_no_radial, log_radius) is returned, so that
    D̃ = D_no_radial · exp(log_radius) without risking overflow.
    """
    if mode not in ("polar", "polar-no-radial"):
        raise ValueError("mode must be 'polar' or 'polar-no-radial'")
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    if system.explicit_bases("-", lams[:1]) is None:
        lams = np.array([_regular_lambda(complex(l)) for l in lams])
    if bases is None:
        bm = init_bases(system, lams, "-")
        bp = init_bases(system, lams, "+")
    else:
        bm, bp = bases

    def A(x):
        return system.matrix(x, lams)

    if getattr(system, "stiff", False):
        left = propagate_frames_stiff(A, bm.frames, system.x_minus, 0.0, shift=bm.trace, rtol=tol, atol=1e-2 * tol)
        right = propagate_frames_stiff(A, bp.frames, system.x_plus, 0.0, shift=bp.trace, rtol=tol, atol=1e-2 * tol)
    else:
        h_max = getattr(system, "max_step", 1.0)
        left = propagate_frames(A, bm.frames, system.x_minus, 0.0, tol=tol, h_max=h_max)
        right = propagate_frames(A, bp.frames, system.x_plus, 0.0, tol=tol, h_max=h_max)
    rho = left.log_radius + right.log_radius + bm.trace * system.x_minus + bp.trace * system.x_plus
    frame = np.concatenate([left.frames, right.frames], axis=-1)
    d_nr = np.linalg.det(frame)
    if return_parts:
        return d_nr, rho
    if mode == "polar-no-radial":
        return d_nr
    with np.errstate(over="ignore"):
        return d_nr * np.exp(rho)


# ---------------------------------------------------------------------------
# winding on the right half-disc


@dataclass(frozen=True)
class ContourSpec:
    radius: float
    min_points: int = 40
    threshold: float = 0.2
    max_points: int = 4000
    mode: str = "polar"
    detour: float = 1e-4


@dataclass
class ContourResult:
    spec: ContourSpec
    lams: np.ndarray  # full closed contour, counterclockwise, conjugate-reflected
    values: np.ndarray
    winding: int
    total_arg: float
    max_relative_step: float
    rouche_ok: bool
    detour_used: bool = False
    roots: list = field(default_factory=list)

    def rows(self):
        arg = np.concatenate([[0.0], np.cumsum(np.angle(self.values[1:] / self.values[:-1]))])
        return (["lambda_re", "lambda_im", "D_re", "D_im", "cumulative_arg"],
                [[l.real, l.imag, d.real, d.imag, a] for l, d, a in zip(self.lams, self.values, arg)])


def _upper_path(R: float, t: np.ndarray, detour: float = 0.0) -> np.ndarray:
    """Upper half of the boundary: arc from R to iR (t ∈ [0, ½]), then the
    imaginary axis down to 0 (t ∈ [½, 1]); with a detour the segment stops at
    i·detour and a quarter circle of that radius returns to the real axis."""
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape, dtype=complex)
    arc = t <= 0.5
    out[arc] = R * np.exp(1j * np.pi * t[arc])
    s = (t[~arc] - 0.5) * 2.0
    if detour <= 0:
        out[~arc] = 1j * R * (1.0 - s)
    else:
        seg = s <= 0.9
        y = R - (R - detour) * s / 0.9
        small = detour * np.exp(1j * (np.pi / 2) * (1.0 - (s - 0.9) / 0.1))
        out[~arc] = np.where(seg, 1j * y, small)
    return out


def winding_of_function(D: Callable[[np.ndarray], np.ndarray], spec: ContourSpec,
                        evaluate_order_sensitive: bool = False) -> ContourResult:
    """Adaptive winding number of a conjugate-symmetric function on the right half-disc."""
    n0 = max(int(spec.min_points), 4)
    t = np.unique(np.concatenate([np.linspace(0, 1, n0), [0.5]]))
    detour = 0.0
    vals = D(_upper_path(spec.radius, t))
    if abs(vals[-1]) <= 1e-8 * max(1.0, float(np.max(np.abs(vals)))):
        detour = spec.detour
        vals = D(_upper_path(spec.radius, t, detour))
    while True:
        rel = np.abs(np.diff(vals)) / np.minimum(np.abs(vals[1:]), np.abs(vals[:-1]))
        bad = np.nonzero(rel > spec.threshold)[0]
        if len(bad) == 0:
            break
        if len(t) + len(bad) > spec.max_points:
            raise RefinementBudgetExceeded(f"contour refinement needs more than {spec.max_points} points")
        new_t = 0.5 * (t[bad] + t[bad + 1])
        new_v = D(_upper_path(spec.radius, new_t, detour))
        t = np.concatenate([t, new_t])
        vals = np.concatenate([vals, new_v])
        order = np.argsort(t)
        t, vals = t[order], vals[order]
    lam_up = _upper_path(spec.radius, t, detour)
    steps = np.angle(vals[1:] / vals[:-1])
    upper = float(np.sum(steps))
    total = 2.0 * upper
    w = int(round(total / (2 * np.pi)))
    rel = np.abs(np.diff(vals)) / np.minimum(np.abs(vals[1:]), np.abs(vals[:-1]))
    # full counterclockwise contour: upper half R→iR→0, lower half 0→−iR→R
    lams = np.concatenate([lam_up, np.conj(lam_up[::-1][1:])])
    values = np.concatenate([vals, np.conj(vals[::-1][1:])])
    return ContourResult(spec=spec, lams=lams, values=values, winding=w, total_arg=total,
                         max_relative_step=float(np.max(rel)), rouche_ok=bool(np.max(rel) < 1.0),
                         detour_used=detour > 0)


def winding(system: EvansSystem, spec: ContourSpec, tol: float = 1e-8) -> ContourResult:
    """Winding number of D̃ on ∂(B(0, R) ∩ {ℜλ ≥ 0})."""

    def D(lams):
        d_nr, rho = evans_eval(system, lams, tol=tol, return_parts=True)
        if spec.mode == "polar-no-radial":
            return d_nr
        return _safe_exp_product(d_nr, rho)

    return winding_of_function(D, spec)


def _safe_exp_product(d, rho):
    with np.errstate(over="ignore"):
        out = d * np.exp(rho)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("Evans values overflow; use the no-radial mode")
    return out


# ---------------------------------------------------------------------------
# method of moments


SPLIT_FRACTION = 0.4871


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float
    n: int = 64

    def nodes(self):
        th = 2 * np.pi * np.arange(self.n) / self.n
        z = self.center + self.radius * np.exp(1j * th)
        w = 1j * self.radius * np.exp(1j * th) * (2 * np.pi / self.n)
        return z, w

    def contains(self, z):
        return np.abs(np.asarray(z) - self.center) < self.radius

    def enlarged(self, frac: float = 0.013):
        return Circle(self.center, self.radius * (1 + frac), self.n)

    def split(self):
        c, r = self.center, self.radius
        return Rectangle(c.real - r, c.real + r, c.imag - r, c.imag + r, max(16, self.n // 4)).split()


@dataclass(frozen=True)
class Rectangle:
    x0: float
    x1: float
    y0: float
    y1: float
    n: int = 24  # Gauss–Legendre nodes per edge

    def nodes(self):
        g, gw = np.polynomial.legendre.leggauss(self.n)
        corners = [complex(self.x0, self.y0), complex(self.x1, self.y0),
                   complex(self.x1, self.y1), complex(self.x0, self.y1)]
        zs, ws = [], []
        for a, b in zip(corners, corners[1:] + corners[:1]):
            zs.append(0.5 * (a + b) + 0.5 * (b - a) * g)
            ws.append(0.5 * (b - a) * gw)
        return np.concatenate(zs), np.concatenate(ws)

    def contains(self, z):
        z = np.asarray(z)
        return (self.x0 < z.real) & (z.real < self.x1) & (self.y0 < z.imag) & (z.imag < self.y1)

    def enlarged(self, frac: float = 0.013):
        dx, dy = frac * (self.x1 - self.x0), frac * (self.y1 - self.y0)
        return Rectangle(self.x0 - dx, self.x1 + dx, self.y0 - dy, self.y1 + dy, self.n)

    def split(self):
        # off-centre cuts keep the real axis (home of real roots) off the new edges
        xm = self.x0 + SPLIT_FRACTION * (self.x1 - self.x0)
        ym = self.y0 + SPLIT_FRACTION * (self.y1 - self.y0)
        return [Rectangle(self.x0, xm, self.y0, ym, self.n), Rectangle(xm, self.x1, self.y0, ym, self.n),
                Rectangle(xm, self.x1, ym, self.y1, self.n), Rectangle(self.x0, xm, ym, self.y1, self.n)]


@dataclass
class MomentRoot:
    location: complex
    multiplicity: int
    trail: list


def _log_derivative_many(D, contours):
    """Quadrature nodes, weights and D'/D (centered differences) for several
    contours, with a single batched call to D."""
    nodes = [c.nodes() for c in contours]
    z_all = np.concatenate([z for z, _ in nodes])
    h = 1e-6 * np.maximum(1.0, np.abs(z_all))
    vals = D(np.stack([z_all - h, z_all, z_all + h], axis=1).ravel()).reshape(-1, 3)
    ratio = (vals[:, 2] - vals[:, 0]) / (2 * h) / vals[:, 1]
    out, k = [], 0
    for z, w in nodes:
        out.append((z, w, ratio[k:k + len(z)]))
        k += len(z)
    return out


def _log_derivative(D, contour):
    return _log_derivative_many(D, [contour])[0]


def _moments(D, contour, lmax, cache=None):
    z, w, ratio = cache if cache is not None else _log_derivative(D, contour)
    return np.array([np.sum(w * z**l * ratio) / (2j * np.pi) for l in range(lmax + 1)])


def _newton_identities(power_sums):
    n = len(power_sums)
    e = [1.0 + 0j]
    for k in range(1, n + 1):
        s = sum((-1) ** (i - 1) * e[k - i] * power_sums[i - 1] for i in range(1, k + 1))
        e.append(s / k)
    coeffs = [(-1) ** k * e[k] for k in range(n + 1)]
    return np.roots(coeffs)


def polish_roots(D: Callable[[np.ndarray], np.ndarray], roots: Sequence[complex], max_iter: int = 8,
                 rtol: float = 1e-12) -> np.ndarray:
    """Newton iterations (centered-difference derivative), all roots in one batch.

    Roots whose iteration does not settle keep their input value.
    """
    z = np.asarray(roots, dtype=complex).copy()
    if z.size == 0:
        return z
    active = np.ones(z.shape, dtype=bool)
    start = z.copy()
    last = np.full(z.shape, np.inf)
    for _ in range(max_iter):
        if not active.any():
            break
        za = z[active]
        h = 1e-6 * np.maximum(1.0, np.abs(za))
        vals = D(np.stack([za - h, za, za + h], axis=1).ravel()).reshape(-1, 3)
        dD = (vals[:, 2] - vals[:, 0]) / (2 * h)
        step = np.where(dD != 0, vals[:, 1] / np.where(dD == 0, 1, dD), 0)
        z[active] = za - step
        last[active] = np.abs(step) / np.maximum(1.0, np.abs(za))
        done = np.abs(step) <= rtol * np.maximum(1.0, np.abs(za)) + 1e-15
        idx = np.nonzero(active)[0]
        active[idx[done]] = False
    # an iteration that stalls at the noise level of D is accepted; runaways are not
    bad = (np.abs(z - start) > 0.1 * np.maximum(np.abs(start), 1e-3) + 1e-6) | (last > 1e-6)
    z[bad] = start[bad]
    return z


def moment_roots(D: Callable[[np.ndarray], np.ndarray], contour, max_leaf: int = 2, max_depth: int = 8,
                 cluster_tol: float = 1e-6, polish: bool = True, _trail=None) -> list:
    """Zeros of an analytic function inside ``contour`` by the method of moments.

    ``D`` maps an array of λ to values.  The zeroth moment counts roots; when
    more than ``max_leaf`` are inside, the region is split into four and the
    pieces are processed recursively.  Simple roots are then refined by
    Newton's method unless ``polish`` is False.
    """
    roots = _moment_roots(D, contour, max_leaf, max_depth, cluster_tol, _trail)
    if polish:
        simple = [r for r in roots if r.multiplicity == 1]
        if simple:
            z = polish_roots(D, [r.location for r in simple])
            for r, zz in zip(simple, z):
                r.location = complex(zz)
    return roots


def _moment_roots(D, contour, max_leaf, max_depth, cluster_tol, _trail=None, _cache=None) -> list:
    trail = list(_trail or []) + [contour]
    cache = _cache if _cache is not None else _log_derivative(D, contour)
    m0 = _moments(D, contour, 0, cache)[0]
    N = int(round(m0.real))
    well_posed = abs(m0 - N) <= 0.05
    if (not well_posed or N > max_leaf) and len(trail) <= max_depth:
        # a root near the boundary or too many roots: subdivide
        return _split_and_recurse(D, contour, max_leaf, max_depth, cluster_tol, trail)
    for retry in ("refine", "refine", "enlarge"):
        if well_posed:
            break
        # at the depth limit: more quadrature nodes, then move the edge
        contour = replace(contour, n=2 * contour.n) if retry == "refine" else contour.enlarged()
        trail[-1] = contour
        cache = _log_derivative(D, contour)
        m0 = _moments(D, contour, 0, cache)[0]
        N = int(round(m0.real))
        well_posed = abs(m0 - N) <= 0.05
    if not well_posed:
        raise IllConditionedMoments(f"zeroth moment {m0} is not near an integer")
    if N <= 0:
        return []
    if N > max_leaf:
        raise IllConditionedMoments(f"{N} roots remain after {max_depth} subdivisions")
    roots = _newton_identities(_moments(D, contour, N, cache)[1:])
    out = []
    for r in roots:
        for m in out:
            if abs(m.location - r) < cluster_tol * max(1.0, abs(r)):
                m.multiplicity += 1
                break
        else:
            out.append(MomentRoot(complex(r), 1, trail))
    return out


def _split_and_recurse(D, contour, max_leaf, max_depth, cluster_tol, trail):
    roots = []
    children = contour.split()
    caches = _log_derivative_many(D, children)
    for child, cache in zip(children, caches):
        for r in _moment_roots(D, child, max_leaf, max_depth, cluster_tol, trail, cache):
            if contour.contains(r.location):
                roots.append(r)
    return roots


# ---------------------------------------------------------------------------
# high-frequency asymptotics


@dataclass
class HFTable:
    rows: list  # (R, error, C1, C2)
    converged: bool
    radius: Optional[float]
    threshold: float = 0.2

    def csv_rows(self):
        return ["R", "error", "C1", "C2"], [[r, e, c1, c2] for r, e, c1, c2 in self.rows]


def hf_samples(radius: float, n: int = 8) -> np.ndarray:
    """n points on the right semicircle |λ| = R, including λ = ±iR and λ = R."""
    th = np.linspace(-np.pi / 2, np.pi / 2, n + (1 - n % 2))
    return radius * np.exp(1j * th)


def _hf_row(D, R, n):
    lams = hf_samples(R, n)
    out = D(lams)
    if isinstance(out, tuple):
        d, rho = out
        fit = fit_hf(lams, d, radius=R, log_scale=rho)
    else:
        fit = fit_hf(lams, out, radius=R)
    return (float(R), fit.error, fit.C1.real, fit.C2.real)


def hf_table(D: Callable, radii: Sequence[float], n: int = 8, threshold: float = 0.2) -> HFTable:
    """Fit D ≈ C1 exp(C2 √λ) on semicircles of each radius (no early stop).

    ``D`` returns either values or a pair (D_no_radial, log_radius) as from
    ``evans_eval(..., return_parts=True)``; the pair gives the fit a
    continuous logarithm instead of one unwrapped from the samples.
    """
    rows = [_hf_row(D, R, n) for R in radii]
    conv = [r for r in rows if r[1] <= threshold]
    return HFTable(rows=rows, converged=bool(conv), radius=conv[0][0] if conv else None, threshold=threshold)


def hf_radius(D: Callable, R0: float = 2.0, R_max: float = 512.0, n: int = 8,
              threshold: float = 0.2) -> HFTable:
    """Double R from R0 until the fit error is at most ``threshold``.

    Returns the table so far; ``converged`` False means NonConvergent
    within the budget R ≤ R_max.
    """
    rows = []
    R = float(R0)
    while R <= R_max * (1 + 1e-12):
        rows.append(_hf_row(D, R, n))
        if rows[-1][1] <= threshold:
            return HFTable(rows=rows, converged=True, radius=R, threshold=threshold)
        R *= 2
    return HFTable(rows=rows, converged=False, radius=None, threshold=threshold)


def evans_parts(system: EvansSystem, tol: float = 1e-8) -> Callable:
    """λ ↦ (D_no_radial, log_radius), the form accepted by the high-frequency fit."""
    return lambda lams: evans_eval(system, lams, tol=tol, return_parts=True)


# ---------------------------------------------------------------------------
# gas dynamics in (τ, v, T)


class GasEvansSystem(EvansSystem):
    """Integrated eigenvalue system of Lagrangian Navier–Stokes about a profile.

    With w = (τ, v, T), f⁰ = (τ, v, e + v²/2), f¹ = (−v, p, vp) and viscosity
    block b = τ⁻¹ [[μ, 0], [μv, κ]] acting on (v, T), the unknown is
    Z = (W_τ, W_v, W_T, v, T) ∈ ℂ⁵ where W' = A⁰ w.  The τ-row of the
    integrated equation is algebraic and is solved using A¹_ττ = −σ.
    """

    n = 5
    stiff = True

    def __init__(self, profile: ViscousProfile):
        self.profile = profile
        self.sigma = profile.shock.sigma
        self.mu, self.kappa = profile.mu, profile.kappa
        self.x_minus = float(profile.x[0])
        self.x_plus = float(profile.x[-1])
        sh = profile.shock
        self._limits = {
            "-": self._parts(sh.minus.tau, sh.minus.S, 0.0, 0.0),
            "+": self._parts(sh.plus.tau, sh.plus.S, 0.0, 0.0),
        }
        counts = [int(np.sum(_select(np.linalg.eigvals(self.limit(s, [1.0])[0]), s))) for s in "-+"]
        self.k_minus, self.k_plus = counts
        if sum(counts) != self.n:
            raise SplittingFailure(f"decaying-mode counts {counts} do not add up to {self.n}")

    def _parts(self, tau, S, dtau, dS):
        """(M0, M1), with A = M0 + λ M1, at state (τ, S) with derivative (τ', S')."""
        sig, mu, kap = self.sigma, self.mu, self.kappa
        h = helmholtz_point(self.profile.model, tau, S)
        b = self.profile.model.bundle(tau, S)
        v = -sig * (tau - self.profile.shock.minus.tau)
        dv = -sig * dtau
        dT = b.e_ts * dtau + b.e_ss * dS
        binv = tau * np.array([[1 / mu, 0.0], [-v / kap, 1 / kap]])
        # A¹ = df¹ − σ df⁰ − dB(·, w̄'), split into the τ and (v, T) blocks
        A1_21 = np.array([h.p_tau + mu * dv / tau**2,
                          v * h.p_tau - sig * h.e_tau + (mu * v * dv + kap * dT) / tau**2])
        A1_22 = np.array([[-sig, h.p_T],
                          [h.p - sig * v - mu * dv / tau, v * h.p_T - sig * h.e_T]])
        A0_21 = np.array([0.0, h.e_tau])
        A0_22 = np.array([[1.0, 0.0], [v, h.e_T]])
        e1 = np.array([1.0, 0.0])
        M0 = np.zeros((5, 5))
        M1 = np.zeros((5, 5))
        M1[0, 0] = 1 / sig
        M0[0, 3] = -1 / sig
        M1[1:3, 0] = A0_21 / sig
        M0[1:3, 3:5] = A0_22 - np.outer(A0_21, e1) / sig
        M1[3:5, 0] = binv @ A1_21 / sig
        M1[3:5, 1:3] = binv
        M0[3:5, 3:5] = binv @ (A1_22 - np.outer(A1_21, e1) / sig)
        return M0, M1

    def coefficient_parts(self, x: float):
        t, s = self.profile.state(x)
        dt, ds = self.profile.derivative(x)
        return self._parts(float(t), float(s), float(dt), float(ds))

    def matrix(self, x, lams):
        M0, M1 = self.coefficient_parts(x)
        lams = np.asarray(lams, dtype=complex)
        return M0[None] + lams[:, None, None] * M1[None]

    def limit_parts(self, side):
        return self._limits[side]

    def describe(self):
        return {"system": "gas", "model": self.profile.model.describe(), "mu": self.mu, "kappa": self.kappa,
                "x_minus": self.x_minus, "x_plus": self.x_plus, "k_minus": self.k_minus, "k_plus": self.k_plus}


def build_system(model: EquationOfState, profile: ViscousProfile) -> GasEvansSystem:
    """Gas-dynamics Evans system about ``profile``; checks noncharacteristicity (σ ≠ 0)."""
    if profile.model is not model:
        profile = replace(profile, model=model)
    if profile.shock.sigma == 0:
        raise NoncharacteristicViolation("σ = 0: the τ-row of the integrated system is singular")
    return GasEvansSystem(profile)


FAR_LAMBDA = 250.0


@dataclass(frozen=True)
class GasLowFrequency:
    """D̃(0) against the Lopatinski determinant for one shock.

    The sign of D̃ alone depends on the basis normalization, which no fixed
    rule keeps continuous along a parameter family.  The stability index
    sgn(D̃(0) D̃(Λ)) for a large real Λ does not: it is the parity of the
    number of real eigenvalues in (0, Λ).
    """

    S_minus: float
    D0: float
    D_far: float
    delta: float

    @property
    def index(self) -> int:
        return int(np.sign(self.D0) * np.sign(self.D_far))

    @property
    def agrees(self) -> bool:
        """Index equals sgn δ (both +1 at small amplitude)."""
        return bool(self.index == np.sign(self.delta))

    def to_json(self) -> dict:
        return {"S_minus": self.S_minus, "D0": self.D0, "D_far": self.D_far, "delta": self.delta,
                "index": self.index, "signs_agree": self.agrees}


def _gas_system(model, anchor, S_minus, mu, kappa):
    shock = trace_backward(model, anchor, [S_minus]).samples[0].shock
    if shock is None:
        raise NoncharacteristicViolation(f"no shock on the backward curve at S₋ = {S_minus}")
    return shock, build_system(model, shoot_profile(model, shock, mu, kappa))


def _index_values(system, far, tol):
    d, _ = evans_eval(system, [0.0, far], tol=tol, return_parts=True)
    return float(d[0].real), float(d[1].real)


def gas_low_freq_check(model: EquationOfState, anchor, S_minus: float, mu: float = 1.0, kappa: float = 1.0,
                       far: float = FAR_LAMBDA, tol: float = 1e-8) -> GasLowFrequency:
    shock, system = _gas_system(model, anchor, S_minus, mu, kappa)
    D0, Df = _index_values(system, far, tol)
    delta = lopatinski_delta(model, shock, require_lax=False).delta
    return GasLowFrequency(float(S_minus), D0, Df, float(delta))


@dataclass
class ViscousTransition:
    bracket: tuple  # (S₋ on the side of the first endpoint, S₋ on the other side)
    index_ends: tuple
    evaluations: list  # (S₋, D̃(0), D̃(Λ)) in evaluation order

    def to_json(self) -> dict:
        return {"bracket": list(self.bracket), "index_at_ends": list(self.index_ends),
                "evaluations": [list(e) for e in self.evaluations]}


def viscous_transition(model: EquationOfState, anchor, bracket, width: float = 1e-4, mu: float = 1.0,
                       kappa: float = 1.0, far: float = FAR_LAMBDA, tol: float = 1e-8) -> ViscousTransition:
    """Bisect in S₋ on the stability index, which flips when a real eigenvalue crosses the origin.

    The radial factor is positive at real λ, so the no-radial values carry
    the signs.  Raises NoSignChange when both ends have the same index.
    """
    evals = []

    def index(S):
        _, system = _gas_system(model, anchor, S, mu, kappa)
        D0, Df = _index_values(system, far, tol)
        evals.append((float(S), D0, Df))
        return int(np.sign(D0) * np.sign(Df))

    a, b = float(bracket[0]), float(bracket[1])
    fa, fb = index(a), index(b)
    if fa == fb:
        raise NoSignChange(f"stability index is {fa} at both S₋ = {a} and {b}")
    while abs(b - a) > width:
        m = 0.5 * (a + b)
        fm = index(m)
        if fm == fa:
            a = m
        else:
            b, fb = m, fm
    return ViscousTransition((a, b), (fa, fb), evals)
