"""Viscous shock profiles of Lagrangian Navier–Stokes by stiff shooting.

With the left state at rest (v₋ = 0), the profile satisfies

    τ⁻¹ [[μ, 0], [μv, κ]] (v, T)' = F(τ, S),
    F₁ = −σ(v − v₋) + p − p₋,
    F₂ = −σ(e + v²/2 − e₋ − v₋²/2) + p v − p₋ v₋,

where v = v₋ − σ(τ − τ₋).  Integration runs in (τ, S) using
(v, T)' = [[−σ, 0], [ē_Sτ, ē_SS]] (τ, S)'.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .eos import EquationOfState
from .exceptions import NoConnection, SingularCoefficient, StepSizeUnderflow
from .hugoniot import ShockTriple
from .numerics import IntegratorSpec, bisect, integrate

__all__ = [
    "twode_rhs",
    "EndstateLinearization",
    "endstate_linearization",
    "finite_difference_jacobian",
    "ViscousProfile",
    "shoot_profile",
    "BurgersProfile",
    "designer_profile",
    "PROXIMITY",
    "MAX_MESH",
]

PROXIMITY = 1e-8
MAX_MESH = 4000
PROFILE_SPEC = IntegratorSpec(method="stiff", rtol=1e-12, atol=1e-14, max_steps=200_000)


def _check(shock: ShockTriple, mu: float, kappa: float):
    if shock.sigma == 0:
        raise SingularCoefficient("shock speed is zero")
    if not (mu > 0 and kappa > 0):
        raise SingularCoefficient("μ and κ must be positive")


def twode_rhs(model: EquationOfState, shock: ShockTriple, mu: float, kappa: float, tau, S) -> np.ndarray:
    """(τ, S)' of the traveling-wave ODE; accepts scalars or arrays."""
    _check(shock, mu, kappa)
    um = shock.minus
    sig = shock.sigma
    b = model.bundle(tau, S)
    if np.any(np.asarray(b.e_ss) == 0):
        raise SingularCoefficient("ē_SS vanishes")
    v = -sig * (tau - um.tau)
    p = -b.e_t
    F1 = -sig * v + p - um.p
    F2 = -sig * (b.e + 0.5 * v * v - um.e) + p * v
    # (v, T)' = τ b⁻¹ F with b = [[μ, 0], [μ v, κ]]
    dv = tau * F1 / mu
    dT = tau * (F2 - v * F1) / kappa
    dtau = -dv / sig
    dS = (dT - b.e_ts * dtau) / b.e_ss
    return np.array([dtau, dS])


@dataclass(frozen=True)
class EndstateLinearization:
    side: str
    state: tuple  # (τ, S)
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    kind: str  # saddle | repellor | attractor

    @property
    def stable_vector(self) -> np.ndarray:
        k = int(np.argmin(self.eigenvalues.real))
        return np.real(self.eigenvectors[:, k])

    @property
    def gap(self) -> float:
        """Ratio of the larger to the smaller eigenvalue modulus (scale separation)."""
        a = np.abs(self.eigenvalues)
        return float(np.max(a) / np.min(a))


def endstate_linearization(model: EquationOfState, shock: ShockTriple, mu: float, kappa: float,
                           side: str) -> EndstateLinearization:
    """Jacobian of the traveling-wave ODE at U₋ ('-') or U₊ ('+').

    At an equilibrium F = 0, so the Jacobian is
    τ N⁻¹ b⁻¹ dF with N = [[−σ, 0], [ē_Sτ, ē_SS]], b = [[μ, 0], [μ v, κ]] and
    dF = [[σ² − c², p_S], [v(σ² − c²), −σT + p_S v]].
    """
    _check(shock, mu, kappa)
    if side not in ("-", "+"):
        raise ValueError("side must be '-' or '+'")
    st = shock.minus if side == "-" else shock.plus
    sig = shock.sigma
    v = 0.0 if side == "-" else shock.v_plus
    if st.e_SS == 0:
        raise SingularCoefficient("ē_SS vanishes")
    Ninv = np.array([[-1 / sig, 0.0], [st.e_tauS / (sig * st.e_SS), 1 / st.e_SS]])
    binv = np.array([[1 / mu, 0.0], [-v / kappa, 1 / kappa]])
    dF = np.array([[sig**2 - st.c2, st.p_S], [v * (sig**2 - st.c2), -sig * st.T + st.p_S * v]])
    A = st.tau * Ninv @ binv @ dF
    lam, V = np.linalg.eig(A)
    order = np.argsort(lam.real)
    lam, V = lam[order], V[:, order]
    npos = int(np.sum(lam.real > 0))
    kind = {2: "repellor", 1: "saddle", 0: "attractor"}[npos]
    return EndstateLinearization(side, (st.tau, st.S), A, lam, V, kind)


def finite_difference_jacobian(model, shock, mu, kappa, side, h=1e-6) -> np.ndarray:
    """Centered-difference Jacobian of :func:`twode_rhs` at an endstate."""
    st = shock.minus if side == "-" else shock.plus
    x0 = np.array([st.tau, st.S])
    J = np.empty((2, 2))
    for j in range(2):
        d = np.zeros(2)
        d[j] = h * max(1.0, abs(x0[j]))
        J[:, j] = (twode_rhs(model, shock, mu, kappa, *(x0 + d)) -
                   twode_rhs(model, shock, mu, kappa, *(x0 - d))) / (2 * d[j])
    return J


@dataclass
class ViscousProfile:
    """Profile (τ̄, S̄)(x) on x ∈ [−L₋, L₊], with x = 0 where τ̄ is midway between τ₋ and τ₊."""

    model: EquationOfState
    shock: ShockTriple
    mu: float
    kappa: float
    x: np.ndarray
    tau: np.ndarray
    S: np.ndarray
    dtau: np.ndarray
    dS: np.ndarray
    end_distances: tuple  # (|U(−L₋) − U₋|, |U(L₊) − U₊|)
    _spline: object = field(default=None, repr=False)

    def __post_init__(self):
        y = np.vstack([self.tau, self.S]).T
        dy = np.vstack([self.dtau, self.dS]).T
        self._spline = CubicHermiteSpline(self.x, y, dy, axis=0)

    @property
    def L_minus(self) -> float:
        return float(-self.x[0])

    @property
    def L_plus(self) -> float:
        return float(self.x[-1])

    def state(self, x):
        """(τ̄, S̄) at x; constant extension by the endstates beyond the mesh."""
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, self.x[0], self.x[-1])
        y = self._spline(xc)
        return y[..., 0], y[..., 1]

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.x[0]) & (x <= self.x[-1])
        y = self._spline(np.clip(x, self.x[0], self.x[-1]), 1)
        return np.where(inside, y[..., 0], 0.0), np.where(inside, y[..., 1], 0.0)

    def velocity(self, tau):
        return -self.shock.sigma * (np.asarray(tau) - self.shock.minus.tau)

    def derived(self):
        """v̄, T̄, ē on the mesh."""
        b = self.model.bundle(self.tau, self.S)
        return self.velocity(self.tau), np.asarray(b.e_s), np.asarray(b.e)

    def ode_residual(self) -> float:
        """Max scaled residual of the profile ODE at mesh midpoints."""
        xm = 0.5 * (self.x[1:] + self.x[:-1])
        t, s = self.state(xm)
        dt, ds = self.derivative(xm)
        f = twode_rhs(self.model, self.shock, self.mu, self.kappa, t, s)
        scale = np.max(np.abs(np.vstack([self.dtau, self.dS])), axis=1)[:, None]
        return float(np.max(np.abs(np.vstack([dt, ds]) - f) / scale))

    def rows(self):
        v, T, e = self.derived()
        return (["x", "tau", "S", "v", "T", "e"],
                [list(r) for r in zip(self.x, self.tau, self.S, v, T, e)])

    def metadata(self) -> dict:
        sh = self.shock
        return {
            "model": self.model.describe(),
            "mu": self.mu,
            "kappa": self.kappa,
            "sigma": sh.sigma,
            "U_minus": {"tau": sh.minus.tau, "S": sh.minus.S},
            "U_plus": {"tau": sh.plus.tau, "S": sh.plus.S},
            "L_minus": self.L_minus,
            "L_plus": self.L_plus,
            "endpoint_distances": list(self.end_distances),
            "mesh_points": int(len(self.x)),
        }


def _resample(x, y, n_max):
    """Keep at most n_max mesh points, spread evenly in arc length of (x, y)."""
    if len(x) <= n_max:
        return np.arange(len(x))
    span = np.ptp(y, axis=1)
    span[span == 0] = 1.0
    pts = np.vstack([(x - x[0]) / max(np.ptp(x), 1e-300), y / span[:, None]])
    seg = np.sqrt(np.sum(np.diff(pts, axis=1) ** 2, axis=0))
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0, arc[-1], n_max)
    idx = np.unique(np.searchsorted(arc, targets).clip(0, len(x) - 1))
    idx = np.unique(np.concatenate([[0, len(x) - 1], idx]))
    return idx


def _shoot(model, shock, mu, kappa, spec, y0, um, box, offset, x_max):
    def f(x, y):
        return twode_rhs(model, shock, mu, kappa, y[0], y[1])

    def arrive(x, y):
        return np.linalg.norm(y - um) - offset

    arrive.terminal = True
    arrive.direction = -1

    def escape(x, y):
        return min(np.min(y - box[0]), np.min(box[1] - y))

    escape.terminal = True
    escape.direction = -1

    traj = integrate(spec, f, (0.0, -x_max), y0, events=[arrive, escape])
    if traj.x_events[1].size:
        raise NoConnection(f"trajectory left the box at x = {traj.x_events[1][0]:.6g}")
    if not traj.x_events[0].size:
        raise NoConnection(f"U₋ not reached within |x| ≤ {x_max}")
    return traj


def shoot_profile(model: EquationOfState, shock: ShockTriple, mu: float = 1.0, kappa: float = 1.0,
                  spec: IntegratorSpec = PROFILE_SPEC, offset: float = PROXIMITY,
                  x_max: float = 1e5, refine: int = 4) -> ViscousProfile:
    """Shoot backward in x from the saddle U₊ until within ``offset`` of U₋.

    The start point is U₊ ± offset·r, r the stable eigenvector of the
    linearization at U₊.  The sign pointing toward U₋ is tried first; if
    that trajectory leaves the bounding box or stalls, the opposite sign is tried.
    Each integrator step is subdivided ``refine`` times through the dense
    output before the mesh is thinned to at most MAX_MESH points.
    """
    lin = endstate_linearization(model, shock, mu, kappa, "+")
    if lin.kind != "saddle":
        raise NoConnection(f"U₊ is a {lin.kind}, not a saddle")
    up = np.array([shock.plus.tau, shock.plus.S])
    um = np.array([shock.minus.tau, shock.minus.S])
    r = lin.stable_vector
    r = r / np.linalg.norm(r)
    if np.dot(r, um - up) < 0:
        r = -r
    lo, hi = np.minimum(um, up), np.maximum(um, up)
    box = (lo - (hi - lo), hi + (hi - lo))
    failures = []
    for sign in (1.0, -1.0):
        try:
            traj = _shoot(model, shock, mu, kappa, spec, up + sign * offset * r, um, box, offset, x_max)
            break
        except (NoConnection, StepSizeUnderflow) as exc:
            failures.append(f"sign {sign:+.0f}: {exc}")
    else:
        raise NoConnection("; ".join(failures))
    x_end = float(traj.x_events[0][0])
    xs = traj.x
    frac = np.linspace(0, 1, refine + 1)[:-1]
    fine = (xs[:-1, None] + np.diff(xs)[:, None] * frac[None, :]).ravel()
    fine = np.concatenate([fine, [x_end]])
    y = traj.sol(fine)
    y[:, 0] = up + np.sign(np.dot(traj.y[:, 0] - up, r)) * offset * r
    # recentre at the crossing of the τ midpoint, located on the dense output
    mid = 0.5 * (um[0] + up[0])
    j = int(np.nonzero(np.diff(np.sign(y[0] - mid)))[0][0])
    x_mid = bisect(lambda s: float(traj.sol(s)[0]) - mid, (fine[j], fine[j + 1]), xtol=1e-12)
    x = fine[::-1] - x_mid
    y = y[:, ::-1].copy()
    idx = _resample(x, y, MAX_MESH)
    x, y = x[idx], y[:, idx]
    dy = twode_rhs(model, shock, mu, kappa, y[0], y[1])
    dists = (float(np.linalg.norm(y[:, 0] - um)), float(np.linalg.norm(y[:, -1] - up)))
    return ViscousProfile(model, shock, mu, kappa, x, y[0], y[1], dy[0], dy[1], dists)


@dataclass(frozen=True)
class BurgersProfile:
    """v̄(x) = −γ tanh(γx/2), ū ≡ 0 for the rotating model."""

    gamma: float

    def v(self, x):
        return -self.gamma * np.tanh(self.gamma * np.asarray(x) / 2)

    def dv(self, x):
        return -0.5 * self.gamma**2 / np.cosh(self.gamma * np.asarray(x) / 2) ** 2

    def u(self, x):
        return np.zeros((2,) + np.shape(x))

    def truncation(self, tol: float = PROXIMITY) -> float:
        """|x| beyond which |v̄ − v±| < tol."""
        return math.log(2 * self.gamma / tol) / self.gamma


def designer_profile(gamma: float) -> BurgersProfile:
    if not gamma > 0:
        raise ValueError("γ must be positive")
    return BurgersProfile(gamma)
