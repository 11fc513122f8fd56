"""The rotating model: a 2×2 viscous system whose flux rotates along a Burgers profile.

    u_t + (A(v) u)_x = u_xx,   v_t + (v²/2)_x = v_xx,
    A(v) = R_θ diag(1, −1) R_−θ,   θ(v) = M π v,

with profile v̄(x) = −γ tanh(γx/2), ū ≡ 0.  The u-block of the integrated
eigenvalue problem is the first-order system W' = 𝒜(x, λ) W with
𝒜 = [[0, I], [λ, A(v̄)]].
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .evans import Bases, Circle, EvansSystem, Rectangle, evans_eval, moment_roots
from .exceptions import NumericalFailure, TrackingLoss
from .lopatinski import designer_delta
from .numerics import IntegratorSpec, integrate

__all__ = [
    "RotatingModel",
    "spectral_bound",
    "transversality_nu",
    "normalized_nu",
    "low_freq_check",
    "LowFreqComparison",
    "RootStep",
    "TrackEvent",
    "RootTrajectory",
    "designer_evans",
    "designer_roots",
    "track_roots",
    "ScanCell",
    "region_scan",
]

J = np.array([[0.0, -1.0], [1.0, 0.0]])


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass
class RotatingModel(EvansSystem):
    """Evans system of the rotating model at rate M and amplitude γ.

    ``rotated`` switches to the co-rotating frame Y = T⁻¹W with
    T = diag(R_θ(v̄), R_θ(v̄)), in which the coefficient is
    [[0, I], [λ, A_m]] − M π v̄' diag(J, J).  Since θ(v̄(0)) = 0 the two
    forms produce the same D̃.
    """

    M: float
    gamma: float
    rotated: bool = False
    tail_tol: float = 1e-10
    max_step: float = 4.0
    n: int = field(default=4, init=False)
    k_minus: int = field(default=2, init=False)
    k_plus: int = field(default=2, init=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("γ must be positive")
        # |v̄(±L) − v±| ≈ 2γ e^{−γL}
        L = max(math.log(2 * self.gamma / self.tail_tol) / self.gamma, 4.0)
        self.x_minus, self.x_plus = -L, L

    # profile --------------------------------------------------------------
    def profile(self, x):
        return -self.gamma * np.tanh(self.gamma * np.asarray(x) / 2)

    def profile_derivative(self, x):
        return -0.5 * self.gamma**2 / np.cosh(self.gamma * np.asarray(x) / 2) ** 2

    def theta(self, v):
        return self.M * np.pi * np.asarray(v)

    def flux_matrix(self, v) -> np.ndarray:
        """A(v) = R_θ diag(1, −1) R_−θ = [[cos 2θ, sin 2θ], [sin 2θ, −cos 2θ]]."""
        t = 2 * self.theta(v)
        return np.array([[np.cos(t), np.sin(t)], [np.sin(t), -np.cos(t)]])

    # Evans system ----------------------------------------------------------
    def _coeff(self, x):
        """(A0, A1) with 𝒜(x, λ) = A0 + λ A1."""
        A0 = np.zeros((4, 4))
        A1 = np.zeros((4, 4))
        A0[0:2, 2:4] = np.eye(2)
        A1[2:4, 0:2] = np.eye(2)
        if self.rotated:
            A0[2:4, 2:4] = np.diag([1.0, -1.0])
            w = self.M * np.pi * self.profile_derivative(x)
            A0[0:2, 0:2] -= w * J
            A0[2:4, 2:4] -= w * J
        else:
            A0[2:4, 2:4] = self.flux_matrix(self.profile(x))
        return A0, A1

    def matrix(self, x, lams):
        A0, A1 = self._coeff(x)
        lams = np.asarray(lams, dtype=complex)
        return A0[None] + lams[:, None, None] * A1[None]

    def limit_parts(self, side):
        A0 = np.zeros((4, 4))
        A1 = np.zeros((4, 4))
        A0[0:2, 2:4] = np.eye(2)
        A1[2:4, 0:2] = np.eye(2)
        if self.rotated:
            A0[2:4, 2:4] = np.diag([1.0, -1.0])
        else:
            A0[2:4, 2:4] = self.flux_matrix(self.gamma if side == "-" else -self.gamma)
        return A0, A1

    def explicit_bases(self, side, lams):
        """Closed-form bases; at λ = 0 they reduce to the orthonormal pairs
        ½(c, s, c, s), (−s, c, 0, 0) at −∞ and ½(s, c, −s, −c), (c, −s, 0, 0)
        at +∞, with c = cos Mγπ, s = sin Mγπ."""
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        sq = np.sqrt(1 + 4 * lams)
        th = self.M * np.pi * self.gamma
        c, s = math.cos(th), math.sin(th)
        if side == "-":
            r1, mu1 = np.array([c, s]), (1 + sq) / 2
            r2, mu2 = np.array([-s, c]), (-1 + sq) / 2
            scale1 = 0.5
            trace = sq
        else:
            r1, mu1 = np.array([s, c]), (-1 - sq) / 2
            r2, mu2 = np.array([c, -s]), (1 - sq) / 2
            scale1 = 0.5
            trace = -sq
        if self.rotated:
            T = _rot(th if side == "-" else -th)
            r1, r2 = T.T @ r1, T.T @ r2
        N = len(lams)
        F = np.zeros((N, 4, 2), dtype=complex)
        F[:, 0:2, 0] = scale1 * r1
        F[:, 2:4, 0] = scale1 * mu1[:, None] * r1
        F[:, 0:2, 1] = r2
        F[:, 2:4, 1] = mu2[:, None] * r2
        return Bases(F, trace)

    def describe(self):
        return {"model": "rotating", "M": self.M, "gamma": self.gamma, "rotated": self.rotated,
                "L": self.x_plus}


def spectral_bound(coefficient_max: float = 1.0) -> float:
    """Radius beyond which no unstable eigenvalue exists: 4 C², C = max |a_ij|."""
    return 4.0 * coefficient_max**2


def _coefficient_max(model: RotatingModel, n: int = 2001) -> float:
    x = np.linspace(model.x_minus, model.x_plus, n)
    return float(max(np.max(np.abs(model.flux_matrix(v))) for v in model.profile(x)))


# ---------------------------------------------------------------------------
# transversality


def transversality_nu(gamma: float, M: float, rtol: float = 1e-11) -> float:
    """Wronskian ν of the decaying solutions of u' = A(v̄) u, scaled so ν/(−2γ) → 1 as γ → 0.

    The mode leaving −∞ grows like e^{x} along ½(cos Mγπ, sin Mγπ); the mode
    decaying at +∞ behaves like e^{−x} along −½(sin Mγπ, cos Mγπ).  Each is
    integrated with its exponential factor removed.
    """
    model = RotatingModel(M, gamma)
    th = M * np.pi * gamma
    r_minus = 0.5 * np.array([math.cos(th), math.sin(th)])
    r_plus = -0.5 * np.array([math.sin(th), math.cos(th)])
    spec = IntegratorSpec(method="nonstiff", rtol=rtol, atol=1e-14)

    def left(x, w):
        return model.flux_matrix(model.profile(x)) @ w - w

    def right(x, w):
        return model.flux_matrix(model.profile(x)) @ w + w

    wl = integrate(spec, left, (model.x_minus, 0.0), r_minus).y[:, -1]
    wr = integrate(spec, right, (model.x_plus, 0.0), r_plus).y[:, -1]
    wronskian = wl[0] * wr[1] - wl[1] * wr[0]
    return float(-2 * gamma * (-4 * wronskian))


def normalized_nu(gamma: float, M: float) -> float:
    """ν/(−2γ)."""
    return transversality_nu(gamma, M) / (-2 * gamma)


@dataclass(frozen=True)
class LowFreqComparison:
    gamma: float
    M: float
    evans_zero: float
    nu: float
    delta: float
    predicted: float  # −ν̂ δ̂ / 4 with ν̂ = ν/(−2γ), δ̂ = δ/(−2γ)
    relative_error: float


def low_freq_check(gamma: float, M: float, tol: float = 1e-10) -> LowFreqComparison:
    """Compare D̃(0) from the explicit bases with the product of ν and δ.

    With both factors divided by −2γ (the normalization of the explicit
    bases), D̃(0) = −ν̂ δ̂ / 4.
    """
    model = RotatingModel(M, gamma)
    d0 = complex(evans_eval(model, [0.0], tol=tol)[0])
    nu = transversality_nu(gamma, M)
    delta = float(designer_delta(gamma, M))
    pred = -(nu / (-2 * gamma)) * (delta / (-2 * gamma)) / 4
    err = abs(d0.real - pred) / max(abs(pred), 1e-300)
    return LowFreqComparison(gamma, M, d0.real, nu, delta, pred, err)


# ---------------------------------------------------------------------------
# roots and tracking


def designer_evans(M: float, gamma: float, tol: float = 1e-8, mode: str = "polar"):
    """Callable λ-array ↦ D̃ for the rotating model."""
    model = RotatingModel(M, gamma)

    def D(lams):
        return evans_eval(model, np.asarray(lams, dtype=complex), mode=mode, tol=tol)

    return D


def _symmetrize(roots, tol):
    """Snap near-real roots to the axis and make complex roots exact conjugate pairs."""
    out = []
    pending = [complex(r) for r in roots]
    while pending:
        r = pending.pop(0)
        if abs(r.imag) <= tol:
            out.append(complex(r.real, 0.0))
            continue
        j = min(range(len(pending)), key=lambda k: abs(pending[k] - r.conjugate()), default=None)
        if j is not None and abs(pending[j] - r.conjugate()) <= 1e3 * tol + 1e-3 * abs(r):
            partner = pending.pop(j)
            mid = 0.5 * (r + partner.conjugate())
            out.extend([mid, mid.conjugate()])
        else:
            out.append(r)
    return sorted(out, key=lambda z: (z.real, z.imag))


def designer_roots(M: float, gamma: float, contour, tol: float = 1e-8, snap: float = 1e-8) -> list:
    """Moment-method roots of D̃ inside ``contour``, conjugate-symmetrized."""
    D = designer_evans(M, gamma, tol=tol)
    found = moment_roots(D, contour)
    flat = []
    for r in found:
        flat.extend([r.location] * r.multiplicity)
    return _symmetrize(flat, snap)


@dataclass
class RootStep:
    param: float
    roots: list
    evans_zero: float  # D̃(0); its sign flips exactly when a root crosses the origin


@dataclass
class TrackEvent:
    kind: str  # origin-crossing | collision | rejoin | hopf | window
    between: tuple
    detail: str
    location: Optional[float] = None  # refined parameter value

    def to_json(self):
        return {"kind": self.kind, "between": list(self.between), "location": self.location,
                "detail": self.detail}


@dataclass
class RootTrajectory:
    varying: str
    fixed: dict
    window: tuple = ()
    steps: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def to_json(self):
        return {
            "varying": self.varying,
            "fixed": self.fixed,
            "window": list(self.window),
            "steps": [{"param": s.param, "evans_zero": s.evans_zero,
                       "roots": [[r.real, r.imag] for r in s.roots]} for s in self.steps],
            "events": [e.to_json() for e in self.events],
        }

    def events_of(self, kind):
        return [e for e in self.events if e.kind == kind]


def _split_roots(roots):
    real = sorted(r.real for r in roots if r.imag == 0)
    upper = sorted((r for r in roots if r.imag > 0), key=lambda z: z.real)
    return real, upper


def _hopf_pair(prev_upper, cur_upper, tol):
    """A pair of matched upper-half-plane roots whose real parts change sign."""
    for z in prev_upper:
        if not cur_upper:
            return None
        w = min(cur_upper, key=lambda q: abs(q - z))
        if np.sign(z.real) != np.sign(w.real) and min(z.imag, w.imag) > tol:
            return z, w
    return None


def _classify(prev: RootStep, cur: RootStep, tol: float) -> list:
    """Events between two consecutive steps."""
    ev = []
    between = (prev.param, cur.param)
    real_a, up_a = _split_roots(prev.roots)
    real_b, up_b = _split_roots(cur.roots)
    if np.sign(prev.evans_zero) != np.sign(cur.evans_zero):
        ev.append(TrackEvent("origin-crossing", between,
                             f"D(0) {prev.evans_zero:.6g} -> {cur.evans_zero:.6g}"))
    if len(up_b) > len(up_a) and len(real_b) == len(real_a) - 2:
        ev.append(TrackEvent("collision", between, f"real {real_a} -> pair {up_b}"))
    elif len(up_b) < len(up_a) and len(real_b) == len(real_a) + 2:
        ev.append(TrackEvent("rejoin", between, f"pair {up_a} -> real {real_b}"))
    pair = _hopf_pair(up_a, up_b, tol)
    if pair is not None:
        ev.append(TrackEvent("hopf", between, f"pair {pair[0]:.6g} -> {pair[1]:.6g}"))
    if len(prev.roots) != len(cur.roots) and not any(e.kind in ("collision", "rejoin") for e in ev):
        if not (ev and ev[0].kind == "origin-crossing"):
            ev.append(TrackEvent("window", between, f"{len(prev.roots)} -> {len(cur.roots)} roots in window"))
    return ev


def _ambiguous(prev: RootStep, cur: RootStep) -> bool:
    """Nearest-neighbour matching fails the ratio test (best/second best < 0.5)."""
    a = [z for z in prev.roots if z.imag >= 0]
    b = [z for z in cur.roots if z.imag >= 0]
    if len(a) != len(b) or len(b) < 2:
        return False
    for z in a:
        d = sorted(abs(w - z) for w in b)
        if d[0] > 0 and d[0] / d[1] >= 0.5:
            return True
    return False


@dataclass
class _Tracker:
    varying: str
    fixed: dict
    window: object
    evans_tol: float
    snap: float

    def params(self, p):
        M = p if self.varying == "M" else self.fixed["M"]
        g = p if self.varying == "gamma" else self.fixed["gamma"]
        return M, g

    def step(self, p) -> RootStep:
        M, g = self.params(p)
        roots = designer_roots(M, g, self.window, tol=self.evans_tol, snap=self.snap)
        return RootStep(float(p), roots, self.evans_zero(p))

    def evans_zero(self, p) -> float:
        M, g = self.params(p)
        return float(evans_eval(RotatingModel(M, g), [0.0], tol=self.evans_tol)[0].real)


def _refine(tracker: _Tracker, event: TrackEvent, a: RootStep, b: RootStep, width: float, tol: float):
    """Bisect the parameter interval of an event down to ``width``."""
    lo, hi = a, b
    if event.kind == "origin-crossing":
        s_lo = np.sign(lo.evans_zero)
        pa, pb = lo.param, hi.param
        while abs(pb - pa) > width:
            m = 0.5 * (pa + pb)
            if np.sign(tracker.evans_zero(m)) == s_lo:
                pa = m
            else:
                pb = m
        event.location = 0.5 * (pa + pb)
        return
    while abs(hi.param - lo.param) > width:
        mid = tracker.step(0.5 * (lo.param + hi.param))
        if any(e.kind == event.kind for e in _classify(lo, mid, tol)):
            hi = mid
        elif any(e.kind == event.kind for e in _classify(mid, hi, tol)):
            lo = mid
        else:
            break  # the event dissolved under refinement; keep the last bracket
    event.location = 0.5 * (lo.param + hi.param)
    event.between = (lo.param, hi.param)
    final = [e for e in _classify(lo, hi, tol) if e.kind == event.kind]
    if final:
        event.detail = final[0].detail


def track_roots(params: Sequence[float], window, varying: str = "M", fixed: Optional[dict] = None,
                tol: float = 1e-4, evans_tol: float = 1e-8, refine_width: Optional[float] = 1e-4,
                snap: float = 1e-8) -> RootTrajectory:
    """Roots of D̃ inside ``window`` along a parameter path, with event classification.

    ``varying`` is 'M' or 'gamma'; the other parameter comes from ``fixed``.
    Events (origin crossing, collision, rejoin, Hopf, window entry/exit) are
    detected between consecutive steps and, if ``refine_width`` is set,
    located by bisection in the parameter.
    """
    if varying not in ("M", "gamma"):
        raise ValueError("varying must be 'M' or 'gamma'")
    fixed = dict(fixed or {})
    tracker = _Tracker(varying, fixed, window, evans_tol, snap)
    traj = RootTrajectory(varying=varying, fixed=fixed, window=_window_tuple(window))
    for p in params:
        step = tracker.step(p)
        if traj.steps:
            prev = traj.steps[-1]
            if abs(len(step.roots) - len(prev.roots)) > 2:
                raise TrackingLoss(f"root count jumps from {len(prev.roots)} to {len(step.roots)} "
                                   f"at {varying} = {p}")
            events = _classify(prev, step, tol)
            if not events and _ambiguous(prev, step):
                raise TrackingLoss(f"ambiguous root matching between {varying} = {prev.param} and {p}")
            for e in events:
                if refine_width is not None and e.kind != "window":
                    _refine(tracker, e, prev, step, refine_width, tol)
                traj.events.append(e)
        traj.steps.append(step)
    return traj


def _window_tuple(window):
    if isinstance(window, Rectangle):
        return ("rectangle", window.x0, window.x1, window.y0, window.y1)
    if isinstance(window, Circle):
        return ("circle", window.center.real, window.center.imag, window.radius)
    return (repr(window),)


@dataclass
class ScanCell:
    gamma: float
    m_gamma: float
    count: Optional[int]
    jump: bool = False
    near_delta_zero: bool = False
    nu_sign_change: bool = False
    error: Optional[str] = None
    roots: list = field(default_factory=list)


def _scan_cell(g: float, mg: float, R: float, tol: float) -> ScanCell:
    cell = ScanCell(float(g), float(mg), None)
    try:
        box = Rectangle(1e-6, R, -R, R, 24)
        roots = designer_roots(mg / g, g, box, tol=tol)
        cell.roots = roots
        cell.count = len([r for r in roots if r.real > 0])
    except (NumericalFailure, FloatingPointError) as exc:  # recorded per cell; the scan continues
        cell.error = f"{type(exc).__name__}: {exc}"
    # δ vanishes at Mγ = (2k+1)/4
    k = round(2 * mg - 0.5)
    cell.near_delta_zero = abs(mg - (2 * k + 1) / 4) < 0.02
    return cell


def region_scan(gammas: Sequence[float], m_gammas: Sequence[float], radius: Optional[float] = None,
                tol: float = 1e-8, workers: int = 1) -> list:
    """Unstable-root counts on a (γ, Mγ) grid, flagging jumps of two between neighbours.

    Roots are counted with ℜλ > 0 inside a box covering the right half of
    the disc of the given radius (default: the spectral bound).  Cells are
    independent; ``workers`` > 1 spreads them over that many processes.
    """
    R = spectral_bound() if radius is None else radius
    pairs = [(float(g), float(mg)) for g in gammas for mg in m_gammas]
    args = ([p[0] for p in pairs], [p[1] for p in pairs], [R] * len(pairs), [tol] * len(pairs))
    if workers > 1 and len(pairs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_scan_cell, *args))
    else:
        cells = list(map(_scan_cell, *args))
    grid = dict(zip(pairs, cells))
    gs, ms = [float(g) for g in gammas], [float(m) for m in m_gammas]
    for i, g in enumerate(gs):
        for j, mg in enumerate(ms):
            c = grid[(g, mg)]
            for di, dj in ((1, 0), (0, 1)):
                if i + di < len(gs) and j + dj < len(ms):
                    d = grid[(gs[i + di], ms[j + dj])]
                    if c.count is not None and d.count is not None and abs(c.count - d.count) == 2:
                        c.jump = True
    return [grid[(g, mg)] for g in gs for mg in ms]
