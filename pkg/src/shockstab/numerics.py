"""Numerical kernel: integrators, scalar root finding, cubic roots, frame
orthonormalization, exponential frame propagation and the high-frequency fit.

The general-purpose ODE integrator delegates to :func:`scipy.integrate.solve_ivp`
(variable-order BDF/NDF for stiff problems, Dormand–Prince RK45 otherwise).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import (
    DegenerateFit,
    FrameDegeneracy,
    MaxStepsExceeded,
    NoSignChange,
    RankDeficient,
    StepSizeUnderflow,
)

__all__ = [
    "IntegratorSpec",
    "Trajectory",
    "integrate",
    "bisect",
    "cubic_roots",
    "orthonormalize",
    "expm_batch",
    "FramePropagation",
    "propagate_frames",
    "propagate_frames_stiff",
    "HFFit",
    "fit_hf",
]


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class IntegratorSpec:
    method: str = "stiff"
    rtol: float = 1e-6
    atol: float = 1e-8
    max_steps: int = 100_000
    jacobian: str = "analytic"

    def __post_init__(self):
        if self.method not in ("stiff", "nonstiff"):
            raise ValueError("method must be 'stiff' or 'nonstiff'")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if self.jacobian not in ("analytic", "finite-difference"):
            raise ValueError("jacobian must be 'analytic' or 'finite-difference'")

    def scaled(self, factor: float) -> "IntegratorSpec":
        return IntegratorSpec(self.method, self.rtol * factor, self.atol * factor,
                              self.max_steps, self.jacobian)


@dataclass
class Trajectory:
    x: np.ndarray
    y: np.ndarray  # shape (n, len(x))
    sol: Callable  # dense output
    x_events: list
    y_events: list
    nsteps: int
    status: int


class _StepCounter:
    def __init__(self, f, limit):
        self.f = f
        self.calls = 0
        self.limit = limit

    def __call__(self, x, y):
        self.calls += 1
        if self.calls > self.limit:
            raise MaxStepsExceeded(f"more than {self.limit} right-hand-side evaluations")
        return self.f(x, y)


def integrate(spec: IntegratorSpec, f, x_span, y0, jac=None, events=None, max_step=np.inf) -> Trajectory:
    """Error-controlled solution of y' = f(x, y) with dense output.

    ``events`` follow :func:`scipy.integrate.solve_ivp` conventions.  Event
    locations are refined to the root-finder's tolerance (well below 1e-10
    in x).  The step budget is enforced on right-hand-side evaluations
    (roughly ``10 * max_steps``) and on accepted steps.
    """
    method = "BDF" if spec.method == "stiff" else "RK45"
    counter = _StepCounter(f, 10 * spec.max_steps)
    kwargs = {}
    if method == "BDF" and jac is not None and spec.jacobian == "analytic":
        kwargs["jac"] = jac
    try:
        res = solve_ivp(counter, x_span, np.asarray(y0), method=method, rtol=spec.rtol,
                        atol=spec.atol, dense_output=True, events=events, max_step=max_step, **kwargs)
    except MaxStepsExceeded:
        raise
    if res.status == -1:
        if "step size" in res.message.lower():
            raise StepSizeUnderflow(res.message)
        raise StepSizeUnderflow(res.message)
    if len(res.t) - 1 > spec.max_steps:
        raise MaxStepsExceeded(f"{len(res.t) - 1} steps exceed the budget {spec.max_steps}")
    return Trajectory(
        x=res.t,
        y=res.y,
        sol=res.sol,
        x_events=list(res.t_events) if res.t_events is not None else [],
        y_events=list(res.y_events) if res.y_events is not None else [],
        nsteps=len(res.t) - 1,
        status=res.status,
    )


# ---------------------------------------------------------------------------
# scalar roots


def bisect(f: Callable[[float], float], bracket: Sequence[float], xtol: float = 1e-12,
           max_iter: int = 200) -> float:
    """Bisection to interval width ``xtol``; returns the midpoint."""
    a, b = float(bracket[0]), float(bracket[1])
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise NoSignChange(f"no sign change on [{a}, {b}]: f = ({fa}, {fb})")
    for _ in range(max_iter):
        if abs(b - a) <= xtol:
            break
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0:
            return m
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b, fb = m, fm
    return 0.5 * (a + b)


def cubic_roots(a3: float, a2: float, a1: float, a0: float) -> np.ndarray:
    """Real roots of a3 x³ + a2 x² + a1 x + a0 by the trigonometric/Cardano formula.

    Each root receives one Newton polish step.  Roots are returned sorted.
    """
    if a3 == 0:
        raise ValueError("leading coefficient must be nonzero")
    b, c, d = a2 / a3, a1 / a3, a0 / a3
    # depressed cubic t³ + p t + q with x = t − b/3
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    shift = -b / 3.0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    scale = max(1.0, abs(p), abs(q)) ** 2
    if abs(p) < 1e-300 and abs(q) < 1e-300:
        roots = [0.0, 0.0, 0.0]
    elif disc > 1e-14 * scale:
        s = math.sqrt(disc)
        u = np.cbrt(-q / 2.0 + s)
        v = np.cbrt(-q / 2.0 - s)
        roots = [u + v]
    elif disc < -1e-14 * scale:
        r = 2.0 * math.sqrt(-p / 3.0)
        phi = math.acos(max(-1.0, min(1.0, 3.0 * q / (p * r))))
        roots = [r * math.cos((phi - 2.0 * math.pi * k) / 3.0) for k in range(3)]
    else:
        u = np.cbrt(-q / 2.0)
        roots = [2.0 * u, -u, -u]
    out = []
    for t in roots:
        x = t + shift
        fx = ((a3 * x + a2) * x + a1) * x + a0
        dfx = (3 * a3 * x + 2 * a2) * x + a1
        if dfx != 0:
            xn = x - fx / dfx
            # near a double root f' ≈ 0 and the step can overshoot; keep it only if it helps
            if abs(((a3 * xn + a2) * xn + a1) * xn + a0) < abs(fx):
                x = xn
        out.append(x)
    return np.sort(np.array(out, dtype=float))


# ---------------------------------------------------------------------------
# frames


def orthonormalize(frame: np.ndarray):
    """QR factors with positive real diagonal in R.

    Works on a single (n, k) frame or a stack (..., n, k).
    """
    a = np.asarray(frame)
    q, r = np.linalg.qr(a)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    absd = np.abs(d)
    if np.any(absd <= 1e-300) or np.any(absd <= 1e-14 * np.max(absd, axis=-1, keepdims=True)):
        raise RankDeficient("frame columns are (numerically) dependent")
    phase = d / absd
    q = q * phase[..., None, :]
    r = r * np.conj(phase)[..., :, None]
    return q, r


@dataclass
class FramePropagation:
    frames: np.ndarray  # (..., n, k) orthonormal frames at the end point
    log_radius: np.ndarray  # (...) accumulated log det R (real)
    nsteps: int
    x_mesh: np.ndarray


_PADE13 = np.array([
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0, 10559470521600.0, 670442572800.0, 33522128640.0, 1323241920.0,
    40840800.0, 960960.0, 16380.0, 182.0, 1.0,
])
_THETA13 = 5.371920351148152


def expm_batch(A: np.ndarray) -> np.ndarray:
    """Matrix exponential of a stack (..., n, n) by Padé-13 scaling and squaring.

    Same algorithm as :func:`scipy.linalg.expm`, vectorized across the stack
    (scipy loops over stacked matrices one at a time).
    """
    A = np.asarray(A)
    n = A.shape[-1]
    norm = np.max(np.sum(np.abs(A), axis=-2), axis=-1)
    s = np.maximum(0, np.ceil(np.log2(np.maximum(norm, 1e-300) / _THETA13))).astype(int)
    A = A / (2.0 ** s)[..., None, None]
    eye = np.broadcast_to(np.eye(n), A.shape)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    b = _PADE13
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * eye)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * eye
    E = np.linalg.solve(V - U, V + U)
    for k in range(int(s.max()) if s.size else 0):
        E = np.where((s > k)[..., None, None], E @ E, E)
    return E


def _magnus_generator(A, x, h):
    """Fourth-order Magnus exponent over [x, x + h] (two Gauss points)."""
    s = math.sqrt(3.0) / 6.0
    A1 = A(x + (0.5 - s) * h)
    A2 = A(x + (0.5 + s) * h)
    return 0.5 * h * (A1 + A2) + (math.sqrt(3.0) / 12.0) * h * h * (A2 @ A1 - A1 @ A2)


def propagate_frames(A: Callable[[float], np.ndarray], frames: np.ndarray, x0: float, x1: float,
                     tol: float = 1e-8, h0: Optional[float] = None, h_max: float = 1.0,
                     max_steps: int = 200_000) -> FramePropagation:
    """Evolve a stack of frames under W' = A(x) W from x0 to x1 (either direction).

    ``A(x)`` returns a stack (..., n, n) matching ``frames`` (..., n, k).
    Each step applies a fourth-order Magnus exponential, then re-orthonormalizes
    the frame and adds log det R to the radial accumulator.  Steps are chosen
    by step doubling: the full step and two half steps must agree, after
    normalizing by the half-step R factor, to ``tol`` for every frame of the
    stack.
    """
    direction = 1.0 if x1 >= x0 else -1.0
    span = abs(x1 - x0)
    q, r = orthonormalize(frames)
    logr = np.sum(np.log(np.real(np.diagonal(r, axis1=-2, axis2=-1))), axis=-1)
    x = x0
    h = min(h0 if h0 is not None else 0.05, h_max, span) if span > 0 else 0.0
    mesh = [x0]
    steps = 0
    while direction * (x1 - x) > 1e-14 * max(1.0, span):
        h = min(h, abs(x1 - x))
        hs = direction * h
        E_full = expm_batch(_magnus_generator(A, x, hs))
        E_a = expm_batch(_magnus_generator(A, x, hs / 2))
        E_b = expm_batch(_magnus_generator(A, x + hs / 2, hs / 2))
        y_full = E_full @ q
        y_half = E_b @ (E_a @ q)
        qh, rh = orthonormalize(y_half)
        # error of the full step measured in the half-step's own frame
        diff = np.linalg.solve(np.swapaxes(rh, -1, -2), np.swapaxes(y_full - y_half, -1, -2))
        err = float(np.max(np.abs(diff))) if diff.size else 0.0
        if not np.isfinite(err):
            err = np.inf
        if err <= tol:
            x = x + hs
            q = qh
            logr = logr + np.sum(np.log(np.real(np.diagonal(rh, axis1=-2, axis2=-1))), axis=-1)
            mesh.append(x)
            steps += 1
            fac = 2.0 if err == 0 else min(2.0, 0.9 * (tol / err) ** 0.2)
            h = min(h * max(fac, 1.0), h_max)
        else:
            fac = 0.9 * (tol / err) ** 0.2 if np.isfinite(err) else 0.1
            h = h * max(0.1, min(fac, 0.5))
            if h < 1e-12 * max(1.0, span):
                raise StepSizeUnderflow(f"frame propagation step collapsed near x = {x}")
        if steps > max_steps:
            raise MaxStepsExceeded(f"frame propagation exceeded {max_steps} steps")
    return FramePropagation(frames=q, log_radius=logr, nsteps=steps, x_mesh=np.array(mesh))


def propagate_frames_stiff(A: Callable[[float], np.ndarray], frames: np.ndarray, x0: float, x1: float,
                           shift: Optional[np.ndarray] = None, rtol: float = 1e-8, atol: float = 1e-10,
                           drift_tol: float = 1e-6, max_steps: int = 200_000) -> FramePropagation:
    """Polar evolution of a stack of frames with an implicit (BDF) integrator.

    Integrates Ω' = (I − ΩΩ*) A Ω together with ρ' = tr(Ω* A Ω) − shift.
    W = Ω α with det α = exp ρ solves W' = A W for any Ω, and the
    orthonormal frames attract nearby ones, so the flow stays well conditioned
    when the frame mixes modes of very different growth rates, where a single
    exponential step would lose the slow directions.  Real and imaginary parts
    are integrated separately because Ω* is not holomorphic.  The returned
    ``log_radius`` includes shift·(x1 − x0), so it matches
    :func:`propagate_frames`.
    """
    from scipy.sparse import block_diag

    q, r = orthonormalize(frames)
    shape = q.shape  # (N, n, k)
    N, n, k = shape
    rho0 = np.sum(np.log(np.real(np.diagonal(r, axis1=-2, axis2=-1))), axis=-1).astype(complex)
    shift = np.zeros(N, dtype=complex) if shift is None else np.broadcast_to(np.asarray(shift, complex), (N,))
    m = n * k + 1

    def pack(Q, rho):
        z = np.concatenate([Q.reshape(N, n * k), rho[:, None]], axis=1)
        return np.concatenate([z.real, z.imag], axis=1).ravel()

    def unpack(y):
        y = y.reshape(N, 2 * m)
        z = y[:, :m] + 1j * y[:, m:]
        return z[:, :-1].reshape(N, n, k), z[:, -1]

    calls = [0]

    def rhs(x, y):
        calls[0] += 1
        if calls[0] > 10 * max_steps:
            raise MaxStepsExceeded(f"polar frame integration exceeded {10 * max_steps} evaluations")
        Q, _ = unpack(y)
        AQ = A(x) @ Q
        M = np.conj(np.swapaxes(Q, -1, -2)) @ AQ
        dQ = AQ - Q @ M
        drho = np.trace(M, axis1=-2, axis2=-1) - shift
        return pack(dQ, drho)

    eye_n, eye_k = np.eye(n), np.eye(k)

    def jac(x, y):
        # derivatives of F(Ω) = AΩ − Ω Ω*AΩ along δ = E_ab and δ = i E_ab
        Q, _ = unpack(y)
        Ax = A(x)
        AQ = Ax @ Q
        QhA = np.conj(np.swapaxes(Q, -1, -2)) @ Ax
        M = QhA @ Q
        T1 = np.einsum("Nca,db->Ncdab", Ax, eye_k)
        T2 = np.einsum("ca,Nbd->Ncdab", eye_n, M)
        T3 = np.einsum("Ncb,Nad->Ncdab", Q, AQ)
        T4 = np.einsum("Nca,db->Ncdab", Q @ QhA, eye_k)
        JR = (T1 - T2 - T3 - T4).reshape(N, n * k, n * k)
        JI = (1j * (T1 - T2 + T3 - T4)).reshape(N, n * k, n * k)
        tR = (AQ + np.swapaxes(QhA, -1, -2)).reshape(N, n * k)
        tI = (1j * (np.swapaxes(QhA, -1, -2) - AQ)).reshape(N, n * k)
        blocks = []
        for j in range(N):
            B = np.zeros((2 * m, 2 * m))
            cR = np.vstack([JR[j], tR[j][None]])
            cI = np.vstack([JI[j], tI[j][None]])
            B[:m, : m - 1], B[m:, : m - 1] = cR.real, cR.imag
            B[:m, m: 2 * m - 1], B[m:, m: 2 * m - 1] = cI.real, cI.imag
            blocks.append(B)
        return block_diag(blocks, format="csc")

    res = solve_ivp(rhs, (x0, x1), pack(q, np.zeros(N, complex)), method="BDF", rtol=rtol, atol=atol,
                    jac=jac)
    if res.status == -1:
        raise StepSizeUnderflow(res.message)
    if len(res.t) - 1 > max_steps:
        raise MaxStepsExceeded(f"{len(res.t) - 1} steps exceed the budget {max_steps}")
    Q, rho = unpack(res.y[:, -1])
    gram = np.conj(np.swapaxes(Q, -1, -2)) @ Q
    drift = float(np.max(np.abs(gram - np.eye(k)))) if gram.size else 0.0
    if drift > drift_tol:
        raise FrameDegeneracy(f"frame orthonormality drifted by {drift:.2e}")
    # fold the residual non-orthonormality into the radius (exact)
    Q, r = orthonormalize(Q)
    rho = rho + np.sum(np.log(np.real(np.diagonal(r, axis1=-2, axis2=-1))), axis=-1)
    log_radius = rho0 + rho + shift * (x1 - x0)
    return FramePropagation(frames=Q, log_radius=log_radius, nsteps=len(res.t) - 1, x_mesh=res.t)


# ---------------------------------------------------------------------------
# high-frequency fit


@dataclass(frozen=True)
class HFFit:
    C1: complex
    C2: complex
    error: float


def _continuous_log(values: np.ndarray, order: np.ndarray) -> np.ndarray:
    """Logarithm made continuous along the given ordering of the samples."""
    logs = np.log(values.astype(complex))
    ordered = logs[order]
    im = np.unwrap(np.imag(ordered))
    out = np.empty_like(logs)
    out[order] = np.real(ordered) + 1j * im
    return out


def fit_hf(lams, values, radius: Optional[float] = None, log_scale=None) -> HFFit:
    """Least-squares fit of log D ≈ log C1 + C2 √λ, where D = values · exp(log_scale).

    ``log_scale`` (default 0) carries factors too large or too small for
    floating point, such as an accumulated polar radius; it must vary
    continuously with λ.  The logarithm of ``values`` is taken on the
    principal branch at the sample closest to the positive real axis and
    continued along increasing argument.  The error is the larger relative
    error |D − C1 e^{C2√λ}|/|D| at λ = R and λ = iR, where R is ``radius``
    (default: the largest |λ| sampled).  ``lams`` must contain both points.
    """
    lams = np.asarray(lams, dtype=complex)
    vals = np.asarray(values, dtype=complex)
    if len(np.unique(np.round(lams, 14))) <= 2:
        raise DegenerateFit("need more than two distinct λ samples")
    if np.any(vals == 0):
        raise DegenerateFit("Evans values must be nonzero")
    order = np.argsort(np.angle(lams))
    logs = _continuous_log(vals, order)
    # pin the branch so that the sample nearest the positive real axis is principal
    anchor = int(np.argmin(np.abs(np.angle(lams))))
    logs = logs - 2j * np.pi * np.round((np.imag(logs[anchor]) - np.angle(vals[anchor])) / (2 * np.pi))
    if log_scale is not None:
        logs = logs + np.asarray(log_scale, dtype=complex)
    X = np.column_stack([np.ones_like(lams), np.sqrt(lams)])
    coef, *_ = np.linalg.lstsq(X, logs, rcond=None)
    C1 = np.exp(coef[0])
    C2 = coef[1]
    R = float(radius) if radius is not None else float(np.max(np.abs(lams)))
    errs = []
    for target in (R, 1j * R):
        k = int(np.argmin(np.abs(lams - target)))
        if abs(lams[k] - target) > 1e-9 * R:
            raise DegenerateFit(f"samples must include λ = {target}")
        # |D − fit| / |D| computed in log form so that extreme scales do not overflow
        errs.append(abs(1.0 - np.exp(coef[0] + C2 * np.sqrt(lams[k]) - logs[k])))
    return HFFit(C1=complex(C1), C2=complex(C2), error=float(max(errs)))
