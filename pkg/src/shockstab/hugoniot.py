"""Rankine–Hugoniot curves for 1-shocks in Lagrangian gas dynamics.

Jumps are [h] = h₊ − h₋ and the left state moves with v₋ = 0.  The
Hugoniot residual relative to a reference state is

    H(τ, S) = [e] + ½ (p + p_ref) [τ].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .eos import EquationOfState, ThermoState, thermo_eval
from .exceptions import BracketFailure, DegenerateShock, NoSignChange
from .numerics import bisect, cubic_roots

__all__ = [
    "ShockTriple",
    "HugoniotSample",
    "HugoniotCurve",
    "hugoniot_residual",
    "shock_from_states",
    "trace_backward",
    "trace_forward",
    "local_cubic_solve",
    "stable_closed_form_entropy",
]


@dataclass(frozen=True)
class ShockTriple:
    minus: ThermoState
    plus: ThermoState
    sigma: float

    @property
    def jump_tau(self):
        return self.plus.tau - self.minus.tau

    @property
    def jump_p(self):
        return self.plus.p - self.minus.p

    @property
    def jump_e(self):
        return self.plus.e - self.minus.e

    @property
    def jump_S(self):
        return self.plus.S - self.minus.S

    @property
    def jump_v(self):
        return -self.sigma * self.jump_tau

    @property
    def v_plus(self):
        return self.jump_v  # v₋ = 0

    @property
    def lax_ok(self) -> bool:
        s2 = self.sigma**2
        return bool(self.sigma < 0 and self.minus.c2 < s2 < self.plus.c2)


def hugoniot_residual(model: EquationOfState, ref: ThermoState, tau, S):
    """H = [e] + ½(p + p_ref)[τ] for the state (τ, S) against ``ref``."""
    b = model.bundle(tau, S)
    return (b.e - ref.e) + 0.5 * (-b.e_t + ref.p) * (tau - ref.tau)


def shock_from_states(model: EquationOfState, minus, plus) -> ShockTriple:
    """Build the 1-shock (σ < 0) joining two states; states may be (τ, S) pairs."""
    um = minus if isinstance(minus, ThermoState) else thermo_eval(model, *minus)
    up = plus if isinstance(plus, ThermoState) else thermo_eval(model, *plus)
    jt = up.tau - um.tau
    jp = up.p - um.p
    if jt == 0 or not (jp * jt < 0):
        raise DegenerateShock(f"no real shock speed: [τ] = {jt}, [p] = {jp}")
    return ShockTriple(um, up, -math.sqrt(-jp / jt))


@dataclass(frozen=True)
class HugoniotSample:
    S: float
    tau: float
    state: ThermoState
    shock: Optional[ShockTriple]
    residual: float


@dataclass
class HugoniotCurve:
    anchor: ThermoState
    direction: str
    samples: list = field(default_factory=list)

    @property
    def S(self):
        return np.array([s.S for s in self.samples])

    @property
    def tau(self):
        return np.array([s.tau for s in self.samples])

    @property
    def shocks(self):
        return [s.shock for s in self.samples if s.shock is not None]

    def column(self, name):
        get = {
            "p": lambda s: s.state.p,
            "e": lambda s: s.state.e,
            "T": lambda s: s.state.T,
            "v": lambda s: self._velocity(s),
            "sigma": lambda s: s.shock.sigma if s.shock else np.nan,
        }[name]
        return np.array([get(s) for s in self.samples])

    def _velocity(self, s):
        # velocity of the curve state when the anchor is at rest
        if s.shock is None:
            return 0.0
        return s.shock.sigma * s.shock.jump_tau if self.direction == "backward" else s.shock.v_plus

    def monotone_flags(self) -> dict:
        """Strict monotonicity of τ, p, v and σ² along the samples (in grid order)."""
        def mono(a):
            d = np.diff(a)
            if len(d) == 0:
                return "constant"
            if np.all(d > 0):
                return "increasing"
            if np.all(d < 0):
                return "decreasing"
            return "nonmonotone"

        shocked = [s for s in self.samples if s.shock is not None]
        sig2 = np.array([s.shock.sigma**2 for s in shocked])
        return {
            "tau": mono(self.tau),
            "p": mono(self.column("p")),
            "v": mono(self.column("v")),
            "sigma2": mono(sig2),
        }

    def lax_flags(self):
        return np.array([s.shock.lax_ok if s.shock else True for s in self.samples])

    def rows(self):
        flags = self.monotone_flags()
        header = ["S", "tau", "p", "v", "e", "T", "sigma", "lax_ok",
                  "tau_monotone", "p_monotone", "v_monotone", "sigma2_monotone"]
        out = []
        for s in self.samples:
            out.append([s.S, s.tau, s.state.p, self._velocity(s), s.state.e, s.state.T,
                        s.shock.sigma if s.shock else float("nan"),
                        int(s.shock.lax_ok) if s.shock else 1,
                        flags["tau"], flags["p"], flags["v"], flags["sigma2"]])
        return header, out


def _solve_tau(model, ref, S, lo, hi, tol):
    def H(t):
        return float(hugoniot_residual(model, ref, t, S))

    return bisect(H, (lo, hi), xtol=tol, max_iter=200)


def _backward_root(model, anchor: ThermoState, S: float) -> float:
    def H(t):
        return float(hugoniot_residual(model, anchor, t, S))

    lo = anchor.tau
    if anchor.p > 0 and anchor.e > 0:
        hi = 2 * anchor.e / anchor.p + anchor.tau
        if not H(hi) > 0:
            # the bound assumes positive energy and pressure; fall back to growth
            hi = None
    else:
        hi = None
    if hi is None:
        hi = 2 * anchor.tau
        while H(hi) <= 0:
            lo, hi = hi, 2 * hi
            if hi > 1e6:
                raise BracketFailure(f"no sign change of H on [{anchor.tau}, 1e6] at S = {S}")
    tol = 1e-12 * max(1.0, hi)
    try:
        return _solve_tau(model, anchor, S, lo, hi, tol)
    except NoSignChange as exc:
        raise BracketFailure(f"S = {S}: {exc}") from None


def trace_backward(model: EquationOfState, anchor, S_grid: Sequence[float]) -> HugoniotCurve:
    """States U₋ = (τ, S) joined to the fixed right state ``anchor`` by a 1-shock.

    ``S_grid`` must be strictly decreasing and start at or below S₊.
    """
    up = anchor if isinstance(anchor, ThermoState) else thermo_eval(model, *anchor)
    S_grid = np.asarray(S_grid, dtype=float)
    if len(S_grid) > 1 and not np.all(np.diff(S_grid) < 0):
        raise ValueError("S grid must be strictly decreasing")
    curve = HugoniotCurve(anchor=up, direction="backward")
    for S in S_grid:
        if S == up.S:
            curve.samples.append(HugoniotSample(S, up.tau, up, None, 0.0))
            continue
        if S > up.S:
            raise ValueError("backward grid must lie below the anchor entropy")
        tau = _backward_root(model, up, S)
        st = thermo_eval(model, tau, S)
        res = float(hugoniot_residual(model, up, tau, S))
        curve.samples.append(HugoniotSample(S, tau, st, shock_from_states(model, st, up), res))
    return curve


def trace_forward(model: EquationOfState, anchor, S_grid: Sequence[float]) -> HugoniotCurve:
    """States U₊ = (τ, S) reached from the fixed left state ``anchor`` by a 1-shock.

    ``S_grid`` must be strictly increasing from S₋.  The root is sought in
    τ ∈ (0, τ₋) where [τ] < 0.
    """
    um = anchor if isinstance(anchor, ThermoState) else thermo_eval(model, *anchor)
    S_grid = np.asarray(S_grid, dtype=float)
    if len(S_grid) > 1 and not np.all(np.diff(S_grid) > 0):
        raise ValueError("S grid must be strictly increasing")
    curve = HugoniotCurve(anchor=um, direction="forward")
    if len(S_grid) == 0:
        curve.samples.append(HugoniotSample(um.S, um.tau, um, None, 0.0))
        return curve
    for S in S_grid:
        if S == um.S:
            curve.samples.append(HugoniotSample(S, um.tau, um, None, 0.0))
            continue
        if S < um.S:
            raise ValueError("forward grid must lie above the anchor entropy")

        def H(t, S=S):
            return float(hugoniot_residual(model, um, t, S))

        hi = um.tau
        lo = um.tau / 2
        while H(lo) >= 0:
            hi, lo = lo, lo / 2
            if lo < 1e-12:
                raise BracketFailure(f"no compressive root below τ₋ at S = {S}")
        tau = bisect(H, (lo, hi), xtol=1e-12 * um.tau)
        st = thermo_eval(model, tau, S)
        curve.samples.append(HugoniotSample(S, tau, st, shock_from_states(model, um, st), H(tau)))
    return curve


def local_cubic_solve(S: float) -> float:
    """τ on the backward curve of the canonical local model through (1, 0).

    Largest real root of τ³ + 3e^S τ + (2S − 3)τ² − e^S = 0.
    """
    eS = math.exp(S)
    roots = cubic_roots(1.0, 2 * S - 3, 3 * eS, -eS)
    return float(roots[-1])


def stable_closed_form_entropy(tau: float, tau_plus: float, S_plus: float) -> float:
    """Entropy on the stable-model Hugoniot through (τ₊, S₊) as a function of τ."""
    return S_plus + math.log((3 * tau_plus - tau) / (3 * tau - tau_plus) * tau**2 / tau_plus**2)
