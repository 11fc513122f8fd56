"""Equations of state in energy form e = ē(τ, S).

Every model returns ē together with the partial derivatives needed by the
rest of the package: ē_τ, ē_S, ē_ττ, ē_τS, ē_SS and ē_τττ.  Built-in models
carry hand-differentiated closed forms; :class:`CustomModel` wraps an
arbitrary energy function and differentiates it numerically.

All evaluators accept numpy arrays and broadcast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .exceptions import DomainError, InversionFailure, NonHyperbolic

__all__ = [
    "EnergyBundle",
    "EquationOfState",
    "GlobalModel",
    "LocalModel",
    "StableModel",
    "PolytropicModel",
    "CustomModel",
    "ThermoState",
    "PressureLawPoint",
    "HelmholtzPoint",
    "ConditionReport",
    "thermo_eval",
    "pressure_law",
    "helmholtz_point",
    "helmholtz_laws",
    "check_structural",
    "local_condition_residuals",
    "exactness_check",
    "alt_exactness_check",
    "make_model",
    "invert_energy",
    "invert_temperature",
]


class EnergyBundle(NamedTuple):
    e: np.ndarray
    e_t: np.ndarray
    e_s: np.ndarray
    e_tt: np.ndarray
    e_ts: np.ndarray
    e_ss: np.ndarray
    e_ttt: np.ndarray


class EquationOfState:
    """Base class.  Subclasses implement :meth:`bundle`."""

    kind = "abstract"
    # multiplier applied to the +-40 entropy sentinels of the asymptotic audit
    entropy_scale = 1.0

    def bundle(self, tau, S) -> EnergyBundle:
        raise NotImplementedError

    def energy(self, tau, S):
        return self.bundle(tau, S).e

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params()}


def _as_arrays(tau, S):
    tau = np.asarray(tau, dtype=float)
    S = np.asarray(S, dtype=float)
    if np.any(tau <= 0):
        raise DomainError("specific volume must be positive")
    return tau, S


@dataclass(frozen=True)
class GlobalModel(EquationOfState):
    """ē = e^S/τ + C² exp(S/C² − τ/C)."""

    C: float = 10.0
    kind = "global"

    def __post_init__(self):
        if not self.C > 0:
            raise DomainError("GlobalModel requires C > 0")

    @property
    def entropy_scale(self):
        return self.C**2

    def params(self):
        return {"C": self.C}

    def bundle(self, tau, S):
        tau, S = _as_arrays(tau, S)
        C = self.C
        with np.errstate(over="ignore"):
            a = np.exp(S) / tau
            g = np.exp(S / C**2 - tau / C)
        return EnergyBundle(
            e=a + C**2 * g,
            e_t=-a / tau - C * g,
            e_s=a + g,
            e_tt=2 * a / tau**2 + g,
            e_ts=-a / tau - g / C,
            e_ss=a + g / C**2,
            e_ttt=-6 * a / tau**3 - g / C,
        )


@dataclass(frozen=True)
class LocalModel(EquationOfState):
    """ē = e^S/τ + S − shift·τ + τ²/2; shift = 0 is the canonical form.

    The shift only moves the pressure by a constant and leaves the gas flow
    unchanged.
    """

    shift: float = 0.0
    kind = "local"

    def params(self):
        return {"shift": self.shift}

    def bundle(self, tau, S):
        tau, S = _as_arrays(tau, S)
        with np.errstate(over="ignore"):
            a = np.exp(S) / tau
        return EnergyBundle(
            e=a + S - self.shift * tau + tau**2 / 2,
            e_t=-a / tau - self.shift + tau,
            e_s=a + 1.0,
            e_tt=2 * a / tau**2 + 1.0,
            e_ts=-a / tau,
            e_ss=a,
            e_ttt=-6 * a / tau**3,
        )


@dataclass(frozen=True)
class StableModel(EquationOfState):
    """ē = e^S/τ − shift·τ + τ²/2."""

    shift: float = 0.0
    kind = "stable"

    def params(self):
        return {"shift": self.shift}

    def bundle(self, tau, S):
        tau, S = _as_arrays(tau, S)
        with np.errstate(over="ignore"):
            a = np.exp(S) / tau
        return EnergyBundle(
            e=a - self.shift * tau + tau**2 / 2,
            e_t=-a / tau - self.shift + tau,
            e_s=a,
            e_tt=2 * a / tau**2 + 1.0,
            e_ts=-a / tau,
            e_ss=a,
            e_ttt=-6 * a / tau**3,
        )


@dataclass(frozen=True)
class PolytropicModel(EquationOfState):
    """ē = exp(S/c_v) / τ^Γ."""

    gamma: float = 0.4
    cv: float = 1.0
    kind = "polytropic"

    def __post_init__(self):
        if not (self.gamma > 0 and self.cv > 0):
            raise DomainError("PolytropicModel requires gamma > 0 and cv > 0")

    def params(self):
        return {"gamma": self.gamma, "cv": self.cv}

    def bundle(self, tau, S):
        tau, S = _as_arrays(tau, S)
        G, cv = self.gamma, self.cv
        with np.errstate(over="ignore"):
            e = np.exp(S / cv) / tau**G
        return EnergyBundle(
            e=e,
            e_t=-G * e / tau,
            e_s=e / cv,
            e_tt=G * (G + 1) * e / tau**2,
            e_ts=-G * e / (cv * tau),
            e_ss=e / cv**2,
            e_ttt=-G * (G + 1) * (G + 2) * e / tau**3,
        )


def _richardson(d, h):
    # one Richardson step for a second-order-accurate difference quotient d(h)
    return (4.0 * d(h / 2) - d(h)) / 3.0


@dataclass(frozen=True)
class CustomModel(EquationOfState):
    """User-supplied ē(τ, S); partials by Richardson-extrapolated differences."""

    energy_fn: Callable = field(compare=False)
    step: float = 1e-3
    name: str = "custom"
    kind = "custom"

    def params(self):
        return {"name": self.name, "step": self.step}

    def bundle(self, tau, S):
        tau, S = _as_arrays(tau, S)
        f = self.energy_fn
        ht = self.step * tau
        hs = self.step * np.maximum(1.0, np.abs(S))

        def d_t(h):
            return (f(tau + h, S) - f(tau - h, S)) / (2 * h)

        def d_s(h):
            return (f(tau, S + h) - f(tau, S - h)) / (2 * h)

        def d_tt(h):
            return (f(tau + h, S) - 2 * f(tau, S) + f(tau - h, S)) / h**2

        def d_ss(h):
            return (f(tau, S + h) - 2 * f(tau, S) + f(tau, S - h)) / h**2

        def d_ttt(h):
            return (f(tau + 2 * h, S) - 2 * f(tau + h, S) + 2 * f(tau - h, S) - f(tau - 2 * h, S)) / (2 * h**3)

        def d_ts(r):
            a, b = ht * r, hs * r
            return (f(tau + a, S + b) - f(tau + a, S - b) - f(tau - a, S + b) + f(tau - a, S - b)) / (4 * a * b)

        return EnergyBundle(
            e=np.asarray(f(tau, S), dtype=float),
            e_t=_richardson(d_t, ht),
            e_s=_richardson(d_s, hs),
            e_tt=_richardson(d_tt, ht),
            e_ts=_richardson(d_ts, 1.0),
            e_ss=_richardson(d_ss, hs),
            e_ttt=_richardson(d_ttt, 10 * ht),
        )


def make_model(kind: str, **params) -> EquationOfState:
    """Build a model from its kind name and keyword parameters."""
    table = {
        "global": GlobalModel,
        "local": LocalModel,
        "stable": StableModel,
        "polytropic": PolytropicModel,
    }
    try:
        cls = table[kind]
    except KeyError:
        raise DomainError(f"unknown model kind {kind!r}; choose from {sorted(table)}") from None
    return cls(**params)


@dataclass(frozen=True)
class ThermoState:
    tau: float
    S: float
    e: float
    p: float
    T: float
    c: float
    p_tau: float
    p_S: float
    p_tautau: float
    e_SS: float
    e_tauS: float

    @property
    def c2(self):
        return -self.p_tau


def thermo_eval(model: EquationOfState, tau: float, S: float) -> ThermoState:
    """Thermodynamic state and derivative bundle at (τ, S)."""
    if not tau > 0:
        raise DomainError(f"specific volume must be positive, got {tau}")
    b = model.bundle(tau, S)
    if not float(b.e_tt) > 0:
        raise NonHyperbolic(f"ē_ττ = {float(b.e_tt):.3e} ≤ 0 at (τ, S) = ({tau}, {S})")
    return ThermoState(
        tau=float(tau),
        S=float(S),
        e=float(b.e),
        p=float(-b.e_t),
        T=float(b.e_s),
        c=math.sqrt(float(b.e_tt)),
        p_tau=float(-b.e_tt),
        p_S=float(-b.e_ts),
        p_tautau=float(-b.e_ttt),
        e_SS=float(b.e_ss),
        e_tauS=float(b.e_ts),
    )


# ---------------------------------------------------------------------------
# (τ, e) view


@dataclass(frozen=True)
class PressureLawPoint:
    tau: float
    e: float
    S: float
    p: float
    p_tau: float
    p_e: float
    T: float
    T_tau: float
    T_e: float
    c2: float


def _solve_increasing(value, slope, target, tol=1e-12, max_iter=200, what="entropy"):
    """Root of value(S) = target for increasing value; Newton guarded by bisection."""
    lo, hi = -1.0, 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        while value(lo) > target:
            lo *= 2
            if lo < -1e7:
                raise InversionFailure(f"no {what} below the target {target}")
        while value(hi) < target:
            hi *= 2
            if hi > 1e7:
                raise InversionFailure(f"no {what} above the target {target}")
    S = 0.5 * (lo + hi)
    for _ in range(max_iter):
        r = value(S) - target
        if r > 0:
            hi = S
        else:
            lo = S
        d = slope(S)
        S_new = S - r / d if (d > 0 and np.isfinite(d)) else 0.5 * (lo + hi)
        if not (lo <= S_new <= hi):
            S_new = 0.5 * (lo + hi)
        if abs(S_new - S) <= tol * max(1.0, abs(S)):
            return S_new
        S = S_new
    raise InversionFailure(f"{what} inversion did not converge for target {target}")


def invert_energy(model: EquationOfState, tau: float, e: float, tol: float = 1e-12) -> float:
    """Entropy S with ē(τ, S) = e."""
    return _solve_increasing(lambda S: float(model.bundle(tau, S).e),
                             lambda S: float(model.bundle(tau, S).e_s), e, tol)


def invert_temperature(model: EquationOfState, tau: float, T: float, tol: float = 1e-12) -> float:
    """Entropy S with ē_S(τ, S) = T (needs ē_SS > 0)."""
    return _solve_increasing(lambda S: float(model.bundle(tau, S).e_s),
                             lambda S: float(model.bundle(tau, S).e_ss), T, tol, what="temperature")


def pressure_law(model: EquationOfState, tau: float, e: float) -> PressureLawPoint:
    """p̂(τ, e) and its partials through the change of variables e ↔ S."""
    if not tau > 0:
        raise DomainError(f"specific volume must be positive, got {tau}")
    S = invert_energy(model, tau, e)
    b = model.bundle(tau, S)
    e_t, e_s, e_tt, e_ts, e_ss = (float(x) for x in (b.e_t, b.e_s, b.e_tt, b.e_ts, b.e_ss))
    if not e_s > 0:
        raise InversionFailure(f"temperature {e_s} not positive at the inverted state")
    p = -e_t
    p_e = -e_ts / e_s
    p_tau = -e_tt + e_ts * e_t / e_s
    T_e = e_ss / e_s
    T_tau = e_ts + e_ss * p / e_s
    return PressureLawPoint(tau=float(tau), e=float(e), S=S, p=p, p_tau=p_tau, p_e=p_e,
                            T=e_s, T_tau=T_tau, T_e=T_e, c2=e_tt)


# ---------------------------------------------------------------------------
# (τ, T) view used by the Navier–Stokes coefficients


@dataclass(frozen=True)
class HelmholtzPoint:
    """Partials of p̌(τ, T) and ě(τ, T) at a state given in (τ, S)."""

    p: float
    e: float
    T: float
    p_tau: float
    p_T: float
    e_tau: float
    e_T: float


def helmholtz_point(model: EquationOfState, tau, S) -> HelmholtzPoint:
    b = model.bundle(tau, S)
    S_tau = -b.e_ts / b.e_ss
    return HelmholtzPoint(
        p=-b.e_t,
        e=b.e,
        T=b.e_s,
        p_tau=-b.e_tt - b.e_ts * S_tau,
        p_T=-b.e_ts / b.e_ss,
        e_tau=b.e_t + b.e_s * S_tau,
        e_T=b.e_s / b.e_ss,
    )


def helmholtz_laws(model: EquationOfState):
    """Return callables (ẽ(τ, T), p̃(τ, T)) obtained by inverting T = ē_S in S."""

    def e_one(t, T):
        return float(model.bundle(t, invert_temperature(model, t, T)).e)

    def p_one(t, T):
        return float(-model.bundle(t, invert_temperature(model, t, T)).e_t)

    return np.vectorize(e_one), np.vectorize(p_one)


def _central(f, x, h):
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def exactness_check(e_fn, p_fn, taus, Ts, step: float = 1e-4):
    """Residual T p̃_T − ẽ_τ − p̃ on the grid taus × Ts.

    Zero (to differencing accuracy) exactly when the pair comes from one
    complete equation of state.
    """
    tt, TT = np.meshgrid(np.asarray(taus, float), np.asarray(Ts, float), indexing="ij")
    p_T = _central(lambda T: p_fn(tt, T), TT, step * TT)
    e_tau = _central(lambda t: e_fn(t, TT), tt, step * tt)
    return TT * p_T - e_tau - p_fn(tt, TT)


def alt_exactness_check(p_fn, T_fn, taus, es, step: float = 1e-4):
    """Residual T p̂_e − p T̂_e + T̂_τ for laws given in (τ, e)."""
    tt, ee = np.meshgrid(np.asarray(taus, float), np.asarray(es, float), indexing="ij")
    he = step * np.maximum(1.0, np.abs(ee))
    p_e = _central(lambda e: p_fn(tt, e), ee, he)
    T_e = _central(lambda e: T_fn(tt, e), ee, he)
    T_tau = _central(lambda t: T_fn(t, ee), tt, step * tt)
    return T_fn(tt, ee) * p_e - p_fn(tt, ee) * T_e + T_tau


# ---------------------------------------------------------------------------
# condition audits


@dataclass
class ConditionReport:
    """Residuals per named condition; a condition holds where its residual < 0."""

    points: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    audit: dict = field(default_factory=dict)

    def holds(self, name):
        r = np.asarray(self.residuals[name], dtype=float)
        with np.errstate(invalid="ignore"):
            return r < 0

    def all_hold(self, name) -> bool:
        return bool(np.all(self.holds(name)))

    def booleans(self) -> dict:
        return {k: self.holds(k) for k in self.residuals}

    def summary(self) -> dict:
        out = {k: self.all_hold(k) for k in self.residuals}
        out.update(self.audit)
        return out

    def to_rows(self):
        names = list(self.points) + list(self.residuals)
        cols = [np.ravel(v) for v in self.points.values()] + [np.ravel(v) for v in self.residuals.values()]
        n = max(len(c) for c in cols)
        cols = [np.broadcast_to(c, (n,)) if len(c) == 1 else c for c in cols]
        return names, list(zip(*cols))


STRUCTURAL = ("G1", "G2", "G3", "G4", "G5", "G6")
WEYL_FAMILY = ("J1", "J2", "J3", "J4")
LOCAL_LADDER = ("Strong", "Medium_U", "Medium_S", "Weak")


def structural_residuals(b: EnergyBundle) -> dict:
    p = -b.e_t
    with np.errstate(divide="ignore", invalid="ignore"):
        p_e = -b.e_ts / b.e_s
    return {
        "G1": -b.e,
        "G2": -p,
        "G3": -b.e_s,
        "G4": -b.e_tt,
        "G5": b.e_ttt,
        "G6": b.e_ts,
        # (τ, e) form; the isentropic derivatives of p̂ are p_τ and p_ττ
        "J1": -p,
        "J2": -b.e_tt,
        "J3": b.e_ttt,
        "J4": -p_e,
    }


def local_condition_residuals(b: EnergyBundle) -> dict:
    """Pointwise Weak / Medium_U / Medium_S / Strong residuals in p̂ form.

    Medium_U and Medium_S need e > 0; elsewhere the residual is NaN and the
    condition counts as failing.
    """
    p = -b.e_t
    with np.errstate(divide="ignore", invalid="ignore"):
        p_e = -b.e_ts / b.e_s
        p_tau = -b.e_tt + b.e_ts * b.e_t / b.e_s
        c = np.sqrt(b.e_tt)
        e = np.where(b.e > 0, b.e, np.nan)
        return {
            "Strong": p_tau,
            "Medium_U": p_tau - p**2 / (2 * e),
            "Medium_S": p_tau - c * p / np.sqrt(2 * e),
            "Weak": p_tau - p * p_e / 2,
        }


def check_structural(model: EquationOfState, tau_range=(0.5, 20.0), S_range=(-30.0, 2.0),
                     n_tau: int = 60, n_S: int = 60) -> ConditionReport:
    """Audit (G1)–(G6), (J1)–(J4) and the local ladder on a rectangular grid.

    The asymptotic conditions (H1), (H2) and (H4) are audited at sentinel
    entropies ±40 (times ``model.entropy_scale``); (H4) asks that e decay
    monotonically along τ = 1e8, 1e10, 1e12 to below 1e-3 of its value at τ = 1.
    """
    if n_tau < 1 or n_S < 1:
        raise DomainError("grid must be nonempty")
    taus = np.geomspace(*tau_range, n_tau) if tau_range[0] > 0 else None
    if taus is None:
        raise DomainError("tau range must lie in τ > 0")
    Ss = np.linspace(*S_range, n_S)
    tt, ss = np.meshgrid(taus, Ss, indexing="ij")
    b = model.bundle(tt, ss)
    res = structural_residuals(b)
    res.update(local_condition_residuals(b))

    s = model.entropy_scale * 40.0
    with np.errstate(over="ignore", invalid="ignore"):
        lo = model.bundle(taus, np.full_like(taus, -s))
        hi = model.bundle(taus, np.full_like(taus, s))
        ref = model.bundle(taus, np.zeros_like(taus))
        scale_e = np.maximum(1.0, np.abs(ref.e))
        scale_p = np.maximum(1.0, np.abs(ref.e_t))
        h1 = bool(np.all(np.abs(lo.e) <= 1e-8 * scale_e) and np.all(hi.e >= 1e8 * scale_e))
        h2 = bool(np.all(np.abs(lo.e_t) <= 1e-8 * scale_p) and np.all(-hi.e_t >= 1e8 * scale_p))
        far = np.array([model.bundle(np.full_like(Ss, t), Ss).e for t in (1e8, 1e10, 1e12)])
        near = np.abs(model.bundle(np.ones_like(Ss), Ss).e)
        h4 = bool(np.all(np.diff(np.abs(far), axis=0) <= 0) and np.all(np.abs(far[-1]) <= 1e-3 * near))
    return ConditionReport(points={"tau": tt, "S": ss}, residuals=res,
                           audit={"H1": h1, "H2": h2, "H4": h4})
