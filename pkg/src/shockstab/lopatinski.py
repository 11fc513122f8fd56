"""Inviscid (Lopatinski) stability of gas-dynamical 1-shocks.

All quantities are evaluated at the right state U₊ with jumps [h] = h₊ − h₋.
For a 1-shock [τ] < 0, and the small-amplitude limit of δ is positive, so
the signed determinant Δ is simply sgn δ for shocks produced by the tracer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .eos import ConditionReport, EquationOfState, local_condition_residuals
from .exceptions import NonHyperbolic, NonLax
from .hugoniot import HugoniotCurve, ShockTriple, trace_backward
from .numerics import bisect

__all__ = [
    "LopatinskiEvaluation",
    "lopatinski_delta",
    "small_amplitude_sign",
    "condition_ladder",
    "TransitionReport",
    "find_inviscid_transition",
    "designer_delta",
    "designer_signed_delta",
    "designer_first_zero",
]


@dataclass(frozen=True)
class LopatinskiEvaluation:
    delta: float  # entropy-coordinate closed form
    delta_hat: float  # partial-EOS closed form, equals delta / T
    delta_matrix: float  # [τ] times the 3x3 determinant in (τ, e) coordinates
    delta_matrix_entropy: float  # [τ] times the 3x3 determinant in (τ, S) coordinates
    sign: int  # signed determinant Δ
    scale: float  # magnitude used for relative comparisons of the forms

    @property
    def stable(self) -> bool:
        return self.sign > 0


def small_amplitude_sign(shock: ShockTriple) -> int:
    """Sign of δ in the weak-shock limit: sgn([τ] · (−2 T c³)) = −sgn [τ]."""
    return -int(np.sign(shock.jump_tau))


def lopatinski_delta(model: EquationOfState, shock: ShockTriple, reference_sign: Optional[int] = None,
                     require_lax: bool = True) -> LopatinskiEvaluation:
    """Closed-form and matrix forms of the Lopatinski determinant at U₊."""
    up = shock.plus
    if up.c2 <= 0:
        raise NonHyperbolic("U₊ is not hyperbolic")
    if require_lax and not shock.lax_ok:
        raise NonLax("shock violates the Lax 1-shock conditions")
    sig, c, T = shock.sigma, up.c, up.T
    jt, jp = shock.jump_tau, shock.jump_p
    v = shock.v_plus
    p, p_S = up.p, up.p_S
    p_e = p_S / T
    p_tau_hat = -up.c2 + p * p_e

    delta = jt * (p_S * c * jp + T * up.c2 * (sig - c))
    delta_hat = jt * ((sig - c) * up.c2 + p_e * c * jp)
    m_e = np.array([[1.0, -p_e, 1.0],
                    [-sig, 0.0, -c],
                    [-p, p_tau_hat, -v * c - p]])
    m_s = np.array([[1.0, -p_S, 1.0],
                    [-sig, 0.0, -c],
                    [-p, p * p_S - T * up.c2, -p - v * c]])
    d_e = jt * float(np.linalg.det(m_e))
    d_s = jt * float(np.linalg.det(m_s))
    scale = abs(jt) * (abs(p_e * c * jp) + abs((sig - c) * up.c2))
    ref = small_amplitude_sign(shock) if reference_sign is None else int(reference_sign)
    return LopatinskiEvaluation(delta=delta, delta_hat=delta_hat, delta_matrix=d_e,
                                delta_matrix_entropy=d_s, sign=int(np.sign(delta)) * ref, scale=scale)


def condition_ladder(model: EquationOfState, shock: ShockTriple) -> ConditionReport:
    """Per-shock stability conditions at U₊ as residuals (condition ⇔ residual < 0).

    The X-family conditions compare X = −ē_τS/(ē_S ē_ττ) with a multiple of
    1/[p]; their residuals are multiplied by T = ē_S, so that for instance
    the Weak' residual reads −ē_τS/ē_ττ − 2 ē_S/[p].
    """
    up = shock.plus
    sig, c, T = shock.sigma, up.c, up.T
    jp, jt = shock.jump_p, shock.jump_tau
    p_S, p_tau = up.p_S, up.p_tau
    p_e = p_S / T
    a = -up.e_tauS / up.c2  # −ē_τS/ē_ττ = T·X
    mach = abs(sig) / c
    gru = up.tau * p_S / T
    with np.errstate(divide="ignore"):
        majda = (shock.minus.tau / up.tau - 1) * mach**2 - ((1 + mach) / gru if gru != 0 else math.inf)
    res = {
        "Lop": p_S * jp - T * p_tau * (sig / c - 1),
        "Lop_alt": p_e * jp - c * (c - sig),
        "Lop1": a - T * (1 + mach) / jp,
        "Strong'": a - T / jp,
        "Weak'": a - 2 * T / jp,
        "Monotone": p_e * jp - (sig**2 + up.c2),
        "fwdmon": a - T * (2 * sig**2 / up.c2) / jp,
        "Majda": majda,
    }
    b = model.bundle(up.tau, up.S)
    res.update({k: float(v) for k, v in local_condition_residuals(b).items()})
    return ConditionReport(
        points={"tau_minus": shock.minus.tau, "S_minus": shock.minus.S,
                "tau_plus": up.tau, "S_plus": up.S, "sigma": sig},
        residuals=res,
        audit={"gruneisen": gru, "mach": mach},
    )


@dataclass
class TransitionReport:
    model: dict
    anchor: tuple
    bracket: Optional[tuple]  # (S_stable_side, S_unstable_side)
    tau_bracket: Optional[tuple] = None
    delta_ends: Optional[tuple] = None
    lop1_ends: Optional[tuple] = None
    conditions_ends: Optional[tuple] = None
    flips: int = 0
    consistent: bool = True
    diagnostics: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "anchor": list(self.anchor),
            "bracket": list(self.bracket) if self.bracket else None,
            "tau_bracket": list(self.tau_bracket) if self.tau_bracket else None,
            "delta_at_ends": list(self.delta_ends) if self.delta_ends else None,
            "lop1_residual_at_ends": list(self.lop1_ends) if self.lop1_ends else None,
            "conditions_at_ends": self.conditions_ends,
            "sign_flips_on_grid": self.flips,
            "residuals_consistent": self.consistent,
            "diagnostics": self.diagnostics,
        }


def find_inviscid_transition(model: EquationOfState, curve: HugoniotCurve, width: float = 1e-7) -> TransitionReport:
    """Locate the first sign change of the signed determinant along a backward curve.

    The curve's samples are scanned for a change of sgn δ; the first such
    interval is bisected in S₋ until it is narrower than ``width``.  The
    Lop1 residual (the X-form of the same condition) is evaluated alongside
    and must change sign in the same bracket.
    """
    anchor = curve.anchor
    report = TransitionReport(model=model.describe(), anchor=(anchor.tau, anchor.S), bracket=None)
    shocks = [(s.S, s.shock) for s in curve.samples if s.shock is not None]
    if not shocks:
        return report
    ref = small_amplitude_sign(shocks[0][1])

    def evaluate(S):
        sh = trace_backward(model, anchor, [S]).samples[0].shock
        return sh, lopatinski_delta(model, sh, ref, require_lax=False)

    signs = [lopatinski_delta(model, sh, ref, require_lax=False).sign for _, sh in shocks]
    report.flips = int(np.sum(np.diff(signs) != 0))
    first = next((k for k in range(1, len(signs)) if signs[k] != signs[k - 1]), None)
    if first is None:
        return report
    hi_S, lo_S = shocks[first - 1][0], shocks[first][0]  # stable side, flipped side
    s0 = signs[first - 1]

    def f(S):
        return evaluate(S)[1].sign * s0

    a, b = hi_S, lo_S
    while abs(a - b) > width:
        m = 0.5 * (a + b)
        if f(m) > 0:
            a = m
        else:
            b = m
    sa, la = evaluate(a)
    sb, lb = evaluate(b)
    ca, cb = condition_ladder(model, sa), condition_ladder(model, sb)
    report.bracket = (a, b)
    report.tau_bracket = (sa.minus.tau, sb.minus.tau)
    report.delta_ends = (la.delta, lb.delta)
    report.lop1_ends = (ca.residuals["Lop1"], cb.residuals["Lop1"])
    report.conditions_ends = ({k: bool(v) for k, v in ca.summary().items() if isinstance(v, (bool, np.bool_))},
                              {k: bool(v) for k, v in cb.summary().items() if isinstance(v, (bool, np.bool_))})
    report.consistent = bool(np.sign(ca.residuals["Lop1"]) != np.sign(cb.residuals["Lop1"]))
    if not report.consistent:
        report.diagnostics.append("Lop1 residual does not change sign inside the δ bracket")
    if report.flips > 1:
        report.diagnostics.append(f"{report.flips} sign changes of Δ on the grid")
    return report


# ---------------------------------------------------------------------------
# rotating model


def designer_delta(gamma, M):
    """δ(γ, M) = −2γ cos(2Mπγ)."""
    gamma = np.asarray(gamma, dtype=float)
    return -2.0 * gamma * np.cos(2.0 * M * np.pi * gamma)


def designer_signed_delta(gamma, M):
    """Δ: δ normalized by its (negative) small-amplitude sign."""
    return -np.sign(designer_delta(gamma, M))


def designer_first_zero(M: float, xtol: float = 1e-14) -> float:
    """First positive zero of δ(·, M), located numerically by bisection."""
    return bisect(lambda g: float(designer_delta(g, M)), (1e-6 / M, 0.5 / M), xtol=xtol)
