import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockstab.eos import (CustomModel, GlobalModel, LocalModel, PolytropicModel, StableModel,
                           alt_exactness_check, check_structural, exactness_check, helmholtz_laws,
                           helmholtz_point, invert_energy, invert_temperature, make_model,
                           pressure_law, thermo_eval)
from shockstab.exceptions import ConfigError, DomainError, NonHyperbolic

MODELS = [GlobalModel(10.0), GlobalModel(3.0), LocalModel(), StableModel(), PolytropicModel()]

taus = st.floats(0.3, 15.0)
entropies = st.floats(-8.0, 1.0)


def fd_bundle(model, tau, S, h=1e-4):
    e = model.energy
    return {
        "e_t": (e(tau + h, S) - e(tau - h, S)) / (2 * h),
        "e_s": (e(tau, S + h) - e(tau, S - h)) / (2 * h),
        "e_tt": (e(tau + h, S) - 2 * e(tau, S) + e(tau - h, S)) / h**2,
        "e_ts": (e(tau + h, S + h) - e(tau + h, S - h) - e(tau - h, S + h) + e(tau - h, S - h)) / (4 * h * h),
        "e_ss": (e(tau, S + h) - 2 * e(tau, S) + e(tau, S - h)) / h**2,
    }


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
@settings(max_examples=40, deadline=None)
@given(tau=taus, S=entropies)
def test_closed_form_derivatives_match_differences(model, tau, S):
    b = model.bundle(tau, S)
    for name, approx in fd_bundle(model, tau, S).items():
        exact = float(getattr(b, name))
        assert abs(exact - approx) <= 1e-5 * max(1.0, abs(exact)), name


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_third_derivative_matches_differences(model):
    h = 1e-3
    for tau, S in [(0.7, -1.0), (2.0, 0.0), (6.0, -4.0)]:
        f = lambda t: float(model.bundle(t, S).e_tt)  # noqa: E731
        approx = (f(tau + h) - f(tau - h)) / (2 * h)
        assert float(model.bundle(tau, S).e_ttt) == pytest.approx(approx, rel=1e-5, abs=1e-8)


def test_global_model_value():
    m = GlobalModel(10.0)
    assert m.energy(2.0, -1.0) == pytest.approx(math.exp(-1) / 2 + 100 * math.exp(-0.01 - 0.2), rel=1e-15)


def test_local_shift_moves_pressure_by_constant():
    a, b = LocalModel(), LocalModel(shift=2.5)
    for tau, S in [(1.0, 0.0), (3.0, -2.0)]:
        assert thermo_eval(b, tau, S).p - thermo_eval(a, tau, S).p == pytest.approx(2.5, rel=1e-14)
        assert thermo_eval(b, tau, S).c == pytest.approx(thermo_eval(a, tau, S).c, rel=1e-14)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
@settings(max_examples=30, deadline=None)
@given(tau=taus, S=entropies)
def test_energy_inversion_round_trip(model, tau, S):
    e = float(model.energy(tau, S))
    assert invert_energy(model, tau, e) == pytest.approx(S, abs=1e-9)
    T = float(model.bundle(tau, S).e_s)
    assert invert_temperature(model, tau, T) == pytest.approx(S, abs=1e-8)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_pressure_law_agrees_with_entropy_form(model):
    for tau, S in [(0.8, -0.5), (2.0, -2.0), (5.0, 0.5)]:
        st_ = thermo_eval(model, tau, S)
        pl = pressure_law(model, tau, st_.e)
        assert pl.S == pytest.approx(S, abs=1e-10)
        assert pl.p == pytest.approx(st_.p, rel=1e-10)
        assert pl.p_e * st_.T == pytest.approx(st_.p_S, rel=1e-10)
        # sound speed: c² = −p̂_τ + p p̂_e
        assert -pl.p_tau + pl.p * pl.p_e == pytest.approx(st_.c2, rel=1e-9)


@pytest.mark.parametrize("model", [GlobalModel(10.0), PolytropicModel()], ids=lambda m: m.kind)
def test_tau_temperature_laws_are_exact(model):
    e_fn, p_fn = helmholtz_laws(model)
    r = exactness_check(e_fn, p_fn, [0.8, 1.5, 3.0], [0.5, 1.0, 2.0])
    assert np.max(np.abs(r)) < 1e-7


def test_inconsistent_laws_are_flagged():
    e_fn, p_fn = helmholtz_laws(GlobalModel(10.0))
    r = exactness_check(e_fn, lambda t, T: 1.1 * p_fn(t, T), [1.0, 2.0], [0.5, 1.0])
    assert np.max(np.abs(r)) > 1e-2


def test_tau_energy_laws_are_exact():
    model = GlobalModel(10.0)

    def p_fn(t, e):
        return np.vectorize(lambda a, b: pressure_law(model, a, b).p)(t, e)

    def T_fn(t, e):
        return np.vectorize(lambda a, b: pressure_law(model, a, b).T)(t, e)

    r = alt_exactness_check(p_fn, T_fn, [1.0, 2.0], [20.0, 40.0])
    assert np.max(np.abs(r)) < 1e-6


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_helmholtz_partials_against_inverted_laws(model):
    e_fn, p_fn = helmholtz_laws(model)
    tau, S = 1.7, -0.8
    hp = helmholtz_point(model, tau, S)
    T, h = float(hp.T), 1e-5
    assert float(hp.p_T) == pytest.approx((p_fn(tau, T + h) - p_fn(tau, T - h)) / (2 * h), rel=1e-6)
    assert float(hp.e_tau) == pytest.approx((e_fn(tau + h, T) - e_fn(tau - h, T)) / (2 * h), rel=1e-6, abs=1e-9)
    assert float(hp.p_tau) == pytest.approx((p_fn(tau + h, T) - p_fn(tau - h, T)) / (2 * h), rel=1e-6)


def test_custom_model_matches_closed_form():
    ref = GlobalModel(10.0)
    custom = CustomModel(lambda t, s: np.exp(s) / t + 100 * np.exp(s / 100 - t / 10))
    for tau, S in [(1.0, 0.0), (2.5, -3.0)]:
        a, b = ref.bundle(tau, S), custom.bundle(tau, S)
        for name in ("e", "e_t", "e_s", "e_tt", "e_ts", "e_ss"):
            assert float(getattr(b, name)) == pytest.approx(float(getattr(a, name)), rel=1e-6, abs=1e-9)


def test_structural_audit_global_passes():
    rep = check_structural(GlobalModel(10.0))
    for name in ("G1", "G2", "G3", "G4", "G5", "G6", "J1", "J2", "J3", "J4", "H1", "H2", "H4"):
        assert rep.summary()[name], name


def test_structural_audit_local_fails_asymptotics():
    rep = check_structural(LocalModel())
    assert not rep.summary()["H1"]


def test_condition_rows_cover_grid():
    rep = check_structural(StableModel(), n_tau=4, n_S=3)
    header, rows = rep.to_rows()
    assert header[:2] == ["tau", "S"] and len(rows) == 12
    assert all(len(r) == len(header) for r in rows)


def test_errors():
    with pytest.raises(DomainError):
        thermo_eval(GlobalModel(), -1.0, 0.0)
    with pytest.raises(DomainError):
        check_structural(GlobalModel(), n_tau=0)
    with pytest.raises(ConfigError):
        make_model("vacuum")
    with pytest.raises(NonHyperbolic):
        thermo_eval(CustomModel(lambda t, s: -t**2 + np.exp(s)), 1.0, 0.0)
