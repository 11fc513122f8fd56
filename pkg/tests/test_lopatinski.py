import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockstab.eos import GlobalModel, LocalModel, StableModel
from shockstab.exceptions import NonLax
from shockstab.hugoniot import shock_from_states, trace_backward
from shockstab.lopatinski import (condition_ladder, designer_delta, designer_first_zero, designer_signed_delta,
                                  find_inviscid_transition, lopatinski_delta, small_amplitude_sign)

from conftest import shock_at

MODELS = {"global": GlobalModel(10.0), "local": LocalModel(), "stable": StableModel()}


def rel(a, b, scale):
    return abs(a - b) / scale


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(sorted(MODELS)), S=st.floats(-12.0, -1e-3))
def test_three_forms_of_the_determinant_agree(kind, S):
    model = MODELS[kind]
    sh = shock_at(model, S)
    ev = lopatinski_delta(model, sh, require_lax=False)
    T = sh.plus.T
    assert rel(ev.delta, ev.delta_hat * T, ev.scale * T) < 1e-12
    assert rel(ev.delta_hat, ev.delta_matrix, ev.scale) < 1e-12
    assert rel(ev.delta, ev.delta_matrix_entropy, ev.scale * T) < 1e-12


@pytest.mark.parametrize("kind", sorted(MODELS))
def test_weak_shocks_are_stable(kind):
    sh = shock_at(MODELS[kind], -1e-4)
    assert small_amplitude_sign(sh) == 1
    assert lopatinski_delta(MODELS[kind], sh).sign == 1


def test_stable_model_never_transitions():
    curve = trace_backward(StableModel(), (1.0, 0.0), np.arange(-0.05, -12.0, -0.05))
    rep = find_inviscid_transition(StableModel(), curve)
    assert rep.bracket is None and rep.flips == 0


def test_local_transition_report_is_consistent():
    model = LocalModel()
    curve = trace_backward(model, (1.0, 0.0), np.arange(-0.1, -6.0, -0.1))
    rep = find_inviscid_transition(model, curve, width=1e-6)
    a, b = rep.bracket
    assert abs(a - b) <= 1e-6 and rep.consistent and rep.flips == 1
    assert np.sign(rep.delta_ends[0]) != np.sign(rep.delta_ends[1])
    assert set(rep.to_json()) >= {"model", "anchor", "bracket", "tau_bracket", "delta_at_ends"}


def test_lop_residual_tracks_delta_sign():
    # Lop holds (residual < 0) exactly where the signed determinant is positive
    model = LocalModel()
    for S in (-1.0, -3.0, -3.6, -5.0):
        sh = shock_at(model, S)
        lop = condition_ladder(model, sh).residuals["Lop"]
        assert (lop < 0) == (lopatinski_delta(model, sh).sign > 0)


def test_non_lax_rejected():
    model = LocalModel()
    a = shock_at(model, -2.0)
    backwards = shock_from_states(model, a.plus, a.minus)
    with pytest.raises(NonLax):
        lopatinski_delta(model, backwards)


@settings(max_examples=200, deadline=None)
@given(M=st.floats(1.0, 10.0))
def test_designer_first_zero(M):
    assert designer_first_zero(M) == pytest.approx(1 / (4 * M), abs=1e-10)


def test_designer_delta_small_amplitude():
    g = np.array([1e-3, 0.05])
    assert np.allclose(designer_delta(g, 2.72) / (-2 * g), np.cos(2 * 2.72 * np.pi * g))
    assert designer_signed_delta(1e-3, 2.72) == 1
    assert designer_signed_delta(0.2, 2.72) == -1
