import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockstab.eos import GlobalModel, LocalModel, StableModel, thermo_eval
from shockstab.hugoniot import (hugoniot_residual, local_cubic_solve, shock_from_states,
                                stable_closed_form_entropy, trace_backward, trace_forward)

MODELS = [GlobalModel(10.0), LocalModel(), StableModel()]


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_backward_curve_satisfies_jump_conditions(model):
    anchor = thermo_eval(model, 1.0, 0.0)
    curve = trace_backward(model, anchor, np.linspace(-0.1, -6.0, 30))
    for s in curve.samples:
        sh = s.shock
        assert abs(hugoniot_residual(model, anchor, s.tau, s.S)) < 1e-9 * max(1.0, abs(s.state.e))
        # mass and momentum: σ² = −[p]/[τ]
        assert sh.sigma**2 == pytest.approx(-sh.jump_p / sh.jump_tau, rel=1e-12)
        assert sh.jump_tau < 0 and sh.sigma < 0


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_backward_curve_monotone_and_lax(model):
    curve = trace_backward(model, (1.0, 0.0), np.linspace(-0.05, -8.0, 40))
    flags = curve.monotone_flags()
    assert flags["tau"] == "increasing"
    assert flags["p"] == "decreasing"
    assert curve.lax_flags().all()


def test_forward_curve_inverts_backward():
    model = GlobalModel(10.0)
    back = trace_backward(model, (1.0, 0.0), [-2.0]).samples[0]
    fwd = trace_forward(model, back.state, [0.0]).samples[0]
    assert fwd.tau == pytest.approx(1.0, abs=1e-9)
    assert fwd.shock.sigma == pytest.approx(back.shock.sigma, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(S=st.floats(-8.0, -1e-3))
def test_local_cubic_matches_root_finder(S):
    tau = trace_backward(LocalModel(), (1.0, 0.0), [S]).samples[0].tau
    assert local_cubic_solve(S) == pytest.approx(tau, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(S=st.floats(-8.0, -1e-2))
def test_stable_closed_form_entropy(S):
    tau = trace_backward(StableModel(), (1.0, 0.0), [S]).samples[0].tau
    # the closed form steepens as τ → 3τ₊; scale the tolerance by its slope
    h = 1e-7 * tau
    slope = (stable_closed_form_entropy(tau + h, 1.0, 0.0) - stable_closed_form_entropy(tau - h, 1.0, 0.0)) / (2 * h)
    assert stable_closed_form_entropy(tau, 1.0, 0.0) == pytest.approx(S, abs=1e-9 + 1e-11 * abs(slope))


def test_rows_have_declared_columns():
    header, rows = trace_backward(LocalModel(), (1.0, 0.0), [0.0, -1.0, -2.0]).rows()
    assert header[:7] == ["S", "tau", "p", "v", "e", "T", "sigma"]
    assert len(rows) == 3 and rows[0][1] == 1.0


def test_shock_from_states_is_symmetric_in_speed():
    model = LocalModel()
    a, b = thermo_eval(model, 3.0, -2.0), trace_backward(model, (1.0, 0.0), [-2.0]).samples[0].state
    sh = shock_from_states(model, b, thermo_eval(model, 1.0, 0.0))
    assert sh.sigma < 0 and np.isfinite(sh.sigma)
    assert a.tau == 3.0


def test_grid_order_is_validated():
    with pytest.raises(ValueError):
        trace_backward(LocalModel(), (1.0, 0.0), [-2.0, -1.0])
    with pytest.raises(ValueError):
        trace_backward(LocalModel(), (1.0, 0.0), [0.5])
