import numpy as np
import pytest

from cpl.markov import (MarkovChannel, darkstate_receiver_pulse,
                        emitter_rate_pulse, simulate_markov, transfer_rate)


def _channel(**kw):
    base = dict(v_g=1.5597, k_0=0.6372 * np.pi, u_s_e=0.5408, u_s_r=0.5408,
                kappa_E=0.0, n_e=5, n_r=9)
    base.update(kw)
    return MarkovChannel(**base)


def test_channel_validation():
    with pytest.raises(ValueError, match="v_g"):
        _channel(v_g=-1.0)
    with pytest.raises(ValueError, match="downstream"):
        _channel(n_r=5)
    with pytest.raises(ValueError, match="downstream"):
        _channel(n_r=3)


def test_delay_and_phase():
    ch = _channel(v_g=2.0, k_0=1.1, n_e=2, n_r=7)
    assert ch.tau_p == pytest.approx(2 * 5 / 2.0)
    assert ch.phi_p == pytest.approx(2 * 1.1 * 5)


def test_transfer_rate_value():
    assert transfer_rate(0.06, 0.5, 1.5) == pytest.approx(0.0012)
    # phases of g and u drop out
    assert transfer_rate(0.06j, -0.5, 1.5) == pytest.approx(0.0012)
    with pytest.raises(ZeroDivisionError, match="flat band"):
        transfer_rate(0.06, 0.5, 0.0)
    with pytest.raises(ValueError, match="positive"):
        transfer_rate(0.06, 0.5, -1.5)


def test_emitter_ramp_shape():
    g = emitter_rate_pulse(0.03, 15.0)
    assert g(4 * 15.0) == pytest.approx(0.03)
    assert g(0.0) == pytest.approx(0.03 * np.exp(-4.0))
    assert g(1000.0) == pytest.approx(0.03)        # capped, not growing


def test_step_grid_shapes():
    res = simulate_markov(_channel(), (lambda t: 0.01, lambda t: 0.0),
                          None, 40.0, 0.02)
    n = int(round(40.0 / 0.02))
    assert res.t.shape == (n + 1,)
    assert res.a_e.shape == (n + 1,)
    assert res.f_in_r.shape == (n,)
    assert res.n_delay == int(round(_channel().tau_p / 0.02))
    assert res.tau_p_rounded == pytest.approx(res.n_delay * 0.02)
    tau = _channel().tau_p
    assert res.rounding_error == pytest.approx(
        abs(res.n_delay * 0.02 - tau) / tau)


def test_integration_validation():
    ch = _channel()
    with pytest.raises(ValueError, match="delay"):
        simulate_markov(ch, (lambda t: 0.01, None), None, 10.0, 2 * ch.tau_p)
    with pytest.raises(ValueError, match="positive"):
        simulate_markov(ch, (lambda t: 0.01, None), None, 10.0, -0.01)
    with pytest.raises(ValueError, match="non-negative"):
        simulate_markov(ch, (lambda t: -0.01, None), None, 10.0, 0.02)


def test_passive_receiver_stays_empty():
    res = simulate_markov(_channel(), (emitter_rate_pulse(0.03, 10.0), None),
                          None, 100.0, 0.02)
    assert np.all(res.a_r == 0.0)
    assert res.F == 0.0
    assert res.out_flux > 0.1       # flux passes the receiver untouched


def test_emitter_decay_matches_exponential():
    gamma = 0.05
    res = simulate_markov(_channel(), (lambda t: gamma, lambda t: 0.0),
                          None, 100.0, 0.01)
    assert abs(res.a_e[-1]) == pytest.approx(np.exp(-gamma * 100.0 / 2),
                                             rel=1e-6)
    # norm of the emitter alone is monotonically non-increasing
    assert np.all(np.diff(np.abs(res.a_e)) <= 1e-15)


def test_flux_audit_closes():
    ch = _channel()
    emitter = (emitter_rate_pulse(0.03, 15.0), lambda t: 0.0)
    rec = darkstate_receiver_pulse(ch, emitter, 700.0, 0.01, 20 * 0.03)
    res = simulate_markov(ch, emitter, rec, 700.0, 0.01)
    assert abs(res.flux_total - 1.0) < 1e-6


def test_darkstate_absorbs():
    ch = _channel()
    emitter = (emitter_rate_pulse(0.03, 15.0), lambda t: 0.0)
    rec = darkstate_receiver_pulse(ch, emitter, 700.0, 0.01, 20 * 0.03)
    res = simulate_markov(ch, emitter, rec, 700.0, 0.01)
    assert res.F > 0.999
    assert res.residual < 1e-4
    # tighter cap leaves more early flux unabsorbed but still works
    rec4 = darkstate_receiver_pulse(ch, emitter, 700.0, 0.01, 4 * 0.03)
    res4 = simulate_markov(ch, emitter, rec4, 700.0, 0.01)
    assert 0.99 < res4.F < res.F


def test_darkstate_phase_rule():
    ch = _channel(k_0=0.61 * np.pi)
    emitter = (emitter_rate_pulse(0.02, 10.0), lambda t: 0.4)
    passive = simulate_markov(ch, emitter, None, 300.0, 0.02)
    gr, tr = darkstate_receiver_pulse(ch, emitter, 300.0, 0.02, 0.5)
    live = np.abs(passive.f_in_r) ** 2 > 0
    assert np.allclose(tr[live], np.pi - np.angle(passive.f_in_r[live]))
    assert np.all(gr <= 0.5 + 1e-15)
    assert np.all(gr >= 0.0)


def test_emitter_blind_to_receiver():
    ch = _channel()
    emitter = (emitter_rate_pulse(0.03, 15.0), lambda t: 0.0)
    rec = darkstate_receiver_pulse(ch, emitter, 300.0, 0.02, 0.6)
    r_pass = simulate_markov(ch, emitter, None, 300.0, 0.02)
    r_dark = simulate_markov(ch, emitter, rec, 300.0, 0.02)
    assert np.array_equal(r_pass.a_e, r_dark.a_e)


def test_loss_rescales_fidelity_exactly():
    # uniform attenuation leaves the dark pulse invariant, so F picks up
    # exactly the flux attenuation factor e^{-kappa_E tau_p}
    emitter = (emitter_rate_pulse(0.03, 15.0), lambda t: 0.0)
    fids = []
    for kE in (0.0, 0.002):
        ch = _channel(kappa_E=kE)
        rec = darkstate_receiver_pulse(ch, emitter, 700.0, 0.01, 0.6)
        fids.append(simulate_markov(ch, emitter, rec, 700.0, 0.01))
    expected = np.exp(-0.002 * fids[1].tau_p_rounded)
    assert fids[1].F / fids[0].F == pytest.approx(expected, rel=1e-9)


def test_attenuated_flux_bookkeeping():
    emitter = (emitter_rate_pulse(0.03, 15.0), lambda t: 0.0)
    ch = _channel(kappa_E=0.01)
    res = simulate_markov(ch, emitter, None, 700.0, 0.01)
    # everything emitted either decayed in flight or passed the receiver
    assert res.attenuated_flux > 0
    assert res.attenuated_flux + res.out_flux == pytest.approx(
        res.emitted_flux - res.inline_flux, abs=1e-9)
    assert abs(res.flux_total - 1.0) < 1e-6


def test_array_pulses_match_callables():
    ch = _channel()
    n = int(round(200.0 / 0.02))
    t = np.arange(n) * 0.02
    g = emitter_rate_pulse(0.03, 15.0)
    r_call = simulate_markov(ch, (g, lambda t: 0.0), None, 200.0, 0.02)
    r_arr = simulate_markov(ch, (np.array([g(ti) for ti in t]), np.zeros(n)),
                            None, 200.0, 0.02)
    # array input is interpolated onto midpoints rather than re-evaluated;
    # the ramp's cap kink at t = 4 t_up costs one step of O(dt gamma') there
    assert np.allclose(r_arr.a_e, r_call.a_e, atol=5e-4)
    # scalars broadcast to constant series
    r_s = simulate_markov(ch, (0.01, 0.0), None, 50.0, 0.02)
    r_c = simulate_markov(ch, (lambda t: 0.01, lambda t: 0.0), None, 50.0, 0.02)
    assert np.array_equal(r_s.a_e, r_c.a_e)
    with pytest.raises(ValueError, match="length"):
        simulate_markov(ch, (np.zeros(7), np.zeros(7)), None, 200.0, 0.02)
