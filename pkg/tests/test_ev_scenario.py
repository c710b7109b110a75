import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from synth import random_sessions

from energyscen.empdist import BinSpec, SeededSampler, build_histogram
from energyscen.ev_scenario import (
    ChargingSession,
    EVBinConfig,
    GenerationError,
    GenerationOptions,
    PowerProfile,
    fanchart,
    fit_session_model,
    generate_batch,
    generate_session,
    sessions_to_csv,
    synthesize_power_profile,
)

ONE = ChargingSession(8.25, 12.25, 4.0, 2.0, 7.4, 11.0)


def l1(a, b):
    return float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def bin_tuple(model, s):
    b = model.bins
    return b.connection.index(s.dt_conn), b.peak_power.index(s.p_peak), b.energy.index(s.e_ch)


# -- fitting --------------------------------------------------------------------


def test_single_session_gives_point_masses():
    m = fit_session_model([ONE])
    assert m.pdf_arrival.probabilities[8] == 1.0
    assert m.cond_departure.row(8).probabilities[12] == 1.0
    assert m.pdf_peak_power.probabilities[7] == 1.0
    assert m.cond_energy.row(7).probabilities[5] == 1.0
    assert m.joint_charge_time.lookup((8, 7, 5)).probabilities[4] == 1.0
    assert m.summary()["joint_cells"] == 1


def test_single_session_generation_stays_in_its_bins():
    m = fit_session_model([ONE])
    s = SeededSampler(5)
    for _ in range(50):
        g, _ = generate_session(m, s)
        assert (int(g.t_arr), int(g.t_dep), int(g.p_peak), int(g.e_ch // 2)) == (8, 12, 7, 5)
        assert 4.0 <= g.dt_conn < 4.5 and 2.0 <= g.dt_ch < 2.5


def test_two_sessions_two_arrival_bins():
    m = fit_session_model([ONE, ChargingSession(17.5, 19.5, 2.0, 1.0, 3.0, 2.0)])
    p = m.pdf_arrival.probabilities
    assert p[8] == p[17] == 0.5 and p.sum() == 1.0


def test_out_of_range_sessions_excluded_and_counted():
    m = fit_session_model([ONE, ChargingSession(8.0, 12.0, 4.0, 2.0, 23.0, 11.0)])
    assert m.n_sessions == 1 and m.n_excluded == 1


def test_fit_rejects_empty():
    with pytest.raises(ValueError):
        fit_session_model([])


def test_bin_config_round_trip():
    b = EVBinConfig(peak_power=BinSpec(0, 2, 12, "kW"))
    assert EVBinConfig.from_dict(b.to_dict()) == b


# -- generation -----------------------------------------------------------------


def test_dead_branch_model_restarts_and_terminates():
    # arrival 18 with peak 7 leads to the unobserved cell (conn 2, P 7, E 10)
    sessions = [
        ChargingSession(8.2, 12.2, 4.0, 3.2, 7.3, 10.3),
        ChargingSession(18.1, 20.1, 2.0, 1.2, 11.4, 4.1),
        ChargingSession(8.2, 12.2, 4.0, 0.6, 11.4, 4.1),
    ]
    m = fit_session_model(sessions)
    batch = generate_batch(m, 300, seed=3)
    assert batch.stats["restarted"] > 0 and max(batch.attempts) > 1
    for s in batch.sessions:
        assert not s.violations()
        assert m.joint_charge_time.lookup(bin_tuple(m, s))


def test_exhausted_attempts_carry_diagnostics():
    # the only joint cell needs a connection time the arrival/departure pair cannot give
    m = fit_session_model([ChargingSession(8.0, 12.0, 6.0, 2.0, 7.0, 5.0)])
    with pytest.raises(GenerationError) as exc:
        generate_session(m, SeededSampler(1, 2), max_attempts=25)
    d = exc.value.diagnostics
    assert d["attempts"] == 25 and d["unseen_joint_cell"] == 25 and d["stream_id"] == 2


def test_batch_determinism_and_byte_identical_export():
    m = fit_session_model(random_sessions(np.random.default_rng(1), 300))
    a, b = generate_batch(m, 5, seed=9), generate_batch(m, 5, seed=9)
    assert a.sessions == b.sessions
    assert sessions_to_csv(a.sessions) == sessions_to_csv(b.sessions)
    assert generate_batch(m, 5, seed=10).sessions != a.sessions


def test_batch_independent_of_threads():
    m = fit_session_model(random_sessions(np.random.default_rng(2), 300))
    assert generate_batch(m, 40, 4, threads=4).sessions == generate_batch(m, 40, 4).sessions


def test_batch_rejects_zero():
    m = fit_session_model([ONE])
    with pytest.raises(ValueError):
        generate_batch(m, 0, seed=1)


def _dense_sessions(rng, n):
    # few bins per variable, every joint cell populated, wide consistency margins
    out = []
    for _ in range(n):
        t_arr = float(rng.choice([7, 8, 17, 18])) + 0.25
        conn = float(rng.choice([4.0, 6.0, 9.0])) + 0.1
        p = float(rng.choice([4, 7, 11])) + 0.5
        e = float(rng.choice([0.5, 2.5]))
        out.append(ChargingSession(t_arr, (t_arr + conn) % 24, conn, 1.2, p, e))
    return out


def test_batch_marginals_match_model_on_dense_model():
    sessions = _dense_sessions(np.random.default_rng(8), 5000)
    m = fit_session_model(sessions)
    batch = generate_batch(m, 10_000, seed=12)
    b = m.bins
    pairs = [
        ("t_arr", b.arrival), ("t_dep", b.departure), ("dt_conn", b.connection),
        ("dt_ch", b.charge), ("p_peak", b.peak_power), ("e_ch", b.energy),
    ]
    for attr, spec in pairs:
        ref = build_histogram([getattr(s, attr) for s in sessions], spec).probabilities
        got = build_histogram([getattr(s, attr) for s in batch.sessions], spec).probabilities
        assert l1(got, ref) < 0.05, attr


@settings(max_examples=8)
@given(seed=st.integers(0, 10_000))
def test_generated_sessions_sound_and_arrival_faithful(seed):
    rng = np.random.default_rng(seed)
    m = fit_session_model(random_sessions(rng, 400))
    n = 2000
    batch = generate_batch(m, n, seed)
    for s in batch.sessions:
        assert not s.violations()
        assert m.joint_charge_time.lookup(bin_tuple(m, s))
    h = build_histogram([s.t_arr for s in batch.sessions], m.bins.arrival)
    assert l1(h.probabilities, m.pdf_arrival.probabilities) < 3 * math.sqrt(24 / n)


def test_uniform_peak_sampling_mode():
    sessions = [ChargingSession(8.0, 12.0, 4.0, 2.0, 3.5, 2.0)] * 9 + [ChargingSession(8.0, 12.0, 4.0, 2.0, 11.5, 2.0)]
    m = fit_session_model(sessions)
    opts = GenerationOptions(peak_sampling="uniform")
    batch = generate_batch(m, 4000, seed=1, options=opts)
    share_low = np.mean([s.p_peak < 4 for s in batch.sessions])
    assert abs(share_low - 0.5) < 0.05
    marginal = generate_batch(m, 4000, seed=1)
    assert abs(np.mean([s.p_peak < 4 for s in marginal.sessions]) - 0.9) < 0.03
    with pytest.raises(ValueError):
        generate_session(m, SeededSampler(0), options=GenerationOptions(peak_sampling="bogus"))


def test_midpoint_mode_is_deterministic_per_bin():
    m = fit_session_model([ChargingSession(8.0, 14.0, 6.0, 4.0, 7.0, 10.0)])
    g, _ = generate_session(m, SeededSampler(0), options=GenerationOptions(midpoint=True))
    assert (g.t_arr, g.t_dep, g.dt_conn, g.dt_ch, g.p_peak, g.e_ch) == (8.5, 14.5, 6.0, 4.25, 7.5, 11.0)


# -- power profiles -------------------------------------------------------------


def test_rectangular_profile():
    p = synthesize_power_profile(ChargingSession(8.0, 12.0, 4.0, 2.0, 7.0, 10.0))
    expected = np.zeros(192)
    expected[32:40] = 5.0
    assert np.array_equal(p.power_kw, expected)


def test_zero_energy_profile():
    p = synthesize_power_profile(ChargingSession(8.0, 12.0, 4.0, 0.0, 7.0, 0.0))
    assert not p.power_kw.any()


def test_profile_across_midnight():
    p = synthesize_power_profile(ChargingSession(23.5, 1.0, 1.5, 1.0, 7.0, 5.0))
    slot_energy = p.power_kw * 0.25
    assert np.flatnonzero(slot_energy).tolist() == [94, 95, 96, 97]
    assert slot_energy[94:98] == pytest.approx([1.25] * 4, abs=1e-12)
    daily = p.daily()
    assert np.flatnonzero(daily).tolist() == [0, 1, 94, 95]
    assert p.energy_kwh() == pytest.approx(5.0, abs=1e-9)


def test_partial_slot_prorated():
    p = synthesize_power_profile(ChargingSession(8.1, 12.0, 3.9, 0.5, 7.0, 2.0))
    assert p.power_kw[32] == pytest.approx(4.0 * 0.15 / 0.25)
    assert p.power_kw[34] == pytest.approx(4.0 * 0.1 / 0.25)
    assert p.energy_kwh() == pytest.approx(2.0, abs=1e-9)


def test_zero_charge_time_with_energy_is_error():
    with pytest.raises(ValueError):
        synthesize_power_profile(ChargingSession(8.0, 12.0, 4.0, 0.0, 7.0, 1.0))


@given(t_arr=st.floats(0, 24, exclude_max=True), dt_ch=st.floats(0.01, 24),
       p=st.floats(0.1, 23), frac=st.floats(0, 1), res=st.sampled_from([5, 15, 30, 60]))
def test_profile_conserves_energy(t_arr, dt_ch, p, frac, res):
    e = p * dt_ch * frac
    prof = synthesize_power_profile(ChargingSession(t_arr, (t_arr + dt_ch) % 24, dt_ch, dt_ch, p, e), res)
    assert abs(prof.energy_kwh() - e) < 1e-6
    assert prof.power_kw.max() <= p + 1e-9


# -- fancharts ------------------------------------------------------------------


def test_fanchart_of_one_profile():
    p = synthesize_power_profile(ONE)
    f = fanchart([p])
    assert all(np.array_equal(row, p.power_kw) for row in f.values)


def test_fanchart_two_constant_profiles():
    f = fanchart([PowerProfile(15, np.zeros(192)), PowerProfile(15, np.full(192, 10.0))], levels=(50,))
    assert np.all(f.values[0] == 5.0)


def test_fanchart_mixed_resolutions_and_empty():
    with pytest.raises(ValueError, match="mixed"):
        fanchart([PowerProfile(15, np.zeros(192)), PowerProfile(30, np.zeros(96))])
    with pytest.raises(ValueError):
        fanchart([])


def test_fanchart_rows_header():
    f = fanchart([synthesize_power_profile(ONE)], fold=True)
    rows = f.rows()
    assert rows[0] == ["slot", "hour", "p5", "p25", "p50", "p75", "p95"]
    assert len(rows) == 97


def test_fanchart_night_activity_lower_and_levels_monotone():
    rng = np.random.default_rng(4)
    sessions = []
    for _ in range(800):
        t_arr = float(np.clip(rng.normal(8.5, 1.0), 5, 11))
        conn = float(rng.uniform(7, 10))
        ch = float(rng.uniform(2, 6))
        p = float(rng.uniform(3, 11))
        sessions.append(ChargingSession(t_arr, t_arr + conn, conn, ch, p, p * ch * float(rng.uniform(0.3, 0.9))))
    m = fit_session_model(sessions)
    batch = generate_batch(m, 1000, seed=21)
    f = fanchart([synthesize_power_profile(s) for s in batch.sessions], fold=True)
    med = f.values[f.levels.index(50)]
    assert med[:20].mean() < med.mean()
    assert np.all(np.diff(f.values, axis=0) >= 0)
