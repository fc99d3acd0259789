import csv
import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keyreconf import security_model as sm

NOMINAL_A1 = sm.TimingParams(kt_s=0.5, dt_s=0.24, alpha=1.0)
NOMINAL_A0 = sm.TimingParams(kt_s=0.5, dt_s=0.24, alpha=0.0)


# ---------------------------------------------------------------------------
# Eq. 1


def test_guess_probability_single_key_certain():
    assert sm.guess_probability(1, 8) == 1.0
    assert sm.guess_probability(1, 1) == 1.0


def test_guess_probability_operating_point():
    p = sm.guess_probability(6, 8)
    assert p == pytest.approx(5.953741807651273e-07, rel=1e-12)
    assert p <= 1e-6


def test_guess_probability_three_two():
    # oracle: 9 equiprobable two-character passwords, one guess succeeds
    assert sm.guess_probability(3, 2) == pytest.approx(1 / 9, rel=1e-12)


def test_guess_probability_monotone():
    for n in (1, 4, 9):
        values = [sm.guess_probability(k, n) for k in range(2, 30)]
        assert all(a > b for a, b in zip(values, values[1:]))
    for k in (2, 6, 20):
        values = [sm.guess_probability(k, n) for n in range(1, 30)]
        assert all(a > b for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------------------
# Integer solve


def test_required_shuffle_size_operating_point():
    assert sm.required_shuffle_size(1e-6, 8) == 6


def test_required_shuffle_size_trivial():
    for n in (1, 2, 8, 30):
        assert sm.required_shuffle_size(1.0, n) == 1


def test_required_shuffle_size_exact_boundary():
    # 3**-2 meets 1/9 exactly; 2**-2 = 1/4 misses it
    assert sm.required_shuffle_size(1 / 9, 2) == 3


@settings(max_examples=200)
@given(st.floats(min_value=1e-12, max_value=1.0, exclude_min=False),
       st.integers(min_value=1, max_value=16))
def test_required_shuffle_size_minimal(p_target, n):
    # contract: smallest k with k**-n <= p within one part in 1e9
    k = sm.required_shuffle_size(p_target, n)
    assert sm.guess_probability(k, n) <= p_target / (1 - 1e-9) * (1 + 1e-12)
    if k >= 2:
        assert sm.guess_probability(k - 1, n) > p_target


def test_required_shuffle_size_extreme_targets():
    # (1e-300)**(-1/100) = 1000 and 1000**-100 meets the target exactly
    assert sm.required_shuffle_size(1e-300, 100) == 1000
    # n=1 degenerates to ceil(1/p); must not crawl even for subnormal p
    k = sm.required_shuffle_size(5e-324, 1)
    assert sm.guess_probability(k, 1) <= 5e-324 * (1 + 1e-9)


# ---------------------------------------------------------------------------
# Eq. 2


def test_expected_entry_time_reference_values():
    assert sm.expected_entry_time(8, 6, NOMINAL_A1) == pytest.approx(5.44, abs=1e-12)
    assert sm.expected_entry_time(8, 6, NOMINAL_A0) == pytest.approx(15.52, abs=1e-12)


def test_expected_entry_time_single_char():
    timing = sm.TimingParams(kt_s=0.5, dt_s=0.24, alpha=0.3)
    assert sm.expected_entry_time(1, 1, timing) == pytest.approx(0.74, abs=1e-12)


@settings(max_examples=150)
@given(st.integers(min_value=1, max_value=30), st.integers(min_value=1, max_value=60),
       st.floats(min_value=0.0, max_value=1.0),
       st.floats(min_value=0.01, max_value=3.0), st.floats(min_value=0.01, max_value=3.0))
def test_alpha_blend_is_exact(n, k, alpha, kt, dt):
    # T(alpha) = alpha*T(1) + (1-alpha)*T(0), exactly, in the rational domain
    # where the model computes; floats round that identity only at the end
    from fractions import Fraction
    a = Fraction(alpha)
    t_a = sm.entry_time_exact(n, k, sm.TimingParams(kt, dt, alpha))
    t_1 = sm.entry_time_exact(n, k, sm.TimingParams(kt, dt, 1.0))
    t_0 = sm.entry_time_exact(n, k, sm.TimingParams(kt, dt, 0.0))
    assert t_a == a * t_1 + (1 - a) * t_0
    assert sm.expected_entry_time(n, k, sm.TimingParams(kt, dt, alpha)) == float(t_a)


def test_entry_time_monotone_in_k_and_n():
    for alpha in (0.0, 0.5):
        timing = sm.TimingParams(alpha=alpha)
        ts = [sm.expected_entry_time(8, k, timing) for k in range(1, 40)]
        assert all(a < b for a, b in zip(ts, ts[1:]))
        ts = [sm.expected_entry_time(n, 6, timing) for n in range(1, 40)]
        assert all(a < b for a, b in zip(ts, ts[1:]))
    # alpha = 1: still increasing in n
    ts = [sm.expected_entry_time(n, 6, NOMINAL_A1) for n in range(1, 40)]
    assert all(a < b for a, b in zip(ts, ts[1:]))


def test_timing_params_validation():
    with pytest.raises(sm.ParameterError):
        sm.TimingParams(kt_s=0.0)
    with pytest.raises(sm.ParameterError):
        sm.TimingParams(alpha=1.5)


# ---------------------------------------------------------------------------
# Rates


def test_predicted_entry_rate_reference_band():
    cps1, wpm1 = sm.predicted_entry_rate(8, 6, NOMINAL_A1)
    cps0, wpm0 = sm.predicted_entry_rate(8, 6, NOMINAL_A0)
    assert cps1 == pytest.approx(1.47, abs=0.02)
    assert cps0 == pytest.approx(0.515, abs=0.02)
    assert wpm1 == pytest.approx(17.6, abs=0.2)
    assert wpm0 == pytest.approx(6.19, abs=0.2)


def test_predicted_entry_rate_motor_limit():
    timing = sm.TimingParams(kt_s=0.5, dt_s=1e-9, alpha=1.0)
    cps, _ = sm.predicted_entry_rate(8, 1, timing)
    assert cps == pytest.approx(2.0, rel=1e-6)


# ---------------------------------------------------------------------------
# Tables


def test_tradeoff_table_shape_and_operating_point():
    rows = sm.tradeoff_table([8], range(2, 11), [0.0, 1.0],
                             sm.TimingParams(kt_s=0.5, dt_s=0.24))
    assert len(rows) == 18
    assert [(r.n, r.k, r.alpha) for r in rows] == sorted(
        (r.n, r.k, r.alpha) for r in rows)
    target = [r for r in rows if r.k == 6 and r.alpha == 1.0][0]
    assert target.t_s == pytest.approx(5.44, abs=1e-12)
    assert target.p == pytest.approx(5.9537e-7, rel=1e-4)


def test_tradeoff_table_empty_alpha_rejected():
    with pytest.raises(sm.ParameterError):
        sm.tradeoff_table([8], [6], [], sm.TimingParams())


def test_tradeoff_single_point_consistency():
    timing = sm.TimingParams(alpha=0.5)
    (row,) = sm.tradeoff_table([5], [4], [0.5], timing)
    assert row.t_s == sm.expected_entry_time(5, 4, timing)
    assert row.p == sm.guess_probability(4, 5)


def test_tradeoff_point_roundtrip():
    timing = sm.TimingParams(alpha=0.25)
    point = sm.tradeoff_point(9, 7, timing)
    again = sm.tradeoff_point(point.n, point.k,
                              sm.TimingParams(point.kt_s, point.dt_s, point.alpha))
    assert again == point


def test_csv_export_header_and_rows():
    rows = sm.tradeoff_table([8], [6], [1.0], sm.TimingParams())
    reader = csv.reader(io.StringIO(sm.table_to_csv(rows)))
    header = next(reader)
    assert header == ["n", "k", "alpha", "KT", "DT", "p", "T", "cps", "wpm"]
    row = next(reader)
    assert row[0] == "8" and row[1] == "6"
    assert float(row[6]) == pytest.approx(5.44, abs=1e-12)


def test_json_export_carries_assumptions():
    import json
    rows = sm.tradeoff_table([8], [6], [1.0], sm.TimingParams())
    doc = json.loads(sm.table_to_json(rows))
    assert len(doc["assumptions"]) == 3
    assert doc["rows"][0]["k"] == 6


def test_security_params_derive():
    params = sm.SecurityParams.derive(6, 8)
    assert params.p == sm.guess_probability(6, 8)
