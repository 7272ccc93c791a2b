import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from controlled_qkd._engine import gate
from controlled_qkd.confkey import (
    BELL_TEST,
    CHEAT_SUSPECTED,
    CLEAN,
    DISCARD,
    KEY,
    KEY_WORDS,
    bell_I,
    bell_I_closed_form,
    conference_qber_analytic,
    conference_state,
    correlation_tables,
    disposition_of,
    optimal_theta,
    optimal_violation,
    projector_qber,
    run_conference,
    stabilizer_group,
    word_sign,
)
from controlled_qkd.qcore import PAULI, expectation
from controlled_qkd.states import ghz

open_p = st.floats(min_value=1e-3, max_value=1 - 1e-3)


class TestStabilizers:
    def test_eight_elements_with_expected_signs(self):
        g = {str(e) for e in stabilizer_group()}
        assert g == {"III", "XXX", "ZZI", "IZZ", "ZIZ", "-YXY", "-YYX", "-XYY"}

    @pytest.mark.parametrize("word,sign", [("XXX", 1), ("YYX", -1), ("ZZI", 1), ("XYY", -1)])
    def test_expectations_on_ghz(self, word, sign):
        assert expectation(ghz(("A", "B", "C")), [PAULI[c] for c in word]) == pytest.approx(sign, abs=1e-12)

    def test_state_is_joint_eigenstate(self):
        g = ghz(("A", "B", "C")).amplitudes
        for e in stabilizer_group():
            assert np.allclose(e.matrix() @ g, g, atol=1e-12)


class TestTables:
    def test_four_rows_each(self):
        assert all(len(rows) == 4 for rows in correlation_tables().values())

    def test_xxx_rows(self):
        t = correlation_tables()
        assert (1, 1, 1) in t["XXX"]
        assert (1, 1, -1) not in t["XXX"]
        assert (1, 1, -1) in t["XYY"]

    def test_rows_have_table_parity(self):
        for word, rows in correlation_tables().items():
            assert all(a * b * c == word_sign(word) for a, b, c in rows)

    def test_conference_state_at_half_shares_tables(self):
        assert correlation_tables(conference_state(0.5)) == correlation_tables()


class TestQber:
    @pytest.mark.parametrize("p,q", [(0.5, 0.0), (0.9, 0.2)])
    def test_values(self, p, q):
        assert conference_qber_analytic(p)["YXY"] == pytest.approx(q, abs=1e-12)
        assert conference_qber_analytic(p)["XXX"] == 0

    def test_limit_one(self):
        assert conference_qber_analytic(1.0)["YYX"] == pytest.approx(0.5)

    @settings(max_examples=60)
    @given(st.floats(0, 1))
    def test_matches_projector_oracle(self, p):
        q = conference_qber_analytic(p)
        for w in KEY_WORDS:
            assert projector_qber(p, w) == pytest.approx(q[w], abs=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            conference_qber_analytic(1.2)


class TestBellExpression:
    @settings(max_examples=60)
    @given(open_p, st.floats(-math.pi, math.pi))
    def test_expectation_matches_closed_form(self, p, th):
        assert bell_I(p, th) == pytest.approx(bell_I_closed_form(p, th), abs=1e-12)

    @settings(max_examples=60)
    @given(open_p)
    def test_optimum_violates(self, p):
        assert optimal_violation(p) > 2
        assert bell_I(p, optimal_theta(p)) == pytest.approx(optimal_violation(p), abs=1e-12)

    def test_values(self):
        assert optimal_violation(0.5) == pytest.approx(2 * math.sqrt(2))
        assert optimal_violation(0.9) == pytest.approx(2.332381, abs=1e-6)

    def test_theta_zero_leaves_two_party_term(self):
        # at theta = 0 the three-party terms cancel
        assert bell_I(0.3, 0.0) == pytest.approx(2, abs=1e-12)

    @settings(max_examples=30)
    @given(open_p)
    def test_optimum_is_maximum_over_theta(self, p):
        ths = np.linspace(-math.pi, math.pi, 721)
        assert max(bell_I_closed_form(p, t) for t in ths) <= optimal_violation(p) + 1e-12


class TestRounds:
    def test_disposition_counts(self):
        import itertools

        secure = [disposition_of(c, True) for c in itertools.product(range(3), range(4), range(3))]
        assert secure.count(KEY) == 4 and secure.count(BELL_TEST) == 4 and secure.count(DISCARD) == 28
        plain = [disposition_of(c, False) for c in itertools.product(range(2), repeat=3)]
        assert plain.count(KEY) == 4

    def test_plain_ghz(self):
        rec, rep = run_conference(0.5, 100_000, seed=1)
        assert rep.qber_mc["overall"] == 0
        assert gate(rep.key_rate, 0.5, math.sqrt(0.25 / 1e5), 100_000)
        assert rep.verdict == CLEAN
        bits = rec.key_bits()
        assert bits.shape[1] == 3

    @pytest.mark.parametrize("p", [0.3, 0.9])
    def test_monte_carlo_qber(self, p):
        _, rep = run_conference(p, 100_000, seed=2)
        for w in KEY_WORDS:
            q, n = rep.qber_expected[w], rep.counts[w]
            assert gate(rep.qber_mc[w], q, math.sqrt(q * (1 - q) / n), n)

    def test_secure_rates(self):
        rec, rep = run_conference(0.5, 100_000, seed=3, secure=True)
        assert gate(rep.key_rate, 1 / 9, math.sqrt((1 / 9) * (8 / 9) / 1e5), 100_000)
        assert rep.verdict == CLEAN

    def test_identity_setting_has_null_outcome(self):
        rec, _ = run_conference(0.5, 10_000, seed=3, secure=True)
        assert np.all(rec.outcomes[rec.settings[:, 2] == 2, 2] == 0)
        assert np.all(np.abs(rec.outcomes[rec.settings[:, 2] != 2, 2]) == 1)

    def test_intercept_resend_drops_bell_value(self):
        _, rep = run_conference(0.5, 100_000, seed=4, secure=True, intercept_prob=1.0)
        var = sum((1 - e * e) / c for e, c in zip(rep.test_correlators_expected, rep.test_counts))
        assert rep.bell_measured < rep.bell_expected - 3 * math.sqrt(var)
        assert rep.verdict == CHEAT_SUSPECTED

    def test_deterministic(self):
        a = run_conference(0.7, 30_000, seed=5, secure=True)[1].row()
        b = run_conference(0.7, 30_000, seed=5, secure=True)[1].row()
        assert a == b
