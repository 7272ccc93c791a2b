"""Three-party conference key over GHZ/NMM resources with a tripartite Bell test.

Parties are ``(A, B, C)``. Alice holds the qubit that is rotated to the
sigma_x eigenbasis, so the resource is
``sqrt(p)|+x>_A|phi+>_BC + sqrt(1-p)|-x>_A|phi->_BC`` (GHZ at ``p = 1/2``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _engine
from .qcore import PAULI, PX, PY, PZ, Observable, StateVector, expectation
from .states import PHI_MINUS, PHI_PLUS, ghz

PARTIES = ("A", "B", "C")
KEY, BELL_TEST, DISCARD = 0, 1, 2
KEY_WORDS = ("XXX", "XYY", "YXY", "YYX")
CLEAN, CHEAT_SUSPECTED = "CLEAN", "CHEAT_SUSPECTED"


@dataclass(frozen=True)
class StabilizerElement:
    sign: int
    word: str

    def matrix(self) -> np.ndarray:
        m = np.array([[1.0 + 0j]])
        for ch in self.word:
            m = np.kron(m, PAULI[ch])
        return self.sign * m

    def __str__(self):
        return ("-" if self.sign < 0 else "") + self.word


def conference_state(p: float) -> StateVector:
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    s = 1 / math.sqrt(2)
    plus_x, minus_x = np.array([s, s]), np.array([s, -s])
    amps = math.sqrt(p) * np.kron(plus_x, PHI_PLUS) + math.sqrt(1 - p) * np.kron(minus_x, PHI_MINUS)
    return StateVector(amps, PARTIES)


def stabilizer_group() -> list[StabilizerElement]:
    """The eight signed Pauli words with GHZ as joint +1 eigenstate.

    Each element is checked against GHZ and the set is checked for closure.
    """
    elems = [StabilizerElement(s, w) for s, w in [
        (1, "III"), (1, "XXX"), (1, "ZZI"), (1, "IZZ"), (1, "ZIZ"),
        (-1, "YXY"), (-1, "YYX"), (-1, "XYY"),
    ]]
    g = ghz(PARTIES).amplitudes
    for e in elems:
        val = np.vdot(g, e.matrix() @ g).real
        if abs(val - 1) > 1e-12:
            raise ArithmeticError(f"{e} does not stabilize GHZ ({val})")
    mats = [e.matrix() for e in elems]
    for a in mats:
        for b in mats:
            if not any(np.allclose(a @ b, c, atol=1e-12) for c in mats):
                raise ArithmeticError("stabilizer set is not closed under multiplication")
    return elems


def word_sign(word: str, state: StateVector | None = None) -> int:
    """Sign of the perfect correlation of ``word`` on GHZ (or ``state``)."""
    state = state if state is not None else ghz(PARTIES)
    val = expectation(state, [PAULI[c] for c in word])
    return 1 if val >= 0 else -1


def correlation_tables(state: StateVector | None = None) -> dict[str, list[tuple[int, int, int]]]:
    """Outcome triples with nonzero probability for each key combination."""
    state = state if state is not None else ghz(PARTIES)
    eig = {
        "X": {1: np.array([1, 1]) / math.sqrt(2), -1: np.array([1, -1]) / math.sqrt(2)},
        "Y": {1: np.array([1, 1j]) / math.sqrt(2), -1: np.array([1, -1j]) / math.sqrt(2)},
    }
    tables = {}
    for word in KEY_WORDS:
        rows = []
        for out in itertools.product((1, -1), repeat=3):
            v = np.kron(np.kron(eig[word[0]][out[0]], eig[word[1]][out[1]]), eig[word[2]][out[2]])
            if abs(np.vdot(v, state.amplitudes)) ** 2 > 1e-12:
                rows.append(out)
        tables[word] = rows
    return tables


def conference_qber_analytic(p: float) -> dict[str, float]:
    """Per-combination error rates; ``overall`` weights the four kept triples equally."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    q = 0.5 * (math.sqrt(1 - p) - math.sqrt(p)) ** 2
    out = {"XXX": 0.0, "XYY": 0.0, "YXY": q, "YYX": q}
    out["overall"] = sum(out[w] for w in KEY_WORDS) / 4
    return out


def projector_qber(p: float, word: str) -> float:
    """Probability that the outcome product contradicts the GHZ table sign for ``word``."""
    state = conference_state(p)
    sign = word_sign(word)
    eig = {
        "X": {1: np.array([1, 1]) / math.sqrt(2), -1: np.array([1, -1]) / math.sqrt(2)},
        "Y": {1: np.array([1, 1j]) / math.sqrt(2), -1: np.array([1, -1j]) / math.sqrt(2)},
    }
    total = 0.0
    for out in itertools.product((1, -1), repeat=3):
        if out[0] * out[1] * out[2] != sign:
            v = np.kron(np.kron(eig[word[0]][out[0]], eig[word[1]][out[1]]), eig[word[2]][out[2]])
            total += abs(np.vdot(v, state.amplitudes)) ** 2
    return float(total)


# -- tripartite Bell expression -----------------------------------------------


def bell_settings(theta: float) -> dict[str, Observable]:
    c, s = math.cos(theta), math.sin(theta)
    return {
        "A1": PZ, "A2": PX,
        "B1": Observable.pauli(x=c, z=s, label="B1"),
        "B2": Observable.pauli(x=-c, z=s, label="B2"),
        "C1": PX,
    }


def bell_I(p: float, theta: float) -> float:
    """``<A1(B1 + B2) + A2(B1 - B2)C1>`` evaluated on the conference state."""
    st = conference_state(p)
    s = bell_settings(theta)
    return (
        expectation(st, [s["A1"], s["B1"], None])
        + expectation(st, [s["A1"], s["B2"], None])
        + expectation(st, [s["A2"], s["B1"], s["C1"]])
        - expectation(st, [s["A2"], s["B2"], s["C1"]])
    )


def bell_I_closed_form(p: float, theta: float) -> float:
    """Closed form of :func:`bell_I`: ``2 cos(theta) + 4 sqrt(p(1-p)) sin(theta)``."""
    return 2 * math.cos(theta) + 4 * math.sqrt(p * (1 - p)) * math.sin(theta)


def optimal_theta(p: float) -> float:
    return math.acos(1 / math.sqrt(1 + 4 * p * (1 - p)))


def optimal_violation(p: float) -> float:
    return 2 * math.sqrt(1 + 4 * p * (1 - p))


# -- protocol rounds -----------------------------------------------------------


def menus(secure: bool, theta: float | None = None):
    if not secure:
        return [[PX, PY], [PX, PY], [PX, PY]]
    c, s = math.cos(theta), math.sin(theta)
    return [
        [PX, PY, PZ],
        [PX, PY, Observable.pauli(x=c, z=s, label="B3"), Observable.pauli(x=-c, z=s, label="B4")],
        [PX, PY, None],
    ]


# 0-based (A, B, C) setting indices
SECURE_KEY = {(0, 0, 0): "XXX", (0, 1, 1): "XYY", (1, 0, 1): "YXY", (1, 1, 0): "YYX"}
SECURE_TEST = ((2, 2, 2), (2, 3, 2), (0, 2, 0), (0, 3, 0))
TEST_SIGNS = (1, 1, 1, -1)
PLAIN_KEY = {(0, 0, 0): "XXX", (0, 1, 1): "XYY", (1, 0, 1): "YXY", (1, 1, 0): "YYX"}


def disposition_of(settings: tuple[int, int, int], secure: bool) -> int:
    if secure:
        if settings in SECURE_KEY:
            return KEY
        return BELL_TEST if settings in SECURE_TEST else DISCARD
    return KEY if settings in PLAIN_KEY else DISCARD


CSV_COLUMNS = ("p", "mode", "qber_xxx", "qber_xyy", "qber_yxy", "qber_yyx", "qber_overall",
               "key_rate", "bell_expected", "bell_measured", "verdict")


@dataclass
class ConferenceRecord:
    settings: np.ndarray
    outcomes: np.ndarray  # 0 where Charlie's setting is the identity
    disposition: np.ndarray

    def key_bits(self) -> np.ndarray:
        """Raw bits (0 for +1) of all three parties on KEY rounds, shape (keys, 3)."""
        mask = self.disposition == KEY
        return ((1 - self.outcomes[mask]) // 2).astype(np.int8)


@dataclass
class ConferenceReport:
    p: float
    secure: bool
    rounds: int
    qber_mc: dict[str, float]
    qber_expected: dict[str, float]
    counts: dict[str, int]
    key_rate: float
    key_rate_expected: float
    bell_expected: float
    bell_measured: float
    test_counts: tuple[int, ...]
    test_correlators_expected: tuple[float, ...]
    verdict: str = ""

    def row(self) -> list:
        f = lambda x: repr(float(x))  # noqa: E731
        q = self.qber_mc
        return [f(self.p), "secure" if self.secure else "plain", f(q["XXX"]), f(q["XYY"]), f(q["YXY"]),
                f(q["YYX"]), f(q["overall"]), f(self.key_rate), f(self.bell_expected),
                f(self.bell_measured), self.verdict]


def run_conference(p: float, rounds: int, seed: int = 0, secure: bool = False, *,
                   intercept_prob: float = 0.0, eve_target: str = "B", eve_bases=("X", "Y", "Z"),
                   flip_prob: float = 0.0) -> tuple[ConferenceRecord, ConferenceReport]:
    """Simulate conference-key rounds; ``secure`` adds the Bell-test menu (36 combinations)."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    state = conference_state(p)
    theta = optimal_theta(p) if secure else None
    mns = menus(secure, theta)
    if intercept_prob > 0:
        parts = _engine.intercept_resend(state, eve_target, intercept_prob, eve_bases)
    else:
        parts = [(1.0, state)]
    comps = [(w, _engine.joint_table(rho, mns)) for w, rho in parts]
    flip = {PARTIES.index("B"): flip_prob} if flip_prob else None
    smp = _engine.sample(comps, mns, rounds, seed, flip=flip)
    s = smp.settings
    sizes = [len(m) for m in mns]
    codes = np.full(sizes, DISCARD, dtype=np.int8)
    for combo in itertools.product(*[range(k) for k in sizes]):
        codes[combo] = disposition_of(combo, secure)
    disp = codes[s[:, 0], s[:, 1], s[:, 2]]
    prod = smp.outcomes.astype(int).prod(axis=1)

    key_map = SECURE_KEY if secure else PLAIN_KEY
    q_mc, counts = {}, {}
    errors_total = 0
    for combo, word in key_map.items():
        m = (s[:, 0] == combo[0]) & (s[:, 1] == combo[1]) & (s[:, 2] == combo[2])
        counts[word] = int(m.sum())
        err = int(np.sum(prod[m] != word_sign(word)))
        errors_total += err
        q_mc[word] = err / counts[word] if counts[word] else math.nan
    nkey = sum(counts.values())
    q_mc["overall"] = errors_total / nkey if nkey else math.nan

    bell_mc, t_counts, t_exp = math.nan, (), ()
    if secure:
        o = smp.outcomes.astype(int)
        corr, cnt = [], []
        for combo in SECURE_TEST:
            m = (s[:, 0] == combo[0]) & (s[:, 1] == combo[1]) & (s[:, 2] == combo[2])
            cnt.append(int(m.sum()))
            vals = o[m, 0] * o[m, 1] * np.where(o[m, 2] == 0, 1, o[m, 2])
            corr.append(float(vals.mean()) if m.any() else math.nan)
        bell_mc = sum(sg * c for sg, c in zip(TEST_SIGNS, corr))
        t_counts = tuple(cnt)
        t_exp = tuple(
            expectation(state, [mns[0][a], mns[1][b], mns[2][c]]) for a, b, c in SECURE_TEST
        )

    report = ConferenceReport(
        p=p, secure=secure, rounds=rounds, qber_mc=q_mc, qber_expected=conference_qber_analytic(p),
        counts=counts, key_rate=nkey / rounds, key_rate_expected=(4 / 36 if secure else 4 / 8),
        bell_expected=optimal_violation(p) if secure else math.nan, bell_measured=bell_mc,
        test_counts=t_counts, test_correlators_expected=t_exp,
    )
    report.verdict = supervise_conference(report)
    return ConferenceRecord(s, smp.outcomes, disp), report


def supervise_conference(report: ConferenceReport) -> str:
    ok = True
    for word in KEY_WORDS:
        q, n = report.qber_expected[word], report.counts[word]
        ok &= _engine.gate(report.qber_mc[word], q, math.sqrt(q * (1 - q) / max(n, 1)), n)
    r = report.key_rate_expected
    ok &= _engine.gate(report.key_rate, r, math.sqrt(r * (1 - r) / report.rounds), report.rounds)
    if report.secure:
        var = sum((1 - e * e) / max(c, 1) for e, c in zip(report.test_correlators_expected, report.test_counts))
        ok &= _engine.gate(report.bell_measured, report.bell_expected, math.sqrt(var), min(report.test_counts))
    return CLEAN if ok else CHEAT_SUSPECTED
