"""Controlled key distribution: controller collapse, Ekert-style sifting, CHSH test and supervision.

Alice and Bob hold qubits ``A`` and ``B``; the controller Charlie holds ``C``
(and Dennis holds ``D`` for four-qubit resources). Every public message is
appended to a :class:`PublicChannel` in the order it is sent.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

from . import _engine
from .qcore import (
    PX,
    PZ,
    JointBasis,
    Observable,
    QubitBasis,
    StateVector,
    concurrence,
    measure,
)
from .states import BELL_KETS, four_general, nmm

KEYRATE_ONLY = "KEYRATE_ONLY"
WITH_SECURITY = "WITH_SECURITY"
MODES = (KEYRATE_ONLY, WITH_SECURITY)

KEY, BELL_TEST, DISCARD = 0, 1, 2
CLEAN, CHEAT_SUSPECTED, NO_KEY_POSSIBLE = "CLEAN", "CHEAT_SUSPECTED", "NO_KEY_POSSIBLE"

# (Alice index, Bob index) pairs of the three-setting security round, 0-based
SECURITY_KEY_PAIRS = ((1, 0), (2, 1))
SECURITY_TEST_PAIRS = ((0, 0), (0, 2), (2, 0), (2, 2))
CHSH_SIGNS = (1, 1, 1, -1)


@dataclass(frozen=True)
class Message:
    sender: str
    topic: str
    payload: Any


@dataclass
class PublicChannel:
    """Authenticated public broadcast, modelled as an append-only message log."""

    messages: list[Message] = field(default_factory=list)

    def announce(self, sender: str, topic: str, payload: Any) -> None:
        self.messages.append(Message(sender, topic, payload))

    def topics(self) -> list[tuple[str, str]]:
        return [(m.sender, m.topic) for m in self.messages]


# -- controller collapse -------------------------------------------------------


@dataclass(frozen=True)
class CollapseBranch:
    outcome: str
    probability: float
    state: StateVector | None
    norm: float
    ratio: complex


def canonical_form(state: StateVector) -> tuple[float, complex]:
    """``(N, n)`` with ``state = N(|00> + n|11>)`` up to a global phase.

    A state proportional to ``|11>`` is returned as ``(0.0, inf)``.
    """
    a = state.amplitudes
    if state.num_qubits != 2 or abs(a[1]) > 1e-12 or abs(a[2]) > 1e-12:
        raise ValueError("state is not of the form N(|00> + n|11>)")
    if abs(a[0]) < 1e-14:
        return 0.0, complex(math.inf)
    ratio = a[3] / a[0]
    if abs(ratio.imag) < 1e-13:
        ratio = complex(ratio.real, 0.0)
    return float(abs(a[0])), ratio


def closed_form_canonical(p: float, n: complex) -> tuple[tuple[float, complex], tuple[float, complex]]:
    """Branch normalizations and ratios from the printed closed forms (may carry a phase on N)."""
    N = 1 / math.sqrt(1 + abs(n) ** 2)
    nc = complex(n).conjugate()
    sp, sq = math.sqrt(p), math.sqrt(1 - p)
    p_plus = N**2 * (p + abs(n) ** 2 * (1 - p))
    p_minus = N**2 * (p * abs(n) ** 2 + (1 - p))
    den1, den2 = sp + nc * sq, sq - n * sp
    n1 = (sp - nc * sq) / den1 if abs(den1) > 1e-14 else complex(math.inf)
    n2 = (-sq - n * sp) / den2 if abs(den2) > 1e-14 else complex(math.inf)
    N1 = N * den1 / math.sqrt(2 * p_plus)
    N2 = N * den2 / math.sqrt(2 * p_minus)
    return (N1, n1), (N2, n2)


def collapse_three(p: float, n: complex) -> list[CollapseBranch]:
    """Charlie measures ``C`` of the NMM resource in the ``|+-_n>`` basis."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    out = []
    for b in measure(nmm(p), QubitBasis(n), ["C"]):
        if b.empty:
            out.append(CollapseBranch(b.outcome, b.probability, None, 0.0, complex(math.nan)))
        else:
            N, ratio = canonical_form(b.state)
            out.append(CollapseBranch(b.outcome, b.probability, b.state, N, ratio))
    return out


def branch_state(p: float, n: complex, outcome: str) -> StateVector:
    for b in collapse_three(p, n):
        if b.outcome == outcome:
            if b.state is None:
                raise ValueError(f"branch {outcome!r} has zero probability at p={p}, n={n}")
            return b.state
    raise ValueError(f"unknown outcome {outcome!r}")


# -- analytic quantities -------------------------------------------------------


def qber_analytic(p: float, n: float) -> float:
    """Closed-form error rate of the ``+`` branch: ``n^2(1-p) / (2(n^2(1-p) + p))``."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    x = n * n * (1 - p)
    return x / (2 * (x + p))


def basis_observable(n: complex) -> Observable:
    """Dichotomic observable ``|+_n><+_n| - |-_n><-_n|``."""
    (_, plus), (_, minus) = QubitBasis(n).kets()
    return Observable(np.outer(plus, plus.conj()) - np.outer(minus, minus.conj()), f"n={n}")


def qber_enumerated(state, basis_n: complex = 1.0) -> float:
    """Basis-averaged mismatch probability summed over the projector pairs.

    Enumerates ``Tr(P0 x P1 rho) + Tr(P1 x P0 rho)`` in the computational
    basis and ``Tr(P+ x P- rho) + Tr(P- x P+ rho)`` in the ``n`` basis, and
    averages the two (each basis is used in half of the matched rounds).
    """
    return 0.5 * sum(mismatch_by_basis(state, basis_n))


def mismatch_by_basis(state, basis_n: complex = 1.0) -> tuple[float, float]:
    from .qcore import _as_density

    rho = _as_density(state).entries
    res = []
    for basis in (QubitBasis(0.0), QubitBasis(basis_n)):
        (_, k0), (_, k1) = basis.kets()
        total = 0.0
        for a, b in ((k0, k1), (k1, k0)):
            v = np.kron(a, b)
            total += float(np.vdot(v, rho @ v).real)
        res.append(total)
    return res[0], res[1]


def relative_key_rate(Q: float) -> float:
    """``1 + Q log2 Q + (1-Q) log2(1-Q)`` on ``[0, 1/2]``."""
    if not 0 <= Q <= 0.5:
        raise ValueError(f"QBER {Q} outside [0, 1/2]")
    h = 0.0
    for x in (Q, 1 - Q):
        if x > 0:
            h -= x * math.log2(x)
    return 1 - h


@dataclass(frozen=True)
class SecuritySettings:
    alice: tuple[Observable, Observable, Observable]
    bob: tuple[Observable, Observable, Observable]
    theta: float
    chsh_optimal: float


def security_settings(norm: float, ratio) -> SecuritySettings:
    """Three settings per party for a collapsed state ``N(|00> + n|11>)`` with real ``n``.

    ``sin(theta)`` takes the sign of ``n`` so the CHSH combination stays at its
    optimum ``2 sqrt(1 + 4 n^2 N^4)`` for negative ratios too.
    """
    ratio = complex(ratio)
    if abs(ratio.imag) > 1e-12:
        raise ValueError("security settings need a real ratio n")
    n = ratio.real
    if math.isinf(n):
        s = 0.0
    else:
        s = 2 * n * norm**2
    c = 1 / math.sqrt(1 + s * s)
    sn = s * c
    theta = math.atan2(sn, c)
    A = (PZ, Observable.pauli(x=sn, z=c, label="A2"), PX)
    B = (Observable.pauli(x=sn, z=c, label="B1"), PX, Observable.pauli(x=-sn, z=c, label="B3"))
    return SecuritySettings(A, B, theta, 2 * math.sqrt(1 + s * s))


def settings_for_state(state: StateVector) -> SecuritySettings:
    return security_settings(*canonical_form(state))


# -- round simulation ----------------------------------------------------------


@dataclass
class SiftingRecord:
    """Per-round ledger. Columns of ``settings``/``outcomes`` are (Alice, Bob)."""

    settings: np.ndarray
    outcomes: np.ndarray
    disposition: np.ndarray
    branch: np.ndarray
    key_sign: np.ndarray  # expected product of outcomes on KEY rounds, 0 elsewhere

    @property
    def rounds(self) -> int:
        return len(self.disposition)

    def key_bits(self) -> tuple[np.ndarray, np.ndarray]:
        """Raw key bits (0 for +1) of Alice and Bob; Bob flips on anti-correlated pairs."""
        mask = self.disposition == KEY
        a = self.outcomes[mask, 0]
        b = self.outcomes[mask, 1] * self.key_sign[mask]
        return ((1 - a) // 2).astype(np.int8), ((1 - b) // 2).astype(np.int8)


REPORT_COLUMNS = (
    "p", "n", "branch", "branch_probability", "norm", "ratio", "mode", "rounds",
    "qber_analytic", "qber_mc", "sifted_rate", "sifted_rate_expected", "relative_rate",
    "chsh_expected", "chsh_mc", "concurrence", "verdict",
)


@dataclass
class ProtocolReport:
    mode: str
    rounds: int
    qber_analytic: float
    qber_mc: float
    key_count: int
    sifted_rate: float
    sifted_rate_expected: float
    relative_rate: float
    chsh_expected: float
    chsh_mc: float
    test_counts: tuple[int, ...]
    test_correlators_expected: tuple[float, ...]
    concurrence: float
    p: float | None = None
    n: complex | None = None
    branch: str = ""
    branch_probability: float = 1.0
    norm: float = math.nan
    ratio: complex = complex(math.nan)
    basis_n: complex = 1.0
    verdict: str = ""

    def row(self) -> list:
        def num(x):
            if x is None:
                return ""
            if isinstance(x, complex):
                return repr(x.real) if x.imag == 0 else f"{x.real!r}{x.imag:+}i"
            return repr(float(x)) if isinstance(x, (float, np.floating)) else x

        values = {f.name: getattr(self, f.name) for f in fields(self)}
        return [num(values[c]) for c in REPORT_COLUMNS]

    def summary(self) -> str:
        lines = [
            f"mode            {self.mode}  rounds={self.rounds}",
            f"branch          {self.branch or '-'}  (p={self.branch_probability:.6f})",
            f"QBER            analytic={self.qber_analytic:.6f}  mc={self.qber_mc:.6f}"
            f"  delta={self.qber_mc - self.qber_analytic:+.2e}",
            f"sifted rate     expected={self.sifted_rate_expected:.6f}  mc={self.sifted_rate:.6f}",
            f"relative rate   {self.relative_rate:.6f}",
        ]
        if self.mode == WITH_SECURITY:
            lines.append(f"CHSH            expected={self.chsh_expected:.6f}  mc={self.chsh_mc:.6f}")
        lines.append(f"verdict         {self.verdict}")
        return "\n".join(lines)


def _menus(mode: str, settings: SecuritySettings | None, basis_n):
    if mode == KEYRATE_ONLY:
        obs = basis_observable(basis_n)
        return [[PZ, obs], [PZ, obs]]
    return [list(settings.alice), list(settings.bob)]


def _pair_tables(mode: str):
    """Disposition of each (Alice, Bob) setting pair."""
    if mode == KEYRATE_ONLY:
        disp = np.full((2, 2), DISCARD, dtype=np.int8)
        disp[0, 0] = disp[1, 1] = KEY
        return disp, (), ()
    disp = np.full((3, 3), DISCARD, dtype=np.int8)
    for pr in SECURITY_KEY_PAIRS:
        disp[pr] = KEY
    for pr in SECURITY_TEST_PAIRS:
        disp[pr] = BELL_TEST
    return disp, SECURITY_KEY_PAIRS, SECURITY_TEST_PAIRS


@dataclass
class _Expectation:
    qber: float
    sifted_rate: float
    chsh: float
    correlators: tuple[float, ...]
    key_signs: np.ndarray
    concurrence: float


def _expect(state: StateVector, mode: str, basis_n) -> _Expectation:
    from .qcore import expectation

    if mode == KEYRATE_ONLY:
        signs = np.ones((2, 2), dtype=np.int8)
        return _Expectation(qber_enumerated(state, basis_n), 0.5, math.nan, (), signs, concurrence(state))
    st = settings_for_state(state)
    signs = np.zeros((3, 3), dtype=np.int8)
    errs = []
    for i, j in SECURITY_KEY_PAIRS:
        e = expectation(state, [st.alice[i], st.bob[j]])
        sign = 1 if e >= 0 else -1
        signs[i, j] = sign
        errs.append((1 - sign * e) / 2)
    corr = tuple(expectation(state, [st.alice[i], st.bob[j]]) for i, j in SECURITY_TEST_PAIRS)
    chsh = sum(s * c for s, c in zip(CHSH_SIGNS, corr))
    return _Expectation(float(np.mean(errs)), 2 / 9, chsh, corr, signs, concurrence(state))


def _tally(samples, disposition_table, signs_by_component, mode):
    s = samples.settings
    disp = disposition_table[s[:, 0], s[:, 1]]
    key_sign = np.where(disp == KEY, signs_by_component[samples.component, s[:, 0], s[:, 1]], 0)
    prod = samples.outcomes[:, 0].astype(int) * samples.outcomes[:, 1]
    key = disp == KEY
    errors = int(np.sum(key & (prod != key_sign)))
    nkey = int(key.sum())
    counts, corr = [], []
    if mode == WITH_SECURITY:
        for i, j in SECURITY_TEST_PAIRS:
            m = (s[:, 0] == i) & (s[:, 1] == j)
            counts.append(int(m.sum()))
            corr.append(float(prod[m].mean()) if m.any() else math.nan)
    return disp, key_sign.astype(np.int8), nkey, errors, counts, corr


def _attack_components(state, weight, intercept_prob, eve_bases):
    if intercept_prob <= 0:
        return [(weight, state)]
    return [(weight * w, rho) for w, rho in _engine.intercept_resend(state, "B", intercept_prob, eve_bases)]


def run_rounds(
    collapsed: StateVector,
    rounds: int,
    mode: str = KEYRATE_ONLY,
    seed: int = 0,
    *,
    basis_n: complex = 1.0,
    flip_prob: float = 0.0,
    intercept_prob: float = 0.0,
    eve_bases=("Z", "X"),
    channel: PublicChannel | None = None,
) -> tuple[SiftingRecord, ProtocolReport]:
    """Run Alice and Bob's rounds on an already-collapsed two-qubit state.

    ``flip_prob`` makes Bob invert that fraction of his announced outcomes;
    ``intercept_prob`` lets an eavesdropper measure and resend Bob's qubit.
    The report's analytic fields always describe the honest protocol.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if collapsed.num_qubits != 2:
        raise ValueError("collapsed state must have two qubits")
    collapsed = collapsed.relabel(("A", "B"))
    channel = channel if channel is not None else PublicChannel()
    exp = _expect(collapsed, mode, basis_n)
    settings = settings_for_state(collapsed) if mode == WITH_SECURITY else None
    menus = _menus(mode, settings, basis_n)
    parts = _attack_components(collapsed, 1.0, intercept_prob, eve_bases)
    comps = [(w, _engine.joint_table(rho, menus)) for w, rho in parts]
    samples = _engine.sample(comps, menus, rounds, seed, flip={1: flip_prob} if flip_prob else None)
    signs = np.repeat(exp.key_signs[None], len(comps), axis=0)
    disp_table, _, _ = _pair_tables(mode)
    disp, key_sign, nkey, errors, counts, corr = _tally(samples, disp_table, signs, mode)

    channel.announce("Alice", "settings", samples.settings[:, 0].copy())
    channel.announce("Bob", "settings", samples.settings[:, 1].copy())
    report = _report(mode, rounds, exp, nkey, errors, counts, corr)
    report.basis_n = basis_n
    channel.announce("Alice+Bob", "report", {"qber": report.qber_mc, "sifted_rate": report.sifted_rate,
                                              "chsh": report.chsh_mc})
    report.norm, report.ratio = _safe_canonical(collapsed)
    report.verdict = supervise(report)
    record = SiftingRecord(samples.settings, samples.outcomes, disp, np.zeros(rounds, np.int8), key_sign)
    return record, report


def _safe_canonical(state):
    try:
        return canonical_form(state)
    except ValueError:
        return math.nan, complex(math.nan)


def _report(mode, rounds, exp: _Expectation, nkey, errors, counts, corr) -> ProtocolReport:
    qmc = errors / nkey if nkey else math.nan
    rel = relative_key_rate(min(qmc, 0.5)) if nkey else math.nan
    chsh_mc = sum(s * c for s, c in zip(CHSH_SIGNS, corr)) if corr else math.nan
    return ProtocolReport(
        mode=mode, rounds=rounds, qber_analytic=exp.qber, qber_mc=qmc, key_count=nkey,
        sifted_rate=nkey / rounds, sifted_rate_expected=exp.sifted_rate, relative_rate=rel,
        chsh_expected=exp.chsh, chsh_mc=chsh_mc, test_counts=tuple(counts),
        test_correlators_expected=exp.correlators, concurrence=exp.concurrence,
    )


def run_controlled(
    p: float,
    n: float,
    rounds: int,
    mode: str = KEYRATE_ONLY,
    seed: int = 0,
    *,
    basis_n: complex = 1.0,
    flip_prob: float = 0.0,
    intercept_prob: float = 0.0,
    eve_bases=("Z", "X"),
    channel: PublicChannel | None = None,
) -> tuple[SiftingRecord, ProtocolReport]:
    """Full protocol on the NMM resource, Charlie's measurement included.

    Each round Charlie measures in the ``n`` basis and announces basis and
    outcome before Alice and Bob choose settings; statistics pool both branches.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    channel = channel if channel is not None else PublicChannel()
    branches = [b for b in collapse_three(p, n) if b.state is not None]
    comps, signs, owner = [], [], []
    exps = []
    menus = None
    for bi, br in enumerate(branches):
        st = br.state
        exp = _expect(st, mode, basis_n)
        exps.append(exp)
        settings = settings_for_state(st) if mode == WITH_SECURITY else None
        menus = _menus(mode, settings, basis_n)
        for w, rho in _attack_components(st, br.probability, intercept_prob, eve_bases):
            comps.append((w, _engine.joint_table(rho, menus)))
            signs.append(exp.key_signs)
            owner.append(bi)
    channel.announce("Charlie", "basis", n)
    samples = _engine.sample(comps, menus, rounds, seed, flip={1: flip_prob} if flip_prob else None)
    branch_of_round = np.array(owner, dtype=np.int8)[samples.component]
    channel.announce("Charlie", "outcomes", np.array([branches[i].outcome for i in branch_of_round]))
    disp_table, _, _ = _pair_tables(mode)
    disp, key_sign, nkey, errors, counts, corr = _tally(samples, disp_table, np.stack(signs), mode)
    channel.announce("Alice", "settings", samples.settings[:, 0].copy())
    channel.announce("Bob", "settings", samples.settings[:, 1].copy())

    weights = [b.probability for b in branches]
    pooled = _Expectation(
        qber=sum(w * e.qber for w, e in zip(weights, exps)),
        sifted_rate=exps[0].sifted_rate,
        chsh=sum(w * e.chsh for w, e in zip(weights, exps)),
        correlators=tuple(np.sum([np.array(e.correlators) * w for w, e in zip(weights, exps)], axis=0))
        if mode == WITH_SECURITY else (),
        key_signs=exps[0].key_signs,
        concurrence=sum(w * e.concurrence for w, e in zip(weights, exps)),
    )
    report = _report(mode, rounds, pooled, nkey, errors, counts, corr)
    report.p, report.n, report.branch, report.basis_n = p, n, "mix", basis_n
    channel.announce("Alice+Bob", "report", {"qber": report.qber_mc, "sifted_rate": report.sifted_rate,
                                              "chsh": report.chsh_mc})
    report.verdict = supervise(report)
    record = SiftingRecord(samples.settings, samples.outcomes, disp, branch_of_round, key_sign)
    return record, report


def run_branch(p: float, n: float, outcome: str, rounds: int, mode: str = KEYRATE_ONLY, seed: int = 0,
               **kwargs) -> tuple[SiftingRecord, ProtocolReport]:
    """Rounds conditioned on Charlie's announced ``outcome`` (``'+'`` or ``'-'``)."""
    br = next(b for b in collapse_three(p, n) if b.outcome == outcome)
    if br.state is None:
        raise ValueError(f"branch {outcome!r} has zero probability")
    record, report = run_rounds(br.state, rounds, mode, seed, **kwargs)
    report.p, report.n, report.branch, report.branch_probability = p, n, outcome, br.probability
    if outcome == "+" and mode == KEYRATE_ONLY and kwargs.get("basis_n", 1.0) == 1.0:
        report.qber_analytic = qber_analytic(p, n)
    report.verdict = supervise(report)
    return record, report


def supervise(report: ProtocolReport, expected: tuple[float, float] | None = None) -> str:
    """Charlie's verdict on a run.

    With ``expected = (p, n)`` Charlie recomputes what the honest statistics
    should be from the state he prepared; otherwise the report's own
    analytic fields are used.
    """
    exp = _Expectation(report.qber_analytic, report.sifted_rate_expected, report.chsh_expected,
                       report.test_correlators_expected, np.zeros(0), report.concurrence)
    if expected is not None:
        p, n = expected
        basis_n = report.basis_n
        if report.branch in ("+", "-"):
            exp = _expect(branch_state(p, n, report.branch).relabel(("A", "B")), report.mode, basis_n)
        else:
            brs = [b for b in collapse_three(p, n) if b.state is not None]
            es = [_expect(b.state, report.mode, basis_n) for b in brs]
            w = [b.probability for b in brs]
            exp = _Expectation(
                sum(x * e.qber for x, e in zip(w, es)), es[0].sifted_rate,
                sum(x * e.chsh for x, e in zip(w, es)),
                tuple(np.sum([np.array(e.correlators) * x for x, e in zip(w, es)], axis=0))
                if report.mode == WITH_SECURITY else (),
                np.zeros(0), sum(x * e.concurrence for x, e in zip(w, es)),
            )
    if exp.concurrence < 1e-6:
        return NO_KEY_POSSIBLE
    q = exp.qber
    ok = _engine.gate(report.qber_mc, q, math.sqrt(q * (1 - q) / max(report.key_count, 1)), report.key_count)
    r = exp.sifted_rate
    ok &= _engine.gate(report.sifted_rate, r, math.sqrt(r * (1 - r) / report.rounds), report.rounds)
    if report.mode == WITH_SECURITY:
        var = sum((1 - e * e) / max(c, 1) for e, c in zip(exp.correlators, report.test_counts))
        ok &= _engine.gate(report.chsh_mc, exp.chsh, math.sqrt(var), min(report.test_counts))
    return CLEAN if ok else CHEAT_SUSPECTED


# -- measuring a maximally mixed control qubit ----------------------------------


def second_qubit_limit(p: float, n: complex) -> tuple[float, tuple[float, float]]:
    """Charlie measures Alice's (maximally mixed) qubit instead of his own.

    Returns the larger branch concurrence of the remaining (C, B) pair and
    both branch concurrences.
    """
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    cs = []
    for b in measure(nmm(p), QubitBasis(n), ["A"]):
        cs.append(0.0 if b.empty else concurrence(b.state))
    return max(cs), (cs[0], cs[1])


# -- four-qubit resources ------------------------------------------------------


def _bell_assignment(kets) -> list[str] | None:
    names = []
    for k in kets:
        for name, ref in BELL_KETS.items():
            if abs(abs(np.vdot(ref, k)) - 1) < 1e-12:
                names.append(name)
                break
        else:
            return None
    return names if len(set(names)) == 4 else None


def q1_formula(alpha: float, beta: float) -> float:
    return beta**2 / (1 + beta**2) + alpha**2 / (1 + alpha**2)


def q2_formula(m: float) -> float:
    return m**2 / (1 + m**2)


@dataclass
class FourQubitReport:
    path: str
    outcome: str
    probability: float
    state: StateVector
    q_formula: float
    qber_analytic: float
    mismatch_sum: float
    agree: bool
    protocol: ProtocolReport | None = None

    @property
    def qber_mc(self) -> float:
        return self.protocol.qber_mc if self.protocol else math.nan


def four_qubit_run(
    resource: StateVector | None = None,
    *,
    beta: float | None = None,
    alpha: float | None = None,
    m: float | None = None,
    kets=None,
    rounds: int = 0,
    seed: int = 0,
    basis_n: complex = 1.0,
    compare_formula: bool = True,
    channel: PublicChannel | None = None,
) -> FourQubitReport:
    """Controller collapse on a ``(D, C, A, B)`` resource, then the key rounds.

    Either Dennis (``beta``) and then Charlie (``alpha``) measure single
    qubits, keeping the ``(+, +)`` outcome, or Charlie measures both
    controller qubits jointly in the generalized Bell basis ``m`` keeping
    ``chi+``. The oracle QBER is the enumerated basis-averaged mismatch.
    """
    kets = kets if kets is not None else ("phi+", "phi-", "psi+", "psi-")
    if resource is None:
        resource = four_general(kets)
    channel = channel if channel is not None else PublicChannel()
    bell_names = _bell_assignment([BELL_KETS[k] if isinstance(k, str) else np.asarray(k, complex) for k in kets])
    if compare_formula and bell_names is None:
        raise ValueError("QBER formulas only apply when phi_1..phi_4 are the four Bell states")

    if m is not None:
        if alpha is not None or beta is not None:
            raise ValueError("give either m or (alpha, beta)")
        br = next(b for b in measure(resource, JointBasis(m), ["D", "C"]) if b.outcome == "chi+")
        channel.announce("Charlie", "joint-basis", m)
        channel.announce("Charlie", "outcome", br.outcome)
        path, outcome, prob, state = "gbs", "chi+", br.probability, br.state
        formula = q2_formula(m)
    else:
        beta = 0.0 if beta is None else beta
        alpha = 0.0 if alpha is None else alpha
        bd = next(b for b in measure(resource, QubitBasis(beta), ["D"]) if b.outcome == "+")
        channel.announce("Dennis", "basis", beta)
        channel.announce("Dennis", "outcome", "+")
        bc = next(b for b in measure(bd.state, QubitBasis(alpha), ["C"]) if b.outcome == "+")
        channel.announce("Charlie", "basis", alpha)
        channel.announce("Charlie", "outcome", "+")
        path, outcome, prob, state = "sequential", "++", bd.probability * bc.probability, bc.state
        formula = q1_formula(alpha, beta)

    mz, mx = mismatch_by_basis(state, basis_n)
    oracle = 0.5 * (mz + mx)
    rep = FourQubitReport(path, outcome, prob, state, formula, oracle, mz + mx,
                          abs(formula - oracle) <= 1e-12)
    if rounds:
        _, rep.protocol = run_rounds(state, rounds, KEYRATE_ONLY, seed, basis_n=basis_n, channel=channel)
    return rep
