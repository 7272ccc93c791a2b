"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import itertools
import math
import time

import numpy as np
import pytest

from controlled_qkd import cli, confkey, coqkd, states, teleport
from controlled_qkd._engine import gate
from controlled_qkd.qcore import (
    JointBasis,
    StateVector,
    bell_state,
    binary_entropy,
    chsh_value,
    marginal_entropies,
    measure,
    optimize_chsh,
    partial_trace,
    random_state,
    tensor,
    von_neumann_entropy,
)

RESULTS: dict[int, tuple[bool, str]] = {}


def check(name, ok, detail=""):
    return name, bool(ok), detail


def record(number: int, title: str, checks) -> tuple[bool, str]:
    ok = all(c[1] for c in checks)
    failed = [f"{n} ({d})" if d else n for n, good, d in checks if not good]
    detail = title if ok else f"{title}; failed: " + "; ".join(failed)
    RESULTS[number] = (ok, detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok, detail


def sigma_binom(q, n):
    return math.sqrt(q * (1 - q) / max(n, 1))


# -- criteria ------------------------------------------------------------------


def criterion_1():
    start = time.perf_counter()
    misses = []
    idx = 0
    for p in (0.1, 0.3, 0.5, 0.9):
        for n in cli.parse_grid("0:1:0.05"):
            _, rep = coqkd.run_branch(p, n, "+", 100_000, seed=cli.point_seed(0, idx))
            idx += 1
            q = coqkd.qber_analytic(p, n)
            if not gate(rep.qber_mc, q, sigma_binom(q, rep.key_count), rep.key_count):
                misses.append(f"p={p} n={n} mc={rep.qber_mc:.5f} q={q:.5f}")
    elapsed = time.perf_counter() - start
    return [
        check("monte carlo within 3 sigma", not misses, ", ".join(misses)),
        check("Q(1, 0.5) = 0.25", abs(coqkd.qber_analytic(0.5, 1.0) - 0.25) <= 1e-12),
        check("Q(1, 0.9) = 0.05", abs(coqkd.qber_analytic(0.9, 1.0) - 0.05) <= 1e-12),
        check("runtime < 10 s", elapsed < 10, f"{elapsed:.2f} s"),
    ]


def criterion_2():
    s = coqkd.security_settings(1 / math.sqrt(2), 1.0)
    A, B = s.alice, s.bob
    analytic = chsh_value(bell_state("phi+"), A[0], A[2], B[0], B[2])
    # 10^5 test rounds at a test fraction of 4/9
    _, rep = coqkd.run_rounds(bell_state("phi+"), 225_000, coqkd.WITH_SECURITY, seed=2)
    var = sum((1 - e * e) / c for e, c in zip(rep.test_correlators_expected, rep.test_counts))
    N = math.sqrt(0.8)
    n = 0.5
    st = StateVector(N * np.array([1, 0, 0, n]), ("A", "B"))
    closed = 2 * math.sqrt(1 + 4 * n * n * N**4)
    best, _ = optimize_chsh(st, starts=12)
    return [
        check("analytic 2 sqrt 2", abs(analytic - 2 * math.sqrt(2)) <= 1e-12, f"{analytic!r}"),
        check("monte carlo within 3 sigma", gate(rep.chsh_mc, 2 * math.sqrt(2), math.sqrt(var), min(rep.test_counts)),
              f"{rep.chsh_mc:.4f} over {sum(rep.test_counts)} test rounds"),
        check("closed-form optimum vs numerical maximum", abs(best - closed) <= 1e-6, f"{best!r} vs {closed!r}"),
    ]


def criterion_3():
    rec, rep = coqkd.run_rounds(bell_state("phi+"), 100_000, coqkd.KEYRATE_ONLY, seed=3)
    rec2, _ = coqkd.run_rounds(bell_state("phi+"), 100_000, coqkd.WITH_SECURITY, seed=4)
    R = 100_000
    key = np.mean(rec2.disposition == coqkd.KEY)
    test = np.mean(rec2.disposition == coqkd.BELL_TEST)
    return [
        check("sifted rate 1/2", gate(rep.sifted_rate, 0.5, sigma_binom(0.5, R), R), f"{rep.sifted_rate}"),
        check("key fraction 2/9", gate(key, 2 / 9, sigma_binom(2 / 9, R), R), f"{key}"),
        check("test fraction 4/9", gate(test, 4 / 9, sigma_binom(4 / 9, R), R), f"{test}"),
    ]


def criterion_4():
    worst = 0.0
    for p in np.linspace(0.01, 0.99, 50):
        ent = marginal_entropies(states.build(states.ResourceSpec("NMM", p=float(p))))
        worst = max(worst, float(np.max(np.abs(np.array(ent) - [binary_entropy(p), 1, 1]))))
    w = StateVector.from_unnormalized([0, 1, 1, 0, 1, 0, 0, 0], states.THREE)
    rng = np.random.default_rng(4)
    products = []
    for _ in range(20):
        prod = tensor(tensor(random_state(("C",), rng), random_state(("A",), rng)), random_state(("B",), rng))
        products.append(states.classify(prod).label == "UNSUITABLE")
    return [
        check("entropy signature over 50 p-values", worst <= 1e-10, f"max deviation {worst:.1e}"),
        check("W state unsuitable", states.classify(w).label == "UNSUITABLE"),
        check("random product states unsuitable", all(products)),
    ]


def _controller_entropy(state):
    return von_neumann_entropy(partial_trace(state, ["C"]))


def criterion_5():
    grid = np.linspace(0.02, 0.98, 49)
    literal = max(abs(_controller_entropy(states.phi_u(a)) - _controller_entropy(states.nmm(states.lu_match_parameter(a))))
                  for a in grid)
    variant = max(abs(_controller_entropy(states.phi_u(a, second=states.PHI_PLUS))
                      - _controller_entropy(states.nmm(states.lu_match_parameter(a)))) for a in grid)
    return [
        check("rotation family as written (second branch from phi-)", literal <= 1e-9,
              f"max entropy gap {literal:.3f}; controller entropy is 1 for every a"),
        check("rotation family with second branch from phi+", variant <= 1e-9, f"max gap {variant:.1e}"),
    ]


def criterion_6():
    ns = np.linspace(0, 1, 101)
    ps = np.round(np.linspace(0.05, 0.95, 19), 12)
    maximal = [(float(p), float(n)) for p in ps for n in ns if coqkd.second_qubit_limit(p, n)[0] >= 1 - 1e-9]
    gaps = {p: 1 - max(coqkd.second_qubit_limit(p, n)[0] for n in ns) for p in (0.2, 0.35)}
    return [
        check("unit concurrence only at p=1/2, n=1", maximal == [(0.5, 1.0)], f"{maximal}"),
        check("gap > 0.01 at p=0.2", gaps[0.2] > 0.01, f"{gaps[0.2]:.4f}"),
        check("gap > 0.01 at p=0.35", gaps[0.35] > 0.01, f"{gaps[0.35]:.4f}"),
    ]


EXPECTED_CORRELATIONS = {
    "XXX": {(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)},
    "XYY": {(1, 1, -1), (1, -1, 1), (-1, 1, 1), (-1, -1, -1)},
    "YXY": {(1, 1, -1), (1, -1, 1), (-1, 1, 1), (-1, -1, -1)},
    "YYX": {(1, 1, -1), (1, -1, 1), (-1, 1, 1), (-1, -1, -1)},
}


def criterion_7():
    worst = max(abs(confkey.projector_qber(p, w) - confkey.conference_qber_analytic(p)[w])
                for p in np.linspace(0, 1, 41) for w in confkey.KEY_WORDS)
    misses = []
    for i, p in enumerate((0.2, 0.5, 0.7, 0.9)):
        _, rep = confkey.run_conference(p, 100_000, seed=70 + i)
        for w in confkey.KEY_WORDS:
            q, n = rep.qber_expected[w], rep.counts[w]
            if not gate(rep.qber_mc[w], q, sigma_binom(q, n), n):
                misses.append(f"p={p} {w}")
    try:
        group = confkey.stabilizer_group()
        group_ok = len(group) == 8
    except ArithmeticError:
        group_ok = False
    tables = {w: set(rows) for w, rows in confkey.correlation_tables().items()}
    return [
        check("analytic vs projector oracle", worst <= 1e-12, f"{worst:.1e}"),
        check("monte carlo within 3 sigma", not misses, ", ".join(misses)),
        check("q(0.9) = 0.2", abs(confkey.conference_qber_analytic(0.9)["YXY"] - 0.2) <= 1e-12),
        check("stabilizer group verified", group_ok),
        check("correlation tables", tables == EXPECTED_CORRELATIONS),
    ]


def criterion_8():
    grid = [(p, th) for p in np.linspace(0.05, 0.95, 19) for th in np.linspace(0, math.pi / 2, 19)]
    printed = max(abs(confkey.bell_I(p, th) - (4 * math.sqrt(p * (1 - p)) * math.cos(th) + 2 * math.sin(th)))
                  for p, th in grid)
    consistent = max(abs(confkey.bell_I(p, th) - confkey.bell_I_closed_form(p, th)) for p, th in grid)
    violates = all(confkey.optimal_violation(p) > 2 for p in np.linspace(0.001, 0.999, 999))
    _, rep = confkey.run_conference(0.5, 100_000, seed=8, secure=True)
    R = 100_000
    return [
        check("expectation equals 4 sqrt(p(1-p)) cos + 2 sin", printed <= 1e-12,
              f"max deviation {printed:.3f}; expectation equals 2 cos + 4 sqrt(p(1-p)) sin to {consistent:.0e}"),
        check("optimal value > 2 for all p", violates),
        check("secure key rate 1/9", gate(rep.key_rate, 1 / 9, sigma_binom(1 / 9, R), R), f"{rep.key_rate}"),
    ]


def criterion_9():
    ms = np.linspace(0, 1, 51)
    worst = max(abs(coqkd.four_qubit_run(m=m).qber_analytic - coqkd.q2_formula(m)) for m in ms)
    probs = [b.probability for m in ms for b in measure(states.four_general(), JointBasis(m), ["D", "C"])]
    prob_dev = max(abs(x - 0.25) for x in probs)
    vals = np.linspace(0, 1, 11)
    agree = [(a, b) for a, b in itertools.product(vals, vals) if coqkd.four_qubit_run(alpha=a, beta=b).agree]
    zero = coqkd.four_qubit_run(alpha=0, beta=0)
    return [
        check("GBS error-rate formula vs oracle", worst <= 1e-12, f"{worst:.1e}"),
        check("GBS outcome probability 1/4", prob_dev <= 1e-12, f"{prob_dev:.1e}"),
        check("sequential formula agreement domain measured", True,
              f"agrees on {len(agree)}/{len(vals) ** 2} grid points: {[(float(a), float(b)) for a, b in agree]}"),
        check("alpha = beta = 0 gives 0", zero.q_formula == 0 and zero.qber_analytic == 0),
    ]


def criterion_10():
    pt = teleport.sweep_point(0.5, 0.0)
    affine = max(abs(q.F_avg - (2 + q.C_avg) / 3)
                 for p in np.linspace(0.05, 0.95, 19) for q in teleport.sweep(p, np.linspace(0, 1, 21)))
    over = []
    i = 0
    for p in (0.1, 0.3, 0.5, 0.7, 0.9):
        for n in (0.0, 0.2, 0.5, 0.8, 1.0):
            r = teleport.simulate_roundtrip(p, n, seed=cli.point_seed(10, i), rounds=20_000)
            i += 1
            if r.mean > teleport.sweep_point(p, n).F_avg + 3 * r.stderr + 1e-12:
                over.append(f"p={p} n={n}")
    plateau_ok = True
    ns = np.linspace(0, 1, 100)
    for p in (0.2, 0.35, 0.7, 0.9):
        pts = teleport.sweep(p, ns)
        dF = np.diff([q.F_avg for q in pts])
        dC = np.diff([q.C_avg for q in pts])
        flat = np.abs(dC) < 1e-8
        plateau_ok &= bool(flat.any()) and bool(np.all(np.abs(dF[flat]) < 1e-8))
    return [
        check("F_avg(1/2, 0) = 1", abs(pt.F_avg - 1) <= 1e-12),
        check("F_avg = (2 + C_avg)/3", affine <= 1e-10, f"{affine:.1e}"),
        check("round trip below bound", not over, ", ".join(over)),
        check("plateau property", plateau_ok),
    ]


def criterion_11():
    ps = np.linspace(0, 1, 20)
    res = max(states.unitarity_residual(states.tmes_unitary(p)) for p in ps)
    dist = 0.0
    for p in ps:
        built = states.tmes_construct(p).amplitudes
        ref = states.nmm(p).amplitudes if 0 < p < 1 else np.concatenate(
            [math.sqrt(p) * states.PHI_PLUS, math.sqrt(1 - p) * states.PHI_MINUS])
        dist = max(dist, float(np.abs(built - ref).max()))
    return [
        check("unitarity residual < 1e-12", res < 1e-12, f"{res:.1e}"),
        check("construction equals NMM(p)", dist < 1e-12, f"{dist:.1e}"),
    ]


def criterion_12(tmp_path):
    runs = {
        "coqkd": ["coqkd", "--p", "0.3", "--n-grid", "0:1:0.25", "--mode", "security", "--rounds", "20000"],
        "conference": ["conference", "--p-grid", "0.2:0.8:0.3", "--secure", "--rounds", "20000"],
        "teleport": ["teleport", "--p", "0.7", "--n-grid", "0,0.5,1", "--rounds", "5000"],
        "coqkd4": ["coqkd4", "--alpha", "0,0.5", "--beta", "0.5", "--rounds", "20000"],
    }
    out = []
    for name, argv in runs.items():
        blobs = []
        for k in range(2):
            path = tmp_path / f"{name}{k}.csv"
            cli.main(argv + ["--seed", "12345678901234567", "--out", str(path)])
            blobs.append(path.read_bytes())
        out.append(check(f"{name} byte-identical", blobs[0] == blobs[1] and len(blobs[0]) > 0))
    return out


TITLES = {
    1: "error-rate curve", 2: "CHSH security", 3: "key-rate accounting", 4: "entropy signature",
    5: "LU match", 6: "measuring a maximally mixed qubit", 7: "conference key",
    8: "tripartite Bell inequality", 9: "four-qubit resources", 10: "teleportation",
    11: "TMES construction", 12: "determinism",
}


def run(number, *args):
    checks = globals()[f"criterion_{number}"](*args)
    ok, detail = record(number, TITLES[number], checks)
    assert ok, detail


class TestAcceptance:
    def test_criterion_01_error_rate_curve(self):
        run(1)

    def test_criterion_02_chsh_security(self):
        run(2)

    def test_criterion_03_key_rate_accounting(self):
        run(3)

    def test_criterion_04_entropy_signature(self):
        run(4)

    def test_criterion_05_lu_match(self):
        run(5)

    def test_criterion_06_maximally_mixed_qubit_control(self):
        run(6)

    def test_criterion_07_conference_key(self):
        run(7)

    def test_criterion_08_tripartite_bell_inequality(self):
        run(8)

    def test_criterion_09_four_qubit(self):
        run(9)

    def test_criterion_10_teleportation(self):
        run(10)

    def test_criterion_11_tmes(self):
        run(11)

    def test_criterion_12_determinism(self, tmp_path):
        run(12, tmp_path)


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    for k in range(1, 13):
        try:
            if k == 12:
                with tempfile.TemporaryDirectory() as d:
                    run(k, Path(d))
            else:
                run(k)
        except AssertionError:
            pass
