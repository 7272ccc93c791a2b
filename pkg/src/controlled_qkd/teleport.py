"""Cooperative teleportation: Charlie's basis choice steers the Alice-Bob channel."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _engine
from .coqkd import collapse_three
from .qcore import SX, SZ, JointBasis, StateVector, concurrence, measure, teleport_fidelity_bound

CSV_COLUMNS = ("p", "n", "p_plus", "F_plus", "F_minus", "F_avg", "C_avg", "F_sim_mean")

# Bob's Pauli correction after Alice's Bell outcome, for a |phi+>-like channel
CORRECTIONS = {"chi+": np.eye(2), "chi-": SZ, "zeta+": SX, "zeta-": SZ @ SX}


@dataclass(frozen=True)
class TeleportSweepPoint:
    p: float
    n: float
    p_plus: float
    p_minus: float
    F_plus: float
    F_minus: float
    F_avg: float
    C_plus: float
    C_minus: float
    C_avg: float


def _branch_figures(branch) -> tuple[float, float]:
    if branch.state is None:
        return math.nan, math.nan
    return teleport_fidelity_bound(branch.state), concurrence(branch.state)


def sweep_point(p: float, n: float) -> TeleportSweepPoint:
    plus, minus = collapse_three(p, n)
    Fp, Cp = _branch_figures(plus)
    Fm, Cm = _branch_figures(minus)
    wp, wm = plus.probability, minus.probability
    F_avg = sum(w * f for w, f in ((wp, Fp), (wm, Fm)) if w > 0)
    C_avg = sum(w * c for w, c in ((wp, Cp), (wm, Cm)) if w > 0)
    return TeleportSweepPoint(p, n, wp, wm, Fp, Fm, F_avg, Cp, Cm, C_avg)


def sweep(p: float, n_grid) -> list[TeleportSweepPoint]:
    return [sweep_point(p, float(n)) for n in n_grid]


def c_avg_closed_form(p: float, n: float) -> float:
    """Weighted branch concurrence ``N^2(|p - n^2(1-p)| + |n^2 p - (1-p)|)``."""
    return (abs(p - n * n * (1 - p)) + abs(n * n * p - (1 - p))) / (1 + n * n)


def spherical_design() -> np.ndarray:
    """Unit vectors of the 20 dodecahedron vertices (a spherical 3-design)."""
    g = (1 + math.sqrt(5)) / 2
    pts = [v for v in itertools.product((-1, 1), repeat=3)]
    for a, b in itertools.product((-1, 1), repeat=2):
        pts += [(0, a / g, b * g), (a / g, b * g, 0), (a * g, 0, b / g)]
    arr = np.array(pts, dtype=float)
    return arr / np.linalg.norm(arr, axis=1, keepdims=True)


def bloch_ket(theta: float, phi: float) -> np.ndarray:
    return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])


def _design_kets() -> list[np.ndarray]:
    kets = []
    for x, y, z in spherical_design():
        kets.append(bloch_ket(math.acos(max(-1.0, min(1.0, z))), math.atan2(y, x)))
    return kets


def _channel_correction(channel: StateVector) -> np.ndarray:
    a = channel.amplitudes
    if abs(a[0]) > 1e-14 and (a[3] / a[0]).real < 0:
        return SZ
    return np.eye(2)


def teleport_outcomes(channel: StateVector, ket: np.ndarray) -> list[tuple[float, float]]:
    """``(probability, fidelity)`` for each of Alice's Bell outcomes."""
    full = StateVector(np.kron(ket, channel.amplitudes), ("Q",) + channel.qubit_order)
    extra = _channel_correction(channel)
    res = []
    for br in measure(full, JointBasis(1.0), ["Q", channel.qubit_order[0]]):
        if br.empty:
            res.append((br.probability, 1.0))
            continue
        out = extra @ CORRECTIONS[br.outcome] @ br.state.amplitudes
        res.append((br.probability, float(abs(np.vdot(ket, out)) ** 2)))
    return res


@dataclass(frozen=True)
class RoundtripResult:
    mean: float
    stderr: float
    rounds: int


def simulate_roundtrip(p: float, n: float, input_state: tuple[float, float] | None = None,
                       seed: int = 0, rounds: int = 10_000) -> RoundtripResult:
    """Monte Carlo over Charlie's outcome, the input (if not fixed) and Alice's outcome."""
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    kets = [bloch_ket(*input_state)] if input_state is not None else _design_kets()
    branches = [b for b in collapse_three(p, n) if b.state is not None]
    w = np.array([b.probability for b in branches])
    w /= w.sum()
    # table[charlie, input] -> (probabilities over Alice outcomes, fidelities)
    probs = np.empty((len(branches), len(kets), 4))
    fids = np.empty_like(probs)
    for i, b in enumerate(branches):
        for j, k in enumerate(kets):
            pf = teleport_outcomes(b.state, k)
            probs[i, j] = [x for x, _ in pf]
            fids[i, j] = [f for _, f in pf]
    cdf = np.cumsum(probs, axis=2)
    cw = np.cumsum(w)
    values = np.empty(rounds)
    for blk in range(math.ceil(rounds / _engine.BLOCK)):
        lo, hi = blk * _engine.BLOCK, min(rounds, (blk + 1) * _engine.BLOCK)
        m = hi - lo
        rng = _engine.block_rng(seed, blk)
        c = np.minimum(np.searchsorted(cw, rng.random(m), side="right"), len(w) - 1)
        j = rng.integers(0, len(kets), size=m)
        u = rng.random(m)
        a = np.minimum((u[:, None] >= cdf[c, j, :-1]).sum(axis=1), 3)
        values[lo:hi] = fids[c, j, a]
    std = float(values.std(ddof=1)) if rounds > 1 else 0.0
    return RoundtripResult(float(values.mean()), std / math.sqrt(rounds), rounds)


def exact_roundtrip_mean(p: float, n: float) -> float:
    """Exact expectation of :func:`simulate_roundtrip` over the spherical design."""
    kets = _design_kets()
    total = 0.0
    for b in collapse_three(p, n):
        if b.state is None:
            continue
        total += b.probability * np.mean([sum(x * f for x, f in teleport_outcomes(b.state, k)) for k in kets])
    return float(total)
