"""Seeded round sampler shared by the key-distribution protocols.

A *source* is a list of components ``(weight, table)``. Each round draws a
component (e.g. Charlie's announced outcome or an eavesdropper's action),
then one setting per party uniformly from that party's menu, then the joint
outcome from ``table[combo]``. Rounds are processed in fixed-size blocks,
each with its own generator seeded by ``(seed, block_index)``, so any block
can be reproduced or computed in parallel in isolation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .qcore import DensityMatrix, Observable, _as_density

BLOCK = 8192
MAX_SEED = 2**64


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned value, got {seed}")
    return seed


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng([check_seed(seed), block])


def _projector_pair(obs):
    if obs is None:
        return np.eye(2), np.zeros((2, 2))
    if isinstance(obs, Observable):
        return obs.projectors()
    raise TypeError(f"menu entries must be Observable or None, got {type(obs).__name__}")


def joint_table(state, menus) -> np.ndarray:
    """Outcome probabilities for every setting combination.

    ``menus[i]`` is party i's list of dichotomic observables (``None`` means
    the party does not measure). Rows follow ``itertools.product`` order over
    setting indices; columns index outcomes with bit 1 meaning ``-1``.
    """
    rho = _as_density(state).entries
    k = len(menus)
    proj = [[_projector_pair(o) for o in menu] for menu in menus]
    combos = list(itertools.product(*[range(len(m)) for m in menus]))
    table = np.empty((len(combos), 2**k))
    for c, combo in enumerate(combos):
        for o, bits in enumerate(itertools.product((0, 1), repeat=k)):
            op = np.array([[1.0]])
            for i in range(k):
                op = np.kron(op, proj[i][combo[i]][bits[i]])
            table[c, o] = max(np.trace(rho @ op).real, 0.0)
    table /= table.sum(axis=1, keepdims=True)
    return table


@dataclass
class Samples:
    settings: np.ndarray  # (rounds, parties) setting indices
    outcomes: np.ndarray  # (rounds, parties) +1/-1, 0 where the party did not measure
    component: np.ndarray  # (rounds,)


def sample(components, menus, rounds: int, seed: int, flip: dict[int, float] | None = None) -> Samples:
    """Draw ``rounds`` protocol rounds from a mixture of outcome tables.

    ``flip`` maps party index to the probability that its announced outcome
    is inverted (dishonest announcements).
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    check_seed(seed)
    k = len(menus)
    sizes = [len(m) for m in menus]
    weights = np.array([w for w, _ in components], dtype=float)
    weights /= weights.sum()
    cum_w = np.cumsum(weights)
    cdfs = np.stack([np.cumsum(t, axis=1) for _, t in components])  # (comp, combos, outcomes)
    identity = [np.array([o is None for o in m]) for m in menus]
    flip = flip or {}

    settings = np.empty((rounds, k), dtype=np.int16)
    outcomes = np.empty((rounds, k), dtype=np.int8)
    comp = np.empty(rounds, dtype=np.int16)
    nblocks = math.ceil(rounds / BLOCK)
    for b in range(nblocks):
        lo, hi = b * BLOCK, min(rounds, (b + 1) * BLOCK)
        m = hi - lo
        rng = block_rng(seed, b)
        c = np.minimum(np.searchsorted(cum_w, rng.random(m), side="right"), len(weights) - 1)
        s = np.stack([rng.integers(0, sizes[i], size=m) for i in range(k)], axis=1)
        combo = np.ravel_multi_index(tuple(s.T), sizes)
        u = rng.random(m)
        cdf = cdfs[c, combo]
        idx = (u[:, None] >= cdf[:, :-1]).sum(axis=1)
        out = np.empty((m, k), dtype=np.int8)
        for i in range(k):
            bit = (idx >> (k - 1 - i)) & 1
            out[:, i] = np.where(identity[i][s[:, i]], 0, 1 - 2 * bit)
        for i, f in sorted(flip.items()):
            mask = rng.random(m) < f
            out[mask, i] = -out[mask, i]
        settings[lo:hi] = s
        outcomes[lo:hi] = out
        comp[lo:hi] = c
    return Samples(settings, outcomes, comp)


def intercept_resend(state, target: str, q: float, bases=("Z", "X")):
    """Components of the state after an intercept-resend attack on ``target``.

    With probability ``q`` the target qubit is measured in a uniformly chosen
    Pauli basis and replaced by the observed eigenstate. Each (basis, outcome)
    pair is a separate component so the eavesdropper acts per round.
    """
    from .qcore import PauliBasis, embed

    rho = _as_density(state)
    parts = []
    if q < 1:
        parts.append((1 - q, rho))
    if q > 0:
        for ax in bases:
            for _, ket in PauliBasis(ax).kets():
                proj = embed(np.outer(ket, ket.conj()), [target], rho.qubit_order)
                post = proj @ rho.entries @ proj
                w = np.trace(post).real
                if w > 1e-14:
                    parts.append((q / len(bases) * w, DensityMatrix(post / w, rho.qubit_order)))
    return parts


def mix_density(parts) -> DensityMatrix:
    total = sum(w for w, _ in parts)
    m = sum(w * _as_density(r).entries for w, r in parts) / total
    return DensityMatrix(m, _as_density(parts[0][1]).qubit_order)


def gate(observed: float, expected: float, sigma: float, count: int) -> bool:
    """Three-sigma acceptance with a one-count allowance for zero-variance expectations."""
    if count <= 0:
        return False
    return abs(observed - expected) <= 3 * sigma + 1.0 / count


__all__ = ["BLOCK", "Samples", "block_rng", "check_seed", "gate", "intercept_resend",
           "joint_table", "mix_density", "sample"]
