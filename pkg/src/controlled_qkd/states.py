"""Resource-state constructors, marginal-entropy classification and the TMES circuit.

Three-qubit resources use party labels ``(C, A, B)`` with the controller
first; four-qubit resources use ``(D, C, A, B)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .qcore import (
    ATOL,
    I2,
    SZ,
    PauliBasis,
    QubitBasis,
    StateVector,
    bell_state,
    concurrence,
    embed,
    marginal_entropies,
    measure,
)

THREE = ("C", "A", "B")
FOUR = ("D", "C", "A", "B")
MAXIMAL = 1 - 1e-9

FAMILIES = ("GHZ3", "NMM", "PHI_U", "PHI_U_PLUS", "GHZ4", "CLUSTER4", "R1", "FOUR_GENERAL", "TMES")

_S = 1 / math.sqrt(2)
PHI_PLUS = np.array([_S, 0, 0, _S], dtype=complex)
PHI_MINUS = np.array([_S, 0, 0, -_S], dtype=complex)
PSI_PLUS = np.array([0, _S, _S, 0], dtype=complex)
PSI_MINUS = np.array([0, _S, -_S, 0], dtype=complex)
BELL_KETS = {"phi+": PHI_PLUS, "phi-": PHI_MINUS, "psi+": PSI_PLUS, "psi-": PSI_MINUS}
FOUR_BELL = ("phi+", "phi-", "psi+", "psi-")


@dataclass(frozen=True)
class ResourceSpec:
    """A named resource family with its parameters.

    ``kets`` is only used by ``FOUR_GENERAL`` and holds four two-qubit kets
    (each LU-equivalent to a Bell state) in the order phi_1..phi_4.
    """

    family: str
    p: float | None = None
    a: float | None = None
    kets: tuple = field(default=(), compare=False)

    def __post_init__(self):
        fam = self.family.upper()
        if fam not in FAMILIES:
            raise ValueError(f"unknown resource family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if fam == "NMM":
            if self.p is None or not 0 < self.p < 1:
                raise ValueError(f"NMM needs p in (0, 1), got {self.p}")
        if fam == "TMES":
            if self.p is None or not 0 <= self.p <= 1:
                raise ValueError(f"TMES needs p in [0, 1], got {self.p}")
        if fam in ("PHI_U", "PHI_U_PLUS"):
            if self.a is None or not 0 <= self.a <= 1:
                raise ValueError(f"{fam} needs a in [0, 1], got {self.a}")
        if fam == "FOUR_GENERAL":
            kets = tuple(BELL_KETS[k] if isinstance(k, str) else np.asarray(k, complex) for k in self.kets or FOUR_BELL)
            if len(kets) != 4:
                raise ValueError("FOUR_GENERAL needs exactly four two-qubit kets")
            for i, k in enumerate(kets, 1):
                if k.shape != (4,) or abs(np.linalg.norm(k) - 1) > 1e-9:
                    raise ValueError(f"phi_{i} is not a normalized two-qubit ket")
                if abs(concurrence(StateVector(k, ("A", "B"))) - 1) > 1e-9:
                    raise ValueError(f"phi_{i} is not LU-equivalent to a Bell state")
            object.__setattr__(self, "kets", kets)

    @classmethod
    def parse(cls, text: str) -> "ResourceSpec":
        """Parse ``key = value`` lines (``#`` starts a comment).

        Keys: ``family``, ``p``, ``a`` and ``phi1``..``phi4`` for FOUR_GENERAL,
        where each ket is a Bell name (``phi+``, ``psi-``, ...) or four
        comma-separated complex amplitudes.
        """
        values: dict[str, str] = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed line {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.lower()] = val
        if "family" not in values:
            raise ValueError("resource block has no 'family' key")
        kets = []
        for i in range(1, 5):
            v = values.get(f"phi{i}")
            if v is None:
                continue
            if v in BELL_KETS:
                kets.append(v)
            else:
                kets.append(np.array([complex(x.strip().replace("i", "j")) for x in v.split(",")]))
        return cls(
            values["family"],
            p=float(values["p"]) if "p" in values else None,
            a=float(values["a"]) if "a" in values else None,
            kets=tuple(kets),
        )


def rotation_u(a: float) -> np.ndarray:
    """One-parameter real rotation ``[[sqrt a, sqrt(1-a)], [-sqrt(1-a), sqrt a]]``."""
    return np.array([[math.sqrt(a), math.sqrt(1 - a)], [-math.sqrt(1 - a), math.sqrt(a)]], dtype=complex)


def ghz(order=THREE) -> StateVector:
    k = len(order)
    amps = np.zeros(2**k, dtype=complex)
    amps[0] = amps[-1] = _S
    return StateVector(amps, order)


def nmm(p: float, order=THREE) -> StateVector:
    """``sqrt(p)|0>|phi+> + sqrt(1-p)|1>|phi->`` with the controller first."""
    amps = np.concatenate([math.sqrt(p) * PHI_PLUS, math.sqrt(1 - p) * PHI_MINUS])
    return StateVector(amps, order)


def phi_u(a: float, second=PHI_MINUS, order=THREE) -> StateVector:
    """``sqrt(1/2)[|0>|phi+> + |1>(I x U(a))|second>]``."""
    branch = np.kron(I2, rotation_u(a)) @ second
    return StateVector(np.concatenate([PHI_PLUS, branch]) * _S, order)


def cluster4(order=FOUR) -> StateVector:
    """Linear cluster ``(|0000> + |0011> + |1100> - |1111>)/2``."""
    amps = np.zeros(16, dtype=complex)
    amps[0b0000] = amps[0b0011] = amps[0b1100] = 0.5
    amps[0b1111] = -0.5
    return StateVector(amps, order)


def r1(order=FOUR) -> StateVector:
    """Eight-term four-qubit resource; leftmost qubit has entropy ~0.81."""
    c = 1 / (2 * math.sqrt(2))
    amps = np.zeros(16, dtype=complex)
    for bits, sign in [
        ("0010", 1), ("0100", 1), ("0001", 1), ("0111", -1),
        ("1000", 1), ("1100", 1), ("1011", 1), ("1111", -1),
    ]:
        amps[int(bits, 2)] = sign * c
    return StateVector(amps, order)


def four_general(kets=FOUR_BELL, order=FOUR) -> StateVector:
    """``(|00>|phi_1> + |01>|phi_2> + |10>|phi_3> + |11>|phi_4>)/2``."""
    vecs = [BELL_KETS[k] if isinstance(k, str) else np.asarray(k, complex) for k in kets]
    return StateVector.from_unnormalized(np.concatenate(vecs) / 2, order)


def four_from_three(first: StateVector, second: StateVector, w0: float = 1.0, w1: float = 1.0,
                    order=FOUR) -> StateVector:
    """``w0|0>|first> + w1|1>|second>`` renormalized; builds the Phi_1..Phi_3 structures."""
    amps = np.concatenate([w0 * first.amplitudes, w1 * second.amplitudes])
    return StateVector.from_unnormalized(amps, order)


def build(spec: ResourceSpec) -> StateVector:
    fam = spec.family
    if fam == "GHZ3":
        return ghz(THREE)
    if fam == "NMM":
        return nmm(spec.p)
    if fam == "PHI_U":
        return phi_u(spec.a)
    if fam == "PHI_U_PLUS":
        return phi_u(spec.a, second=PHI_PLUS)
    if fam == "GHZ4":
        return ghz(FOUR)
    if fam == "CLUSTER4":
        return cluster4()
    if fam == "R1":
        return r1()
    if fam == "FOUR_GENERAL":
        return four_general(spec.kets)
    if fam == "TMES":
        return tmes_construct(spec.p)
    raise AssertionError(fam)


def lu_match_parameter(a: float) -> float:
    """NMM weight whose controller entropy matches the rotation family at ``a``."""
    if not 0 <= a <= 1:
        raise ValueError(f"a must lie in [0, 1], got {a}")
    return 0.5 * (1 - math.sqrt(a))


# -- classification ----------------------------------------------------------


@dataclass(frozen=True)
class SuitabilityVerdict:
    marginal_entropies: tuple[float, ...]
    label: str
    controllers: tuple[str, ...]
    key_pair: tuple[str, ...] = ()
    non_maximal: tuple[str, ...] = ()

    @property
    def suitable(self) -> bool:
        return self.label not in ("UNSUITABLE", "FOUR_QUBIT_UNSUITABLE")


def _collapse_deficit(state: StateVector, controllers, angles) -> float:
    """Probability-weighted concurrence deficit of the key pair after controller measurements."""
    branches = [(1.0, state)]
    for i, q in enumerate(controllers):
        th, ph = angles[2 * i], angles[2 * i + 1]
        n = math.tan(th / 2) * complex(math.cos(ph), math.sin(ph)) if abs(th - math.pi) > 1e-15 else None
        basis = QubitBasis(n) if n is not None else QubitBasis(0.0)
        nxt = []
        for w, st in branches:
            for b in measure(st, basis, [q]):
                if not b.empty:
                    nxt.append((w * b.probability, b.state))
        branches = nxt
    return sum(w * (1 - concurrence(st)) for w, st in branches)


def _pauli_collapse_ok(state: StateVector, controllers) -> bool:
    for axes in itertools.product("ZXY", repeat=len(controllers)):
        branches = [state]
        for q, ax in zip(controllers, axes):
            branches = [b.state for st in branches for b in measure(st, PauliBasis(ax), [q]) if not b.empty]
        if all(concurrence(st) >= MAXIMAL for st in branches):
            return True
    return False


def collapse_test(state: StateVector, controllers, search: bool = True) -> bool:
    """True when single-qubit controller measurements can leave the key pair in a Bell-equivalent state.

    Pauli eigenbases are tried first; with ``search`` a multi-start optimizer
    over controller Bloch angles follows, which makes the test LU-invariant.
    """
    if _pauli_collapse_ok(state, controllers):
        return True
    if not search:
        return False
    rng = np.random.default_rng(1234)
    for _ in range(8):
        x0 = rng.uniform(0, np.pi, size=2 * len(controllers))
        res = minimize(lambda x: _collapse_deficit(state, controllers, x), x0, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 4000})
        if res.fun < 1e-9:
            return True
    return False


def classify(state: StateVector, search: bool = True) -> SuitabilityVerdict:
    """Suitability for maximal controlled key distribution from the single-qubit entropies."""
    k = state.num_qubits
    if k not in (3, 4):
        raise ValueError(f"classify handles 3- or 4-qubit states, got {k}")
    ent = tuple(marginal_entropies(state))
    labels = state.qubit_order
    maximal = [q for q, s in zip(labels, ent) if s >= MAXIMAL]
    non_max = tuple(q for q in labels if q not in maximal)

    if k == 3:
        if len(maximal) == 3:
            return SuitabilityVerdict(ent, "MMM", labels, (), ())
        if len(maximal) == 2:
            pos = labels.index(non_max[0])
            tag = "".join("N" if i == pos else "M" for i in range(3))
            return SuitabilityVerdict(ent, tag, non_max, tuple(maximal), non_max)
        return SuitabilityVerdict(ent, "UNSUITABLE", (), (), non_max)

    if len(maximal) >= 2:
        # prefer the last two parties as the key pair
        pairs = sorted(itertools.combinations(maximal, 2),
                       key=lambda pr: -sum(labels.index(q) for q in pr))
        for pair in pairs:
            ctrl = tuple(q for q in labels if q not in pair)
            if collapse_test(state, ctrl, search=search):
                return SuitabilityVerdict(ent, "FOUR_QUBIT_OK", ctrl, pair, non_max)
    return SuitabilityVerdict(ent, "FOUR_QUBIT_UNSUITABLE", (), (), non_max)


# -- TMES construction -------------------------------------------------------


def tmes_unitary(p: float, minus_lower_left: bool = False) -> np.ndarray:
    """Two-qubit block unitary built from ``sqrt(p) I`` and ``+-sqrt(1-p) Z`` blocks.

    The default places ``+sqrt(1-p) Z`` in the lower-left block so that acting
    on ``|0>|phi+>`` yields ``sqrt(p)|0>|phi+> + sqrt(1-p)|1>|phi->``. With
    ``minus_lower_left`` the minus sign sits in the lower-left block instead,
    which produces the same state up to Z on the first qubit.
    """
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    a, b = math.sqrt(p) * I2, math.sqrt(1 - p) * SZ
    if minus_lower_left:
        return np.block([[a, b], [-b, a]])
    return np.block([[a, -b], [b, a]])


def unitarity_residual(u: np.ndarray) -> float:
    return float(np.abs(u @ u.conj().T - np.eye(len(u))).max())


def tmes_construct(p: float, minus_lower_left: bool = False) -> StateVector:
    u12 = tmes_unitary(p, minus_lower_left)
    if unitarity_residual(u12) > ATOL:
        raise ArithmeticError("TMES block operator is not unitary")
    start = StateVector(np.kron([1, 0], PHI_PLUS), THREE)
    return StateVector(embed(u12, ("C", "A"), THREE) @ start.amplitudes, THREE)


__all__ = [
    "FAMILIES", "ResourceSpec", "SuitabilityVerdict", "build", "classify", "collapse_test",
    "cluster4", "four_from_three", "four_general", "ghz", "lu_match_parameter", "nmm", "phi_u",
    "r1", "rotation_u", "tmes_construct", "tmes_unitary", "unitarity_residual", "bell_state",
]
