"""Exact state algebra for small qubit registers.

States carry an explicit ``qubit_order``: a tuple of party labels where the
leftmost label is the most significant bit of the amplitude index. Every
operation addresses qubits by label, never by position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence, Union

import numpy as np
from scipy.optimize import minimize

ATOL = 1e-12
NULL_BRANCH = 1e-14

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": SX, "Y": SY, "Z": SZ}


def _as_labels(labels) -> tuple[str, ...]:
    if isinstance(labels, str):
        return (labels,)
    return tuple(labels)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state of ``len(qubit_order)`` qubits."""

    amplitudes: np.ndarray
    qubit_order: tuple[str, ...]

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        order = _as_labels(self.qubit_order)
        if len(set(order)) != len(order):
            raise ValueError(f"duplicate party labels in {order}")
        if amps.size != 2 ** len(order):
            raise ValueError(
                f"{amps.size} amplitudes do not match {len(order)} qubit labels"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > ATOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "qubit_order", order)

    @classmethod
    def from_unnormalized(cls, amplitudes, qubit_order) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amps / norm, qubit_order)

    @classmethod
    def basis_state(cls, bits: str, qubit_order) -> "StateVector":
        order = _as_labels(qubit_order)
        amps = np.zeros(2 ** len(order), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(amps, order)

    @property
    def num_qubits(self) -> int:
        return len(self.qubit_order)

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.qubit_order)

    def relabel(self, qubit_order) -> "StateVector":
        return StateVector(self.amplitudes, qubit_order)

    def reorder(self, qubit_order) -> "StateVector":
        """Same physical state with the amplitude index permuted to ``qubit_order``."""
        order = _as_labels(qubit_order)
        if sorted(order) != sorted(self.qubit_order):
            raise ValueError(f"{order} is not a permutation of {self.qubit_order}")
        axes = [self.qubit_order.index(q) for q in order]
        tensor = self.amplitudes.reshape((2,) * self.num_qubits).transpose(axes)
        return StateVector(tensor.reshape(-1), order)

    def apply(self, op, targets) -> "StateVector":
        """Apply a unitary ``op`` to the qubits ``targets`` (in that order)."""
        full = embed(op, targets, self.qubit_order)
        return StateVector.from_unnormalized(full @ self.amplitudes, self.qubit_order)

    def overlap(self, other: "StateVector") -> complex:
        other = other.reorder(self.qubit_order)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def equals(self, other: "StateVector", atol: float = ATOL, up_to_phase: bool = False) -> bool:
        if sorted(other.qubit_order) != sorted(self.qubit_order):
            return False
        b = other.reorder(self.qubit_order).amplitudes
        a = self.amplitudes
        if up_to_phase:
            ov = np.vdot(b, a)
            if abs(ov) > 0:
                b = b * (ov / abs(ov))
        return bool(np.allclose(a, b, atol=atol, rtol=0))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace operator on labelled qubits."""

    entries: np.ndarray
    qubit_order: tuple[str, ...]

    def __post_init__(self):
        rho = np.array(self.entries, dtype=complex)
        order = _as_labels(self.qubit_order)
        dim = 2 ** len(order)
        if rho.shape != (dim, dim):
            raise ValueError(f"shape {rho.shape} does not match {len(order)} qubits")
        if not np.allclose(rho, rho.conj().T, atol=ATOL, rtol=0):
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > ATOL:
            raise ValueError(f"density matrix trace is {tr!r}")
        if np.linalg.eigvalsh(rho).min() < -ATOL:
            raise ValueError("density matrix has negative eigenvalues")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)
        object.__setattr__(self, "qubit_order", order)

    @property
    def num_qubits(self) -> int:
        return len(self.qubit_order)

    def reorder(self, qubit_order) -> "DensityMatrix":
        order = _as_labels(qubit_order)
        k = self.num_qubits
        axes = [self.qubit_order.index(q) for q in order]
        t = self.entries.reshape((2,) * (2 * k)).transpose(axes + [a + k for a in axes])
        return DensityMatrix(t.reshape(2**k, 2**k), order)


def _as_density(state) -> DensityMatrix:
    if isinstance(state, StateVector):
        return state.density()
    if isinstance(state, DensityMatrix):
        return state
    raise TypeError(f"expected StateVector or DensityMatrix, got {type(state).__name__}")


def embed(op, targets, qubit_order) -> np.ndarray:
    """Full-register matrix of ``op`` acting on ``targets`` (identity elsewhere)."""
    targets = _as_labels(targets)
    order = _as_labels(qubit_order)
    op = np.asarray(op, dtype=complex)
    t, k = len(targets), len(order)
    if op.shape != (2**t, 2**t):
        raise ValueError(f"operator shape {op.shape} does not match {t} target qubits")
    missing = set(targets) - set(order)
    if missing:
        raise ValueError(f"unknown labels {sorted(missing)}")
    rest = [q for q in order if q not in targets]
    full = np.kron(op, np.eye(2 ** len(rest)))
    # full acts on (targets + rest); permute its indices back to qubit_order
    current = list(targets) + rest
    axes = [current.index(q) for q in order]
    full = full.reshape((2,) * (2 * k)).transpose(axes + [a + k for a in axes])
    return full.reshape(2**k, 2**k)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    overlap = set(a.qubit_order) & set(b.qubit_order)
    if overlap:
        raise ValueError(f"party labels overlap: {sorted(overlap)}")
    return StateVector(np.kron(a.amplitudes, b.amplitudes), a.qubit_order + b.qubit_order)


def partial_trace(rho, keep) -> DensityMatrix:
    """Reduced state on the parties in ``keep`` (returned in register order)."""
    rho = _as_density(rho)
    keep = set(_as_labels(keep))
    if not keep:
        raise ValueError("keep must name at least one party")
    unknown = keep - set(rho.qubit_order)
    if unknown:
        raise ValueError(f"unknown labels {sorted(unknown)}")
    order = rho.qubit_order
    k = len(order)
    kept = [q for q in order if q in keep]
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:k])
    col = list(letters[k : 2 * k])
    for i, q in enumerate(order):
        if q not in keep:
            col[i] = row[i]
    out = "".join(row[i] for i, q in enumerate(order) if q in keep) + "".join(
        col[i] for i, q in enumerate(order) if q in keep
    )
    t = np.einsum("".join(row) + "".join(col) + "->" + out, rho.entries.reshape((2,) * (2 * k)))
    d = 2 ** len(kept)
    red = t.reshape(d, d)
    return DensityMatrix((red + red.conj().T) / 2, kept)


def binary_entropy(p: float) -> float:
    if p < 0 or p > 1:
        raise ValueError(f"probability {p} outside [0, 1]")
    if p == 0 or p == 1:
        return 0.0
    return float(-p * math.log2(p) - (1 - p) * math.log2(1 - p))


def von_neumann_entropy(rho) -> float:
    """Entropy in bits. Eigenvalues in [-1e-12, 1e-12] count as zero."""
    if isinstance(rho, (StateVector, DensityMatrix)):
        m = _as_density(rho).entries
    else:
        m = np.asarray(rho, dtype=complex)
    evals = np.linalg.eigvalsh((m + m.conj().T) / 2)
    if evals.min() < -ATOL:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {evals.min()!r})")
    evals = evals[evals > ATOL]
    return float(max(0.0, -np.sum(evals * np.log2(evals))))


def marginal_entropies(state) -> list[float]:
    rho = _as_density(state)
    return [von_neumann_entropy(partial_trace(rho, [q])) for q in rho.qubit_order]


# -- measurement bases -------------------------------------------------------


@dataclass(frozen=True)
class QubitBasis:
    """``|+_n> = N(|0> + n|1>)``, ``|-_n> = N(-n*|0> + |1>)`` with ``N = 1/sqrt(1+|n|^2)``."""

    n: complex = 0.0
    num_qubits: int = field(default=1, init=False)

    @property
    def norm(self) -> float:
        return 1.0 / math.sqrt(1.0 + abs(self.n) ** 2)

    def kets(self) -> list[tuple[str, np.ndarray]]:
        N, n = self.norm, complex(self.n)
        return [
            ("+", N * np.array([1.0, n], dtype=complex)),
            ("-", N * np.array([-n.conjugate(), 1.0], dtype=complex)),
        ]


@dataclass(frozen=True)
class JointBasis:
    """Generalized Bell basis on two qubits; ``m = 1`` is the ordinary Bell basis."""

    m: complex = 1.0
    num_qubits: int = field(default=2, init=False)

    def kets(self) -> list[tuple[str, np.ndarray]]:
        m = complex(self.m)
        N = 1.0 / math.sqrt(1.0 + abs(m) ** 2)
        return [
            ("chi+", N * np.array([1, 0, 0, m], dtype=complex)),
            ("chi-", N * np.array([m.conjugate(), 0, 0, -1], dtype=complex)),
            ("zeta+", N * np.array([0, 1, m, 0], dtype=complex)),
            ("zeta-", N * np.array([0, m.conjugate(), -1, 0], dtype=complex)),
        ]


@dataclass(frozen=True)
class ComputationalBasis:
    num_qubits: int = 1

    def kets(self) -> list[tuple[str, np.ndarray]]:
        d = 2**self.num_qubits
        return [(format(i, f"0{self.num_qubits}b"), np.eye(d, dtype=complex)[i]) for i in range(d)]


@dataclass(frozen=True)
class PauliBasis:
    """Eigenbasis of a Pauli operator with outcomes labelled ``+``/``-``."""

    axis: str = "Z"
    num_qubits: int = field(default=1, init=False)

    def kets(self) -> list[tuple[str, np.ndarray]]:
        s = 1 / math.sqrt(2)
        table = {
            "Z": ([1, 0], [0, 1]),
            "X": ([s, s], [s, -s]),
            "Y": ([s, 1j * s], [s, -1j * s]),
        }
        plus, minus = table[self.axis.upper()]
        return [("+", np.array(plus, dtype=complex)), ("-", np.array(minus, dtype=complex))]


Basis = Union[QubitBasis, JointBasis, ComputationalBasis, PauliBasis]


class Branch(NamedTuple):
    outcome: str
    probability: float
    state: StateVector | None
    empty: bool


def measure(state: StateVector, basis, targets) -> list[Branch]:
    """Projective measurement of ``targets`` in ``basis``.

    Every outcome is returned. Branches with probability below 1e-14 have
    ``empty=True`` and ``state=None``. The collapsed state lives on the
    remaining (unmeasured) parties in register order.
    """
    targets = _as_labels(targets)
    if basis == "computational":
        basis = ComputationalBasis(len(targets))
    if basis.num_qubits != len(targets):
        raise ValueError(f"basis acts on {basis.num_qubits} qubits, got {len(targets)} targets")
    unknown = set(targets) - set(state.qubit_order)
    if unknown or len(set(targets)) != len(targets):
        raise ValueError(f"bad measurement targets {targets} for register {state.qubit_order}")
    order = state.qubit_order
    rest = tuple(q for q in order if q not in targets)
    axes = [order.index(q) for q in targets] + [order.index(q) for q in rest]
    mat = state.amplitudes.reshape((2,) * len(order)).transpose(axes).reshape(2 ** len(targets), -1)
    branches = []
    for label, ket in basis.kets():
        vec = ket.conj() @ mat
        prob = float(np.vdot(vec, vec).real)
        if prob < NULL_BRANCH:
            branches.append(Branch(label, prob, None, True))
        else:
            branches.append(Branch(label, prob, StateVector(vec / math.sqrt(prob), rest), False))
    return branches


# -- observables -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Observable:
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("observable must be a square matrix")
        if not np.allclose(m, m.conj().T, atol=ATOL, rtol=0):
            raise ValueError(f"observable {self.label!r} is not Hermitian")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def pauli(cls, x: float = 0.0, y: float = 0.0, z: float = 0.0, label: str | None = None) -> "Observable":
        """``x*sx + y*sy + z*sz``; dichotomic when (x, y, z) is a unit vector."""
        if label is None:
            parts = [f"{c:+.6g}s{a}" for c, a in ((x, "x"), (y, "y"), (z, "z")) if c]
            label = "".join(parts) or "0"
        return cls(x * SX + y * SY + z * SZ, label)

    @classmethod
    def bloch(cls, theta: float, phi: float, label: str = "") -> "Observable":
        return cls.pauli(
            math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta), label
        )

    @property
    def is_dichotomic(self) -> bool:
        return bool(np.allclose(self.matrix @ self.matrix, np.eye(len(self.matrix)), atol=1e-10))

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Projectors onto the +1 and -1 eigenspaces of a dichotomic observable."""
        eye = np.eye(len(self.matrix))
        return (eye + self.matrix) / 2, (eye - self.matrix) / 2


IDENTITY = Observable(I2, "I")
PX = Observable(SX, "X")
PY = Observable(SY, "Y")
PZ = Observable(SZ, "Z")


def _as_matrix(obs) -> np.ndarray:
    if isinstance(obs, Observable):
        return obs.matrix
    if obs is None:
        return I2
    m = np.asarray(obs, dtype=complex)
    if not np.allclose(m, m.conj().T, atol=ATOL, rtol=0):
        raise ValueError("observable is not Hermitian")
    return m


def expectation(state, observables) -> float:
    """``<O_1 x O_2 x ...>`` with one observable per party.

    ``observables`` is either a sequence aligned with ``qubit_order`` or a
    mapping from party label to observable (absent parties get identity).
    """
    if isinstance(observables, Mapping):
        unknown = set(observables) - set(state.qubit_order)
        if unknown:
            raise ValueError(f"unknown labels {sorted(unknown)}")
        mats = [_as_matrix(observables.get(q)) for q in state.qubit_order]
    else:
        if len(observables) != state.num_qubits:
            raise ValueError(f"need {state.num_qubits} observables, got {len(observables)}")
        mats = [_as_matrix(o) for o in observables]
    op = mats[0]
    for m in mats[1:]:
        op = np.kron(op, m)
    if isinstance(state, StateVector):
        psi = state.amplitudes
        return float(np.vdot(psi, op @ psi).real)
    return float(np.trace(_as_density(state).entries @ op).real)


def chsh_value(state, A1, A2, B1, B2) -> float:
    """``<A1B1> + <A1B2> + <A2B1> - <A2B2>`` on a two-qubit state."""
    if state.num_qubits != 2:
        raise ValueError("CHSH needs a two-qubit state")
    for o in (A1, A2, B1, B2):
        if isinstance(o, Observable) and not o.is_dichotomic:
            raise ValueError(f"observable {o.label!r} is not dichotomic")
    e = lambda a, b: expectation(state, [a, b])  # noqa: E731
    return e(A1, B1) + e(A1, B2) + e(A2, B1) - e(A2, B2)


def optimize_chsh(state, starts: int = 12, seed: int = 0) -> tuple[float, np.ndarray]:
    """Brute-force maximum of the CHSH expression over four Bloch-vector settings.

    Returns the best value and the eight angles (theta, phi per setting).
    """
    rho = _as_density(state).entries

    def corr(angles):
        vecs = []
        for i in range(4):
            th, ph = angles[2 * i], angles[2 * i + 1]
            vecs.append(np.sin(th) * np.cos(ph) * SX + np.sin(th) * np.sin(ph) * SY + np.cos(th) * SZ)
        a1, a2, b1, b2 = vecs
        e = lambda a, b: np.trace(rho @ np.kron(a, b)).real  # noqa: E731
        return -(e(a1, b1) + e(a1, b2) + e(a2, b1) - e(a2, b2))

    rng = np.random.default_rng(seed)
    best_val, best_x = -np.inf, None
    for _ in range(starts):
        x0 = rng.uniform(0, 2 * np.pi, size=8)
        res = minimize(corr, x0, method="BFGS", options={"gtol": 1e-12})
        if -res.fun > best_val:
            best_val, best_x = -res.fun, res.x
    return float(best_val), best_x


def correlation_matrix(state) -> np.ndarray:
    """3x3 matrix ``t_ab = Tr[(s_a x s_b) rho]`` over a, b in {x, y, z}."""
    rho = _as_density(state)
    if rho.num_qubits != 2:
        raise ValueError("correlation matrix needs a two-qubit state")
    paulis = (SX, SY, SZ)
    return np.array(
        [[np.trace(rho.entries @ np.kron(a, b)).real for b in paulis] for a in paulis]
    )


def horodecki_max_chsh(state) -> float:
    """Closed-form CHSH maximum ``2 sqrt(u1 + u2)`` from the top two eigenvalues of T^T T."""
    t = correlation_matrix(state)
    u = np.sort(np.linalg.eigvalsh(t.T @ t))[::-1]
    return float(2 * math.sqrt(max(u[0] + u[1], 0.0)))


def concurrence(state: StateVector) -> float:
    """``|<psi| sy x sy |psi*>|`` for a pure two-qubit state."""
    if not isinstance(state, StateVector) or state.num_qubits != 2:
        raise ValueError("concurrence is defined here for pure two-qubit states")
    psi = state.amplitudes
    yy = np.kron(SY, SY)
    return float(min(1.0, abs(np.vdot(psi, yy @ psi.conj()))))


def teleport_fidelity_bound(state) -> float:
    """Optimal teleportation fidelity ``(1 + Tr sqrt(T^dag T) / 3) / 2``."""
    t = correlation_matrix(state)
    trace_norm = np.linalg.svd(t, compute_uv=False).sum()
    return float(0.5 * (1 + trace_norm / 3))


def random_state(qubit_order, rng: np.random.Generator) -> StateVector:
    order = _as_labels(qubit_order)
    v = rng.normal(size=2 ** len(order)) + 1j * rng.normal(size=2 ** len(order))
    return StateVector.from_unnormalized(v, order)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def bell_state(name: str, qubit_order=("A", "B")) -> StateVector:
    s = 1 / math.sqrt(2)
    table = {
        "phi+": [s, 0, 0, s],
        "phi-": [s, 0, 0, -s],
        "psi+": [0, s, s, 0],
        "psi-": [0, s, -s, 0],
    }
    try:
        return StateVector(table[name], qubit_order)
    except KeyError:
        raise ValueError(f"unknown Bell state {name!r}") from None
