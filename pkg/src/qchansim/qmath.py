"""Complex linear algebra for small quantum systems, plus the measurement catalog.

Everything here works on plain complex numpy arrays of dimension at most 12
(the largest space used anywhere is C^2 x C^6).  States are density matrices,
measurements are POVMs (lists of effects summing to identity), and qubit
states are freely converted to and from Bloch vectors.  Pure states are kept
as normalized kets with a canonical global phase so that equality tests are
bit-stable; projectors are built on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

# Tolerances used throughout: matrix-level identities (POVM completeness,
# instrument completeness) at 1e-10, scalar traces and normalization at 1e-12.
ATOL_MATRIX = 1e-10
ATOL_SCALAR = 1e-12

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)


class QmathError(ValueError):
    """Base error for invalid quantum objects."""


class DimensionError(QmathError):
    """Operands have incompatible or unsupported dimensions."""


class InvalidBlochVectorError(QmathError):
    """Bloch vector lies outside the unit ball beyond tolerance."""


class UnknownMeasurementError(QmathError):
    """Requested catalog entry does not exist."""


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise QmathError("matrix has non-finite entries")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def is_hermitian(m: np.ndarray, atol: float = ATOL_SCALAR) -> bool:
    a = np.asarray(m)
    return bool(np.max(np.abs(a - dagger(a))) <= atol)


def hermitian_eigenvalues(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix, ascending.

    The 2x2 case uses the closed-form discriminant so invariant checks do not
    depend on iterative-solver variance; larger dimensions fall back to
    numpy's Hermitian solver.
    """
    a = _as_matrix(m)
    if a.shape == (2, 2):
        half_trace = 0.5 * (a[0, 0].real + a[1, 1].real)
        radius = math.hypot(0.5 * (a[0, 0].real - a[1, 1].real), abs(a[0, 1]))
        return np.array([half_trace - radius, half_trace + radius])
    return np.linalg.eigvalsh(a)


def assert_density_matrix(rho: np.ndarray, name: str = "state") -> np.ndarray:
    rho = _as_matrix(rho)
    if not is_hermitian(rho):
        raise QmathError(f"{name} is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > ATOL_SCALAR:
        raise QmathError(f"{name} has trace {np.trace(rho).real!r}, expected 1")
    if hermitian_eigenvalues(rho)[0] < -ATOL_SCALAR:
        raise QmathError(f"{name} has a negative eigenvalue")
    return rho


def assert_effect(e: np.ndarray, name: str = "effect") -> np.ndarray:
    e = _as_matrix(e)
    if not is_hermitian(e):
        raise QmathError(f"{name} is not Hermitian")
    eigs = hermitian_eigenvalues(e)
    if eigs[0] < -ATOL_SCALAR or eigs[-1] > 1.0 + ATOL_SCALAR:
        raise QmathError(f"{name} has eigenvalues outside [0, 1]: {eigs}")
    return e


def ket(*amplitudes) -> np.ndarray:
    """Normalized state vector with canonical global phase."""
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise QmathError("cannot normalize the zero vector")
    return canonical_phase(v / norm)


def canonical_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the first non-negligible amplitude is real positive."""
    v = np.asarray(vec, dtype=complex).copy()
    for a in v:
        if abs(a) > 1e-12:
            v *= np.conj(a) / abs(a)
            break
    return v


def orthogonal_ket(v: np.ndarray) -> np.ndarray:
    """The state orthogonal to a qubit ket (unique up to phase)."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.shape != (2,):
        raise DimensionError("orthogonal_ket is defined for qubits only")
    return canonical_phase(np.array([-np.conj(v[1]), np.conj(v[0])]))


def projector(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, np.conj(v))


KET0 = ket(1, 0)
KET1 = ket(0, 1)
KET_PLUS = ket(1, 1)
KET_MINUS = ket(1, -1)

# The two tilted single-qubit states used by the twisted-butterfly measurement,
# both lying in the x-z plane at Bloch vectors (+-2*sqrt(2)/3, 0, -+1/3).
ALPHA = ket(1.0 / math.sqrt(3.0), math.sqrt(2.0 / 3.0))
BETA = ket(math.sqrt(2.0 / 3.0), 1.0 / math.sqrt(3.0))
ALPHA_PERP = orthogonal_ket(ALPHA)
BETA_PERP = orthogonal_ket(BETA)

SINGLET = ket(0, 1, -1, 0)


def bloch_to_density(n: Sequence[float]) -> np.ndarray:
    """Qubit density matrix (I + n . sigma) / 2 for a Bloch vector of norm <= 1."""
    v = np.asarray(n, dtype=float).reshape(-1)
    if v.shape != (3,):
        raise InvalidBlochVectorError(f"Bloch vector must have 3 components, got {v.shape}")
    norm = np.linalg.norm(v)
    if norm > 1.0 + 1e-12:
        raise InvalidBlochVectorError(f"Bloch vector has norm {norm!r} > 1")
    return 0.5 * (I2 + v[0] * SIGMA_X + v[1] * SIGMA_Y + v[2] * SIGMA_Z)


def density_to_bloch(rho: np.ndarray) -> np.ndarray:
    """Bloch vector n_k = tr(rho sigma_k); inverse of bloch_to_density."""
    rho = _as_matrix(rho)
    if rho.shape != (2, 2):
        raise DimensionError("density_to_bloch needs a 2x2 matrix")
    return np.array([np.trace(rho @ s).real for s in PAULIS])


def bloch_to_ket(n: Sequence[float]) -> np.ndarray:
    """Pure qubit ket for a unit Bloch vector."""
    v = np.asarray(n, dtype=float).reshape(-1)
    if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise InvalidBlochVectorError("bloch_to_ket needs a unit 3-vector")
    theta = math.acos(min(1.0, max(-1.0, v[2])))
    phi = math.atan2(v[1], v[0])
    return canonical_phase(
        np.array([math.cos(theta / 2.0), math.sin(theta / 2.0) * np.exp(1j * phi)])
    )


def tensor(*operands: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more matrices (or vectors)."""
    if not operands:
        raise QmathError("tensor needs at least one operand")
    out = np.asarray(operands[0], dtype=complex)
    for op in operands[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


@dataclass(frozen=True)
class Povm:
    """A measurement: effects summing to identity, with one label per outcome."""

    effects: tuple[np.ndarray, ...]
    labels: tuple[Hashable, ...]

    def __post_init__(self):
        if len(self.effects) != len(self.labels):
            raise QmathError("labels and effects must have the same length")
        if len(set(self.labels)) != len(self.labels):
            raise QmathError("outcome labels must be unique")
        dims = {e.shape for e in self.effects}
        if len(dims) != 1:
            raise DimensionError(f"effects have mixed shapes: {dims}")
        total = np.zeros(self.effects[0].shape, dtype=complex)
        for e in self.effects:
            assert_effect(e)
            total = total + e
        dim = self.effects[0].shape[0]
        if np.max(np.abs(total - np.eye(dim))) > ATOL_MATRIX:
            raise QmathError("effects do not sum to identity")
        frozen = tuple(np.array(e, dtype=complex) for e in self.effects)
        for e in frozen:
            e.setflags(write=False)
        object.__setattr__(self, "effects", frozen)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self) -> int:
        return len(self.effects)

    @classmethod
    def from_effects(cls, effects: Iterable[np.ndarray], labels=None) -> "Povm":
        effects = tuple(np.asarray(e, dtype=complex) for e in effects)
        if labels is None:
            labels = tuple(range(len(effects)))
        return cls(effects=effects, labels=tuple(labels))


@dataclass(frozen=True)
class Instrument:
    """A measurement with post-measurement states, given by Kraus operators.

    One Kraus operator per classical outcome; completeness means
    sum_k K_k^dag K_k = identity.  The k-th (unnormalized) post-measurement
    state of rho is K_k rho K_k^dag, whose trace is the outcome probability.
    """

    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        frozen = tuple(np.array(_as_matrix(k), dtype=complex) for k in self.kraus)
        dim = frozen[0].shape[0]
        total = sum(dagger(k) @ k for k in frozen)
        if np.max(np.abs(total - np.eye(dim))) > ATOL_MATRIX:
            raise QmathError("Kraus operators are not complete")
        for k in frozen:
            k.setflags(write=False)
        object.__setattr__(self, "kraus", frozen)

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    def __len__(self) -> int:
        return len(self.kraus)

    def outcome_probabilities(self, rho: np.ndarray) -> np.ndarray:
        return np.array([np.trace(k @ rho @ dagger(k)).real for k in self.kraus])


@dataclass(frozen=True)
class ProductRank1Effect:
    """A weighted product of pure-state projectors, one factor per party."""

    weight: float
    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not (0.0 < self.weight <= 1.0 + ATOL_SCALAR):
            raise QmathError(f"weight {self.weight!r} is outside (0, 1]")
        frozen = []
        for f in self.factors:
            v = np.asarray(f, dtype=complex).reshape(-1)
            if abs(np.linalg.norm(v) - 1.0) > ATOL_SCALAR:
                raise QmathError("product factor is not normalized")
            v = canonical_phase(v)
            v.setflags(write=False)
            frozen.append(v)
        object.__setattr__(self, "factors", tuple(frozen))
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def n_parties(self) -> int:
        return len(self.factors)

    def matrix(self) -> np.ndarray:
        return self.weight * tensor(*(projector(f) for f in self.factors))


def product_effects_matrix_sum(effects: Sequence[ProductRank1Effect]) -> np.ndarray:
    return sum(e.matrix() for e in effects)


def assert_product_povm(effects: Sequence[ProductRank1Effect]) -> None:
    total = product_effects_matrix_sum(effects)
    dim = total.shape[0]
    if np.max(np.abs(total - np.eye(dim))) > ATOL_MATRIX:
        raise QmathError("product effects do not sum to identity")


def born(state: np.ndarray, m: Povm) -> np.ndarray:
    """Outcome probabilities p_k = tr(state E_k)."""
    state = _as_matrix(state)
    if state.shape[0] != m.dim:
        raise DimensionError(f"state dim {state.shape[0]} != POVM dim {m.dim}")
    return np.array([np.trace(state @ e).real for e in m.effects])


def depolarize(rho: np.ndarray, eta: float) -> np.ndarray:
    """Qubit depolarizing channel: eta * rho + (1 - eta) * I/2."""
    rho = _as_matrix(rho)
    if rho.shape != (2, 2):
        raise DimensionError("depolarize acts on qubits")
    if not (0.0 <= eta <= 1.0):
        raise QmathError(f"noise parameter {eta!r} outside [0, 1]")
    return eta * rho + (1.0 - eta) * 0.5 * I2


def singlet_probability(psi_hat: Sequence[float], phi_hat: Sequence[float]) -> float:
    """Probability of the singlet outcome on a product of two pure qubits.

    Equals (1 - psi_hat . phi_hat) / 4; vanishes iff both Bloch vectors
    coincide and reaches 1/2 for antipodal pairs.
    """
    a = np.asarray(psi_hat, dtype=float).reshape(-1)
    b = np.asarray(phi_hat, dtype=float).reshape(-1)
    for v in (a, b):
        if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise InvalidBlochVectorError("singlet_probability needs unit Bloch vectors")
    return 0.25 * (1.0 - float(np.dot(a, b)))


# ---------------------------------------------------------------------------
# Measurement catalog
# ---------------------------------------------------------------------------

_TWIST_KAPPA = 0.75


def _catalog_product_terms(name: str) -> tuple[tuple[float, tuple[np.ndarray, ...], str], ...]:
    if name == "comp":
        return (
            (1.0, (KET0, KET0), "00"),
            (1.0, (KET0, KET1), "01"),
            (1.0, (KET1, KET0), "10"),
            (1.0, (KET1, KET1), "11"),
        )
    if name == "twistB":
        return (
            (1.0, (KET0, KET0), "z+ z+"),
            (1.0, (KET0, KET1), "z+ z-"),
            (1.0, (KET1, KET_PLUS), "z- x+"),
            (1.0, (KET1, KET_MINUS), "z- x-"),
        )
    if name == "twistA":
        return (
            (1.0, (KET0, KET0), "z+ z+"),
            (1.0, (KET1, KET0), "z- z+"),
            (1.0, (KET_PLUS, KET1), "x+ z-"),
            (1.0, (KET_MINUS, KET1), "x- z-"),
        )
    if name == "tb":
        k = _TWIST_KAPPA
        return (
            (1.0, (KET0, KET1), "1"),
            (k, (ALPHA_PERP, KET0), "21"),
            (k, (KET1, ALPHA), "22"),
            (k, (BETA, KET0), "31"),
            (k, (KET1, BETA_PERP), "32"),
        )
    if name == "shift":
        return (
            (1.0, (KET0, KET0, KET0), "000"),
            (1.0, (KET1, KET1, KET1), "111"),
            (1.0, (KET_PLUS, KET0, KET1), "+01"),
            (1.0, (KET_MINUS, KET0, KET1), "-01"),
            (1.0, (KET0, KET1, KET_PLUS), "01+"),
            (1.0, (KET0, KET1, KET_MINUS), "01-"),
            (1.0, (KET1, KET_PLUS, KET0), "1+0"),
            (1.0, (KET1, KET_MINUS, KET0), "1-0"),
        )
    raise UnknownMeasurementError(f"no product form for measurement {name!r}")


def catalog_product_effects(name: str) -> tuple[ProductRank1Effect, ...]:
    """Product-form catalog entries (everything except the singlet measurement)."""
    terms = _catalog_product_terms(name)
    effects = tuple(ProductRank1Effect(weight=w, factors=f) for w, f, _ in terms)
    assert_product_povm(effects)
    return effects


def catalog_labels(name: str) -> tuple[str, ...]:
    if name == "singlet":
        return ("singlet", "rest")
    return tuple(label for _, _, label in _catalog_product_terms(name))


CATALOG_NAMES = ("comp", "twistA", "twistB", "tb", "singlet", "shift")


def catalog_measurement(name: str) -> Povm:
    """One of the named measurements: comp, twistA, twistB, tb, singlet, shift."""
    if name == "singlet":
        p = projector(SINGLET)
        return Povm(effects=(p, I4 - p), labels=catalog_labels(name))
    if name not in CATALOG_NAMES:
        raise UnknownMeasurementError(f"unknown measurement {name!r}")
    effects = catalog_product_effects(name)
    return Povm(
        effects=tuple(e.matrix() for e in effects),
        labels=catalog_labels(name),
    )


def verify_s3_identities() -> dict:
    """Check that the twisted-butterfly measurement separates its three marker states.

    The markers are |01>, (|phi-> - |10>)/sqrt(2) and (|phi-> + |10>)/sqrt(2)
    with |phi-> = (|00> - |11>)/sqrt(2).  The first effect responds only to the
    first marker, and each grouped pair of effects responds only to its own
    marker.  Returns the computed overlap tables and the largest deviation
    from the Kronecker-delta pattern.
    """
    phi_minus = ket(1, 0, 0, -1)
    states = (
        ket(0, 1, 0, 0),
        canonical_phase((phi_minus - ket(0, 0, 1, 0)) / math.sqrt(2.0)),
        canonical_phase((phi_minus + ket(0, 0, 1, 0)) / math.sqrt(2.0)),
    )
    tb = catalog_measurement("tb")
    effects = dict(zip(tb.labels, tb.effects))
    grouped = {
        1: effects["1"],
        2: effects["21"] + effects["22"],
        3: effects["31"] + effects["32"],
    }
    first_row = [np.trace(effects["1"] @ projector(s)).real for s in states]
    table = {
        i: [np.trace(grouped[i] @ projector(s)).real for s in states]
        for i in (2, 3)
    }
    deviation = max(abs(p - (1.0 if j == 0 else 0.0)) for j, p in enumerate(first_row))
    for i in (2, 3):
        for j, p in enumerate(table[i]):
            expected = 1.0 if (i - 1) == j else 0.0
            deviation = max(deviation, abs(p - expected))
    return {
        "first_effect_overlaps": first_row,
        "grouped_overlaps": table,
        "max_deviation": deviation,
        "passed": deviation <= ATOL_SCALAR,
    }


# ---------------------------------------------------------------------------
# Random sampling helpers (shared by tests and Monte Carlo modules)
# ---------------------------------------------------------------------------

def haar_ket(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state: normalized complex Gaussian vector."""
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return ket(*v)


def random_bloch(rng: np.random.Generator) -> np.ndarray:
    """Uniformly random point on the Bloch sphere."""
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)
