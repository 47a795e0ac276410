"""Rank-1 extremal measurements over a fixed projector set, and convex decompositions.

A rank-1 measurement assigns a nonnegative weight to each projector in an
ordered slot list (the same projector may occupy several slots).  It is
extremal when its nonzero terms are linearly independent as operators, in
which case the completeness condition fixes the weights uniquely.  Over a
finite slot list there are finitely many extremal weight patterns, and every
valid rank-1 measurement on those slots is a convex mixture of them.

``enumerate_extremals`` lists all extremal patterns; ``mixture_weights``
recovers a mixture for a given target.  The mixture is generally not unique,
so a canonical representative is returned: the lexicographically smallest
feasible weight vector (in enumeration order), computed exactly by vertex
enumeration when the family is small and by deterministic non-negative least
squares otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Hashable, Sequence

import numpy as np
from scipy.optimize import nnls

from . import qmath
from .qmath import ATOL_MATRIX, ProductRank1Effect, projector

INDEPENDENCE_TOL = 1e-8   # smallest singular value separating degeneracy from noise
MIN_WEIGHT = 1e-10        # weights at or below this count as structural zeros
RESIDUAL_TOL = 1e-9       # per-slot reconstruction residual for decompositions

_MAX_PROJECTORS = 16
_MAX_DIM = 4
_VERTEX_ENUM_LIMIT = 3000  # candidate-support cap for the exact path


class DecompositionInfeasibleError(ValueError):
    """The target has no convex decomposition over the given extremal family."""


@dataclass(frozen=True)
class Rank1Povm:
    """Weighted rank-1 projectors on an ordered slot list, summing to identity."""

    weights: tuple[float, ...]
    projectors: tuple[np.ndarray, ...]
    labels: tuple[Hashable, ...]

    def __post_init__(self):
        if not (len(self.weights) == len(self.projectors) == len(self.labels)):
            raise ValueError("weights, projectors and labels must align")
        frozen = []
        for p in self.projectors:
            p = np.asarray(p, dtype=complex)
            _assert_rank1_projector(p)
            p = np.array(p)
            p.setflags(write=False)
            frozen.append(p)
        weights = tuple(float(w) for w in self.weights)
        if min(weights) < -1e-12:
            raise ValueError(f"negative weight in rank-1 measurement: {min(weights)}")
        dim = frozen[0].shape[0]
        total = sum(w * p for w, p in zip(weights, frozen))
        if np.max(np.abs(total - np.eye(dim))) > ATOL_MATRIX:
            raise ValueError("weighted projectors do not sum to identity")
        object.__setattr__(self, "projectors", tuple(frozen))
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def __len__(self) -> int:
        return len(self.weights)

    @classmethod
    def from_terms(cls, terms, labels=None) -> "Rank1Povm":
        weights, projectors = zip(*terms)
        if labels is None:
            labels = tuple(range(len(weights)))
        return cls(weights=tuple(weights), projectors=tuple(projectors), labels=tuple(labels))


@dataclass(frozen=True)
class ExtremalPovm:
    """An extremal weight pattern: slot indices with their uniquely determined weights."""

    support: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.support) != len(self.weights):
            raise ValueError("support and weights must align")
        object.__setattr__(self, "support", tuple(int(i) for i in self.support))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    def full_weights(self, n_slots: int) -> np.ndarray:
        out = np.zeros(n_slots)
        for idx, w in zip(self.support, self.weights):
            out[idx] = w
        return out


@dataclass(frozen=True)
class ExtremalDecomposition:
    """Convex mixture of extremal patterns reproducing a target slot-weight vector."""

    mixture: tuple[tuple[float, ExtremalPovm], ...]

    def __post_init__(self):
        mix = tuple((float(mu), ext) for mu, ext in self.mixture)
        total = sum(mu for mu, _ in mix)
        if min((mu for mu, _ in mix), default=0.0) < -1e-12:
            raise ValueError("mixture coefficients must be nonnegative")
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"mixture coefficients sum to {total!r}, expected 1")
        object.__setattr__(self, "mixture", mix)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([mu for mu, _ in self.mixture])

    def reconstructed_weights(self, n_slots: int) -> np.ndarray:
        out = np.zeros(n_slots)
        for mu, ext in self.mixture:
            out += mu * ext.full_weights(n_slots)
        return out


def _assert_rank1_projector(p: np.ndarray) -> None:
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"projector must be square, got shape {p.shape}")
    if abs(np.trace(p).real - 1.0) > 1e-10 or np.max(np.abs(p @ p - p)) > 1e-10:
        raise ValueError("slot operator is not a rank-1 projector")


def _real_vectorize(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Stack Hermitian matrices as real row vectors (real and imaginary parts)."""
    rows = []
    for m in matrices:
        flat = np.asarray(m, dtype=complex).reshape(-1)
        rows.append(np.concatenate([flat.real, flat.imag]))
    return np.array(rows)


def enumerate_extremals(projectors: Sequence[np.ndarray]) -> list[ExtremalPovm]:
    """All extremal weight patterns over an ordered list of rank-1 projectors.

    A slot subset qualifies when its projectors are linearly independent and
    the unique solution of sum_a w_a P_a = identity is strictly positive.
    Subsets are explored depth-first in index order (a dependent subset cannot
    become independent by adding slots), and results come back sorted
    lexicographically by support.
    """
    projs = [np.asarray(p, dtype=complex) for p in projectors]
    if not 1 <= len(projs) <= _MAX_PROJECTORS:
        raise ValueError(f"need between 1 and {_MAX_PROJECTORS} projectors, got {len(projs)}")
    dims = {p.shape for p in projs}
    if len(dims) != 1:
        raise qmath.DimensionError(f"projectors have mixed shapes: {dims}")
    for p in projs:
        _assert_rank1_projector(p)
    dim = projs[0].shape[0]
    if dim > _MAX_DIM:
        raise qmath.DimensionError(f"dimension {dim} exceeds supported maximum {_MAX_DIM}")

    vectors = _real_vectorize(projs)
    identity_vec = np.concatenate([np.eye(dim, dtype=complex).reshape(-1).real, np.zeros(dim * dim)])
    max_support = dim * dim
    found: list[ExtremalPovm] = []

    def independent(indices: list[int]) -> bool:
        sv = np.linalg.svd(vectors[indices], compute_uv=False)
        return sv[-1] > INDEPENDENCE_TOL

    def visit(indices: list[int], next_start: int) -> None:
        if indices:
            if not independent(indices):
                return  # supersets stay dependent
            a = vectors[indices].T
            w, *_ = np.linalg.lstsq(a, identity_vec, rcond=None)
            residual = np.max(np.abs(a @ w - identity_vec))
            if residual <= ATOL_MATRIX and np.min(w) > MIN_WEIGHT:
                found.append(ExtremalPovm(support=tuple(indices), weights=tuple(w)))
        if len(indices) >= max_support:
            return
        for nxt in range(next_start, len(projs)):
            visit(indices + [nxt], nxt + 1)

    visit([], 0)
    found.sort(key=lambda e: e.support)
    return found


def effective_povm(joint: Sequence[ProductRank1Effect], psi: np.ndarray) -> Rank1Povm:
    """The rank-1 measurement induced on the second party by conditioning on a known first-party state.

    For a two-party product measurement with terms w_i P_{u_i} (x) P_{v_i},
    the induced slot weights are w_i tr(P_{u_i} psi) on projectors P_{v_i}.
    """
    if any(e.n_parties != 2 for e in joint):
        raise ValueError("effective_povm expects two-party product effects")
    qmath.assert_product_povm(joint)
    psi = qmath.assert_density_matrix(psi)
    if psi.shape[0] != joint[0].factors[0].shape[0]:
        raise qmath.DimensionError("state dimension does not match the first factor")
    weights = []
    projectors_out = []
    for e in joint:
        overlap = np.trace(projector(e.factors[0]) @ psi).real
        weights.append(e.weight * max(overlap, 0.0))
        projectors_out.append(projector(e.factors[1]))
    return Rank1Povm(weights=tuple(weights), projectors=tuple(projectors_out),
                     labels=tuple(range(len(joint))))


def _constraint_system(n_slots: int, extremals: Sequence[ExtremalPovm]) -> np.ndarray:
    a = np.zeros((n_slots + 1, len(extremals)))
    for col, ext in enumerate(extremals):
        a[:n_slots, col] = ext.full_weights(n_slots)
        a[n_slots, col] = 1.0
    return a


def _lex_less(a: np.ndarray, b: np.ndarray, tol: float = 1e-11) -> bool:
    for x, y in zip(a, b):
        if x < y - tol:
            return True
        if x > y + tol:
            return False
    return False


def _vertex_lex_min(a: np.ndarray, b: np.ndarray, rank: int) -> np.ndarray | None:
    """Lexicographically smallest basic feasible solution of a mu = b, mu >= 0.

    Every vertex of the feasible polytope is supported on at most ``rank``
    coordinates, so enumerating column subsets of that size finds them all.
    """
    n_cols = a.shape[1]
    best = None
    for size in range(1, rank + 1):
        for support in combinations(range(n_cols), size):
            sub = a[:, support]
            w, *_ = np.linalg.lstsq(sub, b, rcond=None)
            if np.min(w) < -1e-11:
                continue
            if np.max(np.abs(sub @ w - b)) > RESIDUAL_TOL:
                continue
            mu = np.zeros(n_cols)
            mu[list(support)] = np.clip(w, 0.0, None)
            if best is None or _lex_less(mu, best):
                best = mu
    return best


def is_feasible(target: Rank1Povm, extremals: Sequence[ExtremalPovm]) -> bool:
    """Quick check that some convex mixture of the family matches the target."""
    if not extremals:
        return False
    a = _constraint_system(len(target), extremals)
    b = np.concatenate([np.asarray(target.weights, dtype=float), [1.0]])
    _, residual = nnls(a, b)
    return residual <= RESIDUAL_TOL


def mixture_weights(
    target: Rank1Povm, extremals: Sequence[ExtremalPovm]
) -> ExtremalDecomposition:
    """Convex mixture of extremal patterns reproducing the target weights.

    Raises DecompositionInfeasibleError when no nonnegative mixture matches
    the target within tolerance (which signals the target is not a valid
    measurement over these projectors).  Among feasible mixtures the
    lexicographically smallest coefficient vector is returned whenever the
    exact vertex search is affordable; otherwise a deterministic non-negative
    least-squares solution is used.
    """
    if not extremals:
        raise DecompositionInfeasibleError("empty extremal family")
    n_slots = len(target)
    a = _constraint_system(n_slots, extremals)
    b = np.concatenate([np.asarray(target.weights, dtype=float), [1.0]])

    mu, residual = nnls(a, b)
    if residual > RESIDUAL_TOL:
        raise DecompositionInfeasibleError(
            f"no convex decomposition over this family (residual {residual:.3e})"
        )

    rank = int(np.linalg.matrix_rank(a, tol=1e-10))
    n_candidates = sum(math.comb(len(extremals), s) for s in range(1, rank + 1))
    if n_candidates <= _VERTEX_ENUM_LIMIT:
        vertex = _vertex_lex_min(a, b, rank)
        if vertex is not None:
            mu = vertex

    mu = np.where(mu < MIN_WEIGHT, 0.0, mu)
    total = mu.sum()
    if abs(total - 1.0) > 1e-9:
        raise DecompositionInfeasibleError(f"mixture coefficients sum to {total!r}")
    mu = mu / total
    slot_residual = np.max(np.abs(a[:-1] @ mu - b[:-1]))
    if slot_residual > RESIDUAL_TOL:
        raise DecompositionInfeasibleError(
            f"reconstruction residual {slot_residual:.3e} exceeds tolerance"
        )
    return ExtremalDecomposition(mixture=tuple(zip(mu, extremals)))


def refine_separable(
    effects: Sequence[Sequence[ProductRank1Effect]],
) -> tuple[tuple[ProductRank1Effect, ...], tuple[int, ...]]:
    """Flatten grouped product terms into a rank-1 product measurement.

    Each input group is one original outcome given as an explicit sum of
    weighted product rank-1 terms.  Returns the flattened term list together
    with the coarse-graining map sending each refined outcome back to the
    index of its original group.  Statistics of the original measurement are
    recovered by summing refined outcome probabilities within each group.
    """
    refined: list[ProductRank1Effect] = []
    coarse_map: list[int] = []
    for original_index, group in enumerate(effects):
        if not group:
            raise ValueError(f"outcome {original_index} has no product terms")
        for term in group:
            refined.append(term)
            coarse_map.append(original_index)
    total = qmath.product_effects_matrix_sum(refined)
    dim = total.shape[0]
    if np.max(np.abs(total - np.eye(dim))) > ATOL_MATRIX:
        raise ValueError("refined terms do not sum to identity")
    return tuple(refined), tuple(coarse_map)


def coarse_grain(probabilities: np.ndarray, coarse_map: Sequence[int]) -> np.ndarray:
    """Sum refined-outcome probabilities back onto the original outcome labels."""
    probabilities = np.asarray(probabilities, dtype=float)
    n_groups = max(coarse_map) + 1
    out = np.zeros(n_groups)
    for p, g in zip(probabilities, coarse_map):
        out[g] += p
    return out
