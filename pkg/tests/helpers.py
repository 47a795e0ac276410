"""Shared test utilities: random measurement generators and Born-rule oracles."""

import math

import numpy as np

from qchansim.qmath import (
    Povm,
    ProductRank1Effect,
    bloch_to_ket,
    haar_ket,
    orthogonal_ket,
    tensor,
)

TRINE_BLOCH = [
    (0.0, 0.0, 1.0),
    (math.sqrt(3) / 2, 0.0, -0.5),
    (-math.sqrt(3) / 2, 0.0, -0.5),
]
TETRA_BLOCH = [
    (1.0, 1.0, 1.0),
    (1.0, -1.0, -1.0),
    (-1.0, 1.0, -1.0),
    (-1.0, -1.0, 1.0),
]


def random_rotation_matrix(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_local_rank1_povm(rng: np.random.Generator, kind: str) -> list[tuple[float, np.ndarray]]:
    """A random single-qubit rank-1 measurement as (weight, ket) pairs."""
    if kind == "basis":
        v = haar_ket(2, rng)
        return [(1.0, v), (1.0, orthogonal_ket(v))]
    rot = random_rotation_matrix(rng)
    if kind == "trine":
        vecs = [rot @ np.asarray(b) for b in TRINE_BLOCH]
        return [(2.0 / 3.0, bloch_to_ket(v)) for v in vecs]
    if kind == "tetra":
        vecs = [rot @ (np.asarray(b) / math.sqrt(3.0)) for b in TETRA_BLOCH]
        return [(0.5, bloch_to_ket(v)) for v in vecs]
    raise ValueError(f"unknown kind {kind!r}")


def random_product_povm(rng: np.random.Generator, kinds=("basis", "basis")) -> list[ProductRank1Effect]:
    """Product of two random local rank-1 measurements on C^2 x C^2."""
    left = random_local_rank1_povm(rng, kinds[0])
    right = random_local_rank1_povm(rng, kinds[1])
    return [
        ProductRank1Effect(weight=wa * wb, factors=(a, b))
        for wa, a in left
        for wb, b in right
    ]


def mixed_product_povm(rng: np.random.Generator) -> list[ProductRank1Effect]:
    """Convex mixture of two random product-basis measurements (8 outcomes)."""
    w = float(rng.uniform(0.2, 0.8))
    first = random_product_povm(rng, ("basis", "basis"))
    second = random_product_povm(rng, ("basis", "basis"))
    out = []
    for weight, e in [(w, t) for t in first] + [(1.0 - w, t) for t in second]:
        out.append(ProductRank1Effect(weight=weight * e.weight, factors=e.factors))
    return out


def product_povm_matrix(effects) -> Povm:
    return Povm.from_effects([e.matrix() for e in effects], labels=range(len(effects)))


def born_product_oracle(effects, psi, phi) -> np.ndarray:
    """Direct Born probabilities of a two-party product measurement on psi x phi."""
    joint_state = tensor(psi, phi)
    return np.array([np.trace(joint_state @ e.matrix()).real for e in effects])
