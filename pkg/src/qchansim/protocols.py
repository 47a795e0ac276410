"""One-round shared-randomness protocols and the constructive channel simulators.

A one-round protocol is: a shared random variable, an encoder that maps
(shared atom, known sender state) to a distribution over a finite message
alphabet, and a decoder that maps (message, atom) to a measurement on the
receiver side.  Encoders see the sender state as a value; protocol objects
never see the receiver's state, so the information constraints of the setting
hold by construction.

Constructors provided here:

* ``rank1_product_protocol`` simulates any rank-1 product measurement on a
  known state times an unknown state, by decomposing the induced receiver-side
  measurement into extremal rank-1 measurements and sending the sampled label.
* ``block_basis_protocol`` simulates a product von Neumann measurement on
  C^2 x C^d given in block form, using one classical bit per block.
* ``multi_sender_protocol`` extends the product construction to several
  senders holding local known states, in both a broadcast configuration (A)
  and a strictly one-way configuration (B).
* The ``rac_*`` functions implement the 2->1 random access code bounds and the
  reduction that turns any claimed simulator of the sender-tilted twisted
  measurement into a random access code strategy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Sequence

import numpy as np

from . import decompose, qmath
from .decompose import (
    DecompositionInfeasibleError,
    ExtremalPovm,
    effective_povm,
    enumerate_extremals,
    mixture_weights,
)
from .qmath import (
    ATOL_SCALAR,
    Povm,
    ProductRank1Effect,
    bloch_to_density,
    born,
    catalog_labels,
    catalog_product_effects,
    ket,
    projector,
    tensor,
)


class ProtocolError(ValueError):
    """Structural problem with a protocol or its inputs."""


@dataclass(frozen=True)
class SharedRandomness:
    """A finite shared random variable: probabilities with opaque payloads."""

    probabilities: tuple[float, ...]
    payloads: tuple = ()

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probabilities)
        if min(probs) <= 0.0:
            raise ProtocolError("shared-randomness atoms must have positive probability")
        if abs(sum(probs) - 1.0) > ATOL_SCALAR:
            raise ProtocolError(f"atom probabilities sum to {sum(probs)!r}")
        payloads = self.payloads if self.payloads else tuple(range(len(probs)))
        if len(payloads) != len(probs):
            raise ProtocolError("payloads must align with probabilities")
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "payloads", tuple(payloads))

    def __len__(self) -> int:
        return len(self.probabilities)

    @classmethod
    def trivial(cls) -> "SharedRandomness":
        return cls(probabilities=(1.0,))


@dataclass(frozen=True)
class OneRoundProtocol:
    """Sender-to-receiver protocol: sample a message from the encoder, measure per the decoder.

    ``encoder(atom_index, psi)`` returns a distribution over the message
    alphabet; ``decoder(message_index, atom_index)`` returns a measurement
    whose outcome labels are a subset of ``outcomes``.
    """

    randomness: SharedRandomness
    messages: tuple
    encoder: Callable[[int, np.ndarray], np.ndarray]
    decoder: Callable[[int, int], Povm]
    outcomes: tuple[Hashable, ...]
    cost_bits: int
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_messages(self) -> int:
        return len(self.messages)

    def encoder_distribution(self, atom: int, psi: np.ndarray) -> np.ndarray:
        dist = np.asarray(self.encoder(atom, psi), dtype=float)
        if dist.shape != (self.n_messages,):
            raise ProtocolError("encoder returned a distribution of the wrong length")
        if abs(dist.sum() - 1.0) > ATOL_SCALAR or dist.min() < -ATOL_SCALAR:
            raise ProtocolError("encoder output is not a probability distribution")
        return np.clip(dist, 0.0, None)


def bit_cost(alphabet_size: int) -> int:
    return 0 if alphabet_size <= 1 else math.ceil(math.log2(alphabet_size))


def constant_protocol(povm: Povm) -> OneRoundProtocol:
    """Single-atom, single-message protocol: the receiver just measures ``povm``."""
    return OneRoundProtocol(
        randomness=SharedRandomness.trivial(),
        messages=("go",),
        encoder=lambda atom, psi: np.array([1.0]),
        decoder=lambda m, atom: povm,
        outcomes=povm.labels,
        cost_bits=0,
        meta={"construction": "constant"},
    )


def run_analytic(protocol: OneRoundProtocol, psi: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Exact outcome distribution sum_x sum_m p(x) p(m|x,psi) born(phi, decoder(m,x))."""
    phi = qmath.assert_density_matrix(phi, "receiver state")
    index = {label: i for i, label in enumerate(protocol.outcomes)}
    out = np.zeros(len(protocol.outcomes))
    for atom, p_atom in enumerate(protocol.randomness.probabilities):
        dist = protocol.encoder_distribution(atom, psi)
        for m, p_message in enumerate(dist):
            if p_message <= 0.0:
                continue
            povm = protocol.decoder(m, atom)
            probs = born(phi, povm)
            for label, pk in zip(povm.labels, probs):
                out[index[label]] += p_atom * p_message * pk
    return out


def run_sampled(
    protocol: OneRoundProtocol,
    psi: np.ndarray,
    phi: np.ndarray,
    n: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo estimate of the protocol statistics with standard errors.

    Deterministic given the seed.  Sampling is two-stage: multinomial counts
    over (atom, message), then multinomial outcome counts from each decoder's
    Born distribution, which is distributionally identical to per-shot
    simulation.
    """
    if n < 1:
        raise ProtocolError("sample count must be at least 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    index = {label: i for i, label in enumerate(protocol.outcomes)}
    pair_probs = []
    pairs = []
    for atom, p_atom in enumerate(protocol.randomness.probabilities):
        dist = protocol.encoder_distribution(atom, psi)
        for m, p_message in enumerate(dist):
            weight = p_atom * p_message
            if weight > 0.0:
                pairs.append((atom, m))
                pair_probs.append(weight)
    pair_probs = np.asarray(pair_probs)
    pair_counts = rng.multinomial(n, pair_probs / pair_probs.sum())
    counts = np.zeros(len(protocol.outcomes))
    for (atom, m), count in zip(pairs, pair_counts):
        if count == 0:
            continue
        povm = protocol.decoder(m, atom)
        probs = np.clip(born(phi, povm), 0.0, None)
        outcome_counts = rng.multinomial(count, probs / probs.sum())
        for label, c in zip(povm.labels, outcome_counts):
            counts[index[label]] += c
    freqs = counts / n
    stderr = np.sqrt(np.clip(freqs * (1.0 - freqs), 0.0, None) / n)
    return freqs, stderr


# ---------------------------------------------------------------------------
# Rank-1 product measurements (single sender)
# ---------------------------------------------------------------------------

_AXIAL_PROBES = [
    (0.0, 0.0, 1.0), (0.0, 0.0, -1.0),
    (1.0, 0.0, 0.0), (-1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0), (0.0, -1.0, 0.0),
]
_PRUNE_MAX_FAMILY = 24
_PRUNE_MAX_CANDIDATES = 4096


def _probe_states(dim: int, count: int = 54) -> list[np.ndarray]:
    rng = np.random.default_rng(0xA11CE)
    probes = []
    if dim == 2:
        probes.extend(bloch_to_density(v) for v in _AXIAL_PROBES)
    probes.extend(projector(qmath.haar_ket(dim, rng)) for _ in range(count))
    return probes


def _minimal_subfamily(pairs, family, probes) -> list[ExtremalPovm]:
    """Smallest subfamily that stays decomposable, found by ascending-size search.

    Feasibility is certified on a fixed probe set; the full family (always
    feasible) is the fallback when the family is large or no smaller subfamily
    passes.
    """
    if len(family) > _PRUNE_MAX_FAMILY:
        return list(family)
    targets = [effective_povm(pairs, psi) for psi in probes]
    examined = 0
    for size in range(1, len(family)):
        for subset in itertools.combinations(range(len(family)), size):
            examined += 1
            if examined > _PRUNE_MAX_CANDIDATES:
                return list(family)
            subfamily = [family[i] for i in subset]
            if all(decompose.is_feasible(t, subfamily) for t in targets):
                return subfamily
    return list(family)


def rank1_product_protocol(
    joint: Sequence[ProductRank1Effect],
    labels: Sequence[Hashable] | None = None,
    *,
    minimize_alphabet: bool = True,
) -> OneRoundProtocol:
    """One-round simulator for a two-party rank-1 product measurement.

    The sender decomposes the receiver-side effective measurement into a
    mixture of extremal rank-1 measurements and transmits the sampled label;
    the receiver performs the corresponding extremal measurement.  The message
    alphabet is the extremal family, optionally pruned to the smallest
    subfamily that stays decomposable across probe states.
    """
    joint = tuple(joint)
    if any(e.n_parties != 2 for e in joint):
        raise ProtocolError("rank1_product_protocol expects two-party effects")
    qmath.assert_product_povm(joint)
    if labels is None:
        labels = tuple(range(len(joint)))
    labels = tuple(labels)
    slots = [projector(e.factors[1]) for e in joint]
    family = enumerate_extremals(slots)
    if not family:
        raise DecompositionInfeasibleError("no extremal measurements over the receiver slots")
    if minimize_alphabet:
        family = _minimal_subfamily(joint, family, _probe_states(joint[0].factors[0].shape[0]))
    family = tuple(family)

    decoders = tuple(
        Povm(
            effects=tuple(
                ext.full_weights(len(joint))[i] * slots[i] for i in range(len(joint))
            ),
            labels=labels,
        )
        for ext in family
    )

    def encoder(atom: int, psi: np.ndarray) -> np.ndarray:
        target = effective_povm(joint, psi)
        return mixture_weights(target, family).coefficients

    return OneRoundProtocol(
        randomness=SharedRandomness.trivial(),
        messages=tuple(ext.support for ext in family),
        encoder=encoder,
        decoder=lambda m, atom: decoders[m],
        outcomes=labels,
        cost_bits=bit_cost(len(family)),
        meta={
            "construction": "rank1_product",
            "family_supports": tuple(ext.support for ext in family),
            "pruned": minimize_alphabet,
        },
    )


def catalog_protocol(name: str) -> OneRoundProtocol:
    """One-round simulator for a product-form catalog measurement."""
    return rank1_product_protocol(
        catalog_product_effects(name), labels=catalog_labels(name)
    )


# ---------------------------------------------------------------------------
# Product von Neumann measurements on C^2 x C^d (block form)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BasisBlock:
    """One block of a product orthonormal basis of C^2 x C^d.

    The block pairs a sender basis {alpha, alpha_perp} with two receiver
    families spanning the same subspace: ``bob_bit0`` goes with alpha and
    ``bob_bit1`` with alpha_perp.
    """

    alice: np.ndarray
    bob_bit0: tuple[np.ndarray, ...]
    bob_bit1: tuple[np.ndarray, ...]

    def __post_init__(self):
        alice = ket(*np.asarray(self.alice, dtype=complex).reshape(-1))
        if alice.shape != (2,):
            raise ProtocolError("block sender states must be qubits")
        object.__setattr__(self, "alice", alice)
        object.__setattr__(self, "bob_bit0", tuple(ket(*v) for v in self.bob_bit0))
        object.__setattr__(self, "bob_bit1", tuple(ket(*v) for v in self.bob_bit1))
        if len(self.bob_bit0) != len(self.bob_bit1) or not self.bob_bit0:
            raise ProtocolError("block receiver families must be non-empty and equal-sized")

    @property
    def alice_perp(self) -> np.ndarray:
        return qmath.orthogonal_ket(self.alice)

    @property
    def size(self) -> int:
        return len(self.bob_bit0)

    def subspace_projector(self) -> np.ndarray:
        return sum(projector(v) for v in self.bob_bit0)


def _check_block_basis(blocks: Sequence[BasisBlock]) -> int:
    dims = {v.shape[0] for b in blocks for v in b.bob_bit0 + b.bob_bit1}
    if len(dims) != 1:
        raise ProtocolError("receiver states have mixed dimensions")
    d = dims.pop()
    if sum(b.size for b in blocks) != d:
        raise ProtocolError("block sizes do not fill the receiver space")
    vectors = []
    for b in blocks:
        vectors.extend(tensor(b.alice, v) for v in b.bob_bit0)
        vectors.extend(tensor(b.alice_perp, v) for v in b.bob_bit1)
    gram = np.array([[np.vdot(u, v) for v in vectors] for u in vectors])
    if np.max(np.abs(gram - np.eye(2 * d))) > 1e-10:
        raise ProtocolError("block states do not form an orthonormal product basis")
    for b in blocks:
        alt = sum(projector(v) for v in b.bob_bit1)
        if np.max(np.abs(alt - b.subspace_projector())) > 1e-10:
            raise ProtocolError("basis is not in block form: receiver families span different subspaces")
    return d


def block_basis_protocol(blocks: Sequence[BasisBlock]) -> OneRoundProtocol:
    """One-round simulator for a product von Neumann measurement given in blocks.

    The sender measures each block's {alpha, alpha_perp} basis on an
    independent copy of the known state and transmits one bit per block.  The
    receiver first distinguishes the block subspaces, then measures the family
    selected by the bit of the block that fired.  Outcome labels are
    (block index, bit, within-block index).
    """
    blocks = tuple(blocks)
    _check_block_basis(blocks)
    n_blocks = len(blocks)
    outcomes = tuple(
        (i, a, j) for i, b in enumerate(blocks) for a in (0, 1) for j in range(b.size)
    )
    messages = tuple(itertools.product((0, 1), repeat=n_blocks))
    d = blocks[0].bob_bit0[0].shape[0]
    zero_effect = np.zeros((d, d), dtype=complex)

    decoders = []
    for message in messages:
        effects = []
        for i, a, j in outcomes:
            if message[i] == a:
                family = blocks[i].bob_bit0 if a == 0 else blocks[i].bob_bit1
                effects.append(projector(family[j]))
            else:
                effects.append(zero_effect)
        decoders.append(Povm(effects=tuple(effects), labels=outcomes))
    decoders = tuple(decoders)

    def encoder(atom: int, psi: np.ndarray) -> np.ndarray:
        psi = qmath.assert_density_matrix(psi, "sender state")
        bit_probs = []
        for b in blocks:
            p0 = np.trace(projector(b.alice) @ psi).real
            bit_probs.append((max(p0, 0.0), max(1.0 - p0, 0.0)))
        dist = np.empty(len(messages))
        for k, message in enumerate(messages):
            prob = 1.0
            for i, a in enumerate(message):
                prob *= bit_probs[i][a]
            dist[k] = prob
        return dist

    return OneRoundProtocol(
        randomness=SharedRandomness.trivial(),
        messages=messages,
        encoder=encoder,
        decoder=lambda m, atom: decoders[m],
        outcomes=outcomes,
        cost_bits=n_blocks,
        meta={"construction": "block_basis", "n_blocks": n_blocks},
    )


def block_branch_table(blocks: Sequence[BasisBlock]) -> list[dict]:
    """Receiver-side branch structure: subspace selector plus per-bit measurements."""
    table = []
    for i, b in enumerate(blocks):
        table.append(
            {
                "block": i,
                "subspace_projector": b.subspace_projector(),
                "alice_basis": (b.alice, b.alice_perp),
                "bit0_measurement": b.bob_bit0,
                "bit1_measurement": b.bob_bit1,
            }
        )
    return table


def blocks_from_product_basis(
    pairs: Sequence[tuple[np.ndarray, np.ndarray]]
) -> list[BasisBlock]:
    """Recover block structure from a flat list of (sender ket, receiver ket) pairs.

    Groups entries by the sender-side projector (within 1e-10) and pairs up
    groups whose projectors are orthogonal complements.
    """
    groups: list[tuple[np.ndarray, list[np.ndarray]]] = []
    for a, v in pairs:
        a = ket(*np.asarray(a, dtype=complex).reshape(-1))
        p = projector(a)
        for rep, members in groups:
            if np.max(np.abs(projector(rep) - p)) <= 1e-10:
                members.append(ket(*v))
                break
        else:
            groups.append((a, [ket(*v)]))
    used = [False] * len(groups)
    blocks = []
    for i, (rep, members) in enumerate(groups):
        if used[i]:
            continue
        partner = None
        for j in range(i + 1, len(groups)):
            if used[j]:
                continue
            if np.max(np.abs(projector(groups[j][0]) + projector(rep) - np.eye(2))) <= 1e-10:
                partner = j
                break
        if partner is None:
            raise ProtocolError("basis is not in block form: unpaired sender direction")
        used[i] = used[partner] = True
        blocks.append(
            BasisBlock(alice=rep, bob_bit0=tuple(members), bob_bit1=tuple(groups[partner][1]))
        )
    return blocks


def demo_block_basis() -> list[BasisBlock]:
    """Three-block orthonormal product basis of C^2 x C^6.

    The sender bases of the three blocks are the z, x and y eigenbases; the
    receiver subspaces are spanned by basis pairs (0,1), (2,3), (4,5), with
    the bit-1 families given by the +- superpositions within each pair.
    """
    e = np.eye(6, dtype=complex)

    def plus(i, j):
        return ket(*(e[i] + e[j]))

    def minus(i, j):
        return ket(*(e[i] - e[j]))

    return [
        BasisBlock(alice=ket(1, 0), bob_bit0=(ket(*e[0]), ket(*e[1])),
                   bob_bit1=(plus(0, 1), minus(0, 1))),
        BasisBlock(alice=ket(1, 1), bob_bit0=(ket(*e[2]), ket(*e[3])),
                   bob_bit1=(plus(2, 3), minus(2, 3))),
        BasisBlock(alice=ket(1, 1j), bob_bit0=(ket(*e[4]), ket(*e[5])),
                   bob_bit1=(plus(4, 5), minus(4, 5))),
    ]


# ---------------------------------------------------------------------------
# Several senders (fully product measurements)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiSenderProtocol:
    """Simulator for a fully product measurement with several senders.

    The first sender samples an extremal label for the measurement induced on
    everyone else and the remaining parties solve the residual problem.  In
    configuration A the label is broadcast, so only the selected branch
    transmits; in configuration B the later senders transmit their branch
    messages for every possible label and the receiver selects, which
    multiplies the downstream cost by the alphabet size.
    """

    config: str
    outcomes: tuple[Hashable, ...]
    first_family: tuple[ExtremalPovm, ...]
    branch_protocols: tuple
    joint: tuple[ProductRank1Effect, ...]
    cost_bits: int
    first_bits: int
    branch_bits: tuple[int, ...]

    def mixture_for(self, psi_first: np.ndarray) -> np.ndarray:
        pairs = _peel_pairs(self.joint)
        return mixture_weights(effective_povm(pairs, psi_first), self.first_family).coefficients

    def run_analytic(self, states: Sequence[np.ndarray], phi: np.ndarray) -> np.ndarray:
        """Exact statistics given the senders' known states and the receiver state."""
        states = list(states)
        if not states:
            raise ProtocolError("at least one sender state is required")
        mu = self.mixture_for(states[0])
        index = {label: i for i, label in enumerate(self.outcomes)}
        out = np.zeros(len(self.outcomes))
        for coefficient, branch in zip(mu, self.branch_protocols):
            if coefficient <= 0.0:
                continue
            if isinstance(branch, MultiSenderProtocol):
                sub = branch.run_analytic(states[1:], phi)
                sub_labels = branch.outcomes
            else:
                sub = run_analytic(branch, states[1], phi)
                sub_labels = branch.outcomes
            for label, p in zip(sub_labels, sub):
                out[index[label]] += coefficient * p
        return out

    def run_sampled(
        self, states: Sequence[np.ndarray], phi: np.ndarray, n: int, seed: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Monte Carlo run: sample the first sender's label, then the branches."""
        if n < 1:
            raise ProtocolError("sample count must be at least 1")
        states = list(states)
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        mu = np.clip(self.mixture_for(states[0]), 0.0, None)
        branch_counts = rng.multinomial(n, mu / mu.sum())
        branch_seeds = np.random.SeedSequence(seed).spawn(len(self.branch_protocols) + 1)
        index = {label: i for i, label in enumerate(self.outcomes)}
        counts = np.zeros(len(self.outcomes))
        for b, (count, branch) in enumerate(zip(branch_counts, self.branch_protocols)):
            if count == 0:
                continue
            sub_seed = branch_seeds[b + 1].generate_state(1)[0]
            if isinstance(branch, MultiSenderProtocol):
                freqs, _ = branch.run_sampled(states[1:], phi, int(count), int(sub_seed))
            else:
                freqs, _ = run_sampled(branch, states[1], phi, int(count), int(sub_seed))
            for label, f in zip(branch.outcomes, freqs):
                counts[index[label]] += f * count
        freqs = counts / n
        stderr = np.sqrt(np.clip(freqs * (1.0 - freqs), 0.0, None) / n)
        return freqs, stderr


def _peel_pairs(joint: Sequence[ProductRank1Effect]) -> list[ProductRank1Effect]:
    """View a fully product measurement as (first party) x (everyone else)."""
    pairs = []
    for e in joint:
        rest = e.factors[1]
        for f in e.factors[2:]:
            rest = np.kron(rest, f)
        pairs.append(ProductRank1Effect(weight=e.weight, factors=(e.factors[0], rest)))
    return pairs


def multi_sender_protocol(
    joint: Sequence[ProductRank1Effect],
    config: str,
    labels: Sequence[Hashable] | None = None,
    *,
    minimize_alphabet: bool = True,
) -> MultiSenderProtocol | OneRoundProtocol:
    """Build the multi-sender simulator for a fully product rank-1 measurement.

    With two parties this reduces to ``rank1_product_protocol``.  The general
    case peels the first sender: enumerate extremal measurements of the
    induced measurement on the remaining parties, then recurse per label.
    """
    if config not in ("A", "B"):
        raise ProtocolError(f"config must be 'A' or 'B', got {config!r}")
    joint = tuple(joint)
    parties = {e.n_parties for e in joint}
    if len(parties) != 1:
        raise ProtocolError("effects disagree on the number of parties")
    n_parties = parties.pop()
    if n_parties < 2:
        raise ProtocolError("need at least one sender and one receiver")
    if labels is None:
        labels = tuple(range(len(joint)))
    labels = tuple(labels)
    if n_parties == 2:
        return rank1_product_protocol(joint, labels, minimize_alphabet=minimize_alphabet)

    qmath.assert_product_povm(joint)
    pairs = _peel_pairs(joint)
    slots = [projector(p.factors[1]) for p in pairs]
    family = enumerate_extremals(slots)
    if not family:
        raise DecompositionInfeasibleError("no extremal measurements over the residual slots")
    if minimize_alphabet:
        family = _minimal_subfamily(pairs, family, _probe_states(joint[0].factors[0].shape[0]))
    family = tuple(family)

    branches = []
    for ext in family:
        branch_joint = tuple(
            ProductRank1Effect(weight=w, factors=joint[i].factors[1:])
            for i, w in zip(ext.support, ext.weights)
        )
        branch_labels = tuple(labels[i] for i in ext.support)
        branches.append(
            multi_sender_protocol(
                branch_joint, config, branch_labels, minimize_alphabet=minimize_alphabet
            )
        )
    branch_bits = tuple(b.cost_bits for b in branches)
    first_bits = bit_cost(len(family))
    if config == "A":
        total = first_bits + max(branch_bits)
    else:
        total = first_bits + sum(branch_bits)
    return MultiSenderProtocol(
        config=config,
        outcomes=labels,
        first_family=family,
        branch_protocols=tuple(branches),
        joint=joint,
        cost_bits=total,
        first_bits=first_bits,
        branch_bits=branch_bits,
    )


# ---------------------------------------------------------------------------
# 2 -> 1 random access code
# ---------------------------------------------------------------------------

RAC_GUESS_ZERO = ("z+ z+", "x+ z-")
RAC_GUESS_ONE = ("z- z+", "x- z-")


def rac_preparation(x0: int, x1: int, theta: float = math.pi / 4) -> np.ndarray:
    """Sender state encoding the bit pair; theta balances the z and x components."""
    return bloch_to_density(
        (math.sin(theta) * (-1.0) ** x1, 0.0, math.cos(theta) * (-1.0) ** x0)
    )


def rac_query_state(y: int) -> np.ndarray:
    """Receiver state selecting which bit is being asked for."""
    return bloch_to_density((0.0, 0.0, (-1.0) ** y))


def rac_classical_best() -> tuple[Fraction, list[tuple[tuple, tuple]]]:
    """Exhaustive deterministic 1-bit strategies: exact maximum and its achievers.

    All 16 encodings {0,1}^2 -> {0,1} against all 16 decodings
    {0,1} x {0,1} -> {0,1}, scored over uniform inputs in exact rational
    arithmetic.
    """
    inputs = list(itertools.product((0, 1), repeat=2))
    best = Fraction(0)
    argmax = []
    for encoder in itertools.product((0, 1), repeat=4):
        enc = dict(zip(inputs, encoder))
        for decoder in itertools.product((0, 1), repeat=4):
            dec = dict(zip(itertools.product((0, 1), repeat=2), decoder))
            hits = sum(
                dec[(enc[(x0, x1)], y)] == (x0, x1)[y]
                for x0, x1 in inputs
                for y in (0, 1)
            )
            score = Fraction(hits, 8)
            if score > best:
                best, argmax = score, [(encoder, decoder)]
            elif score == best:
                argmax.append((encoder, decoder))
    return best, argmax


def rac_qubit_table(theta: float = math.pi / 4) -> dict[tuple[int, int, int], float]:
    """Per-instance success of the qubit strategy: measure z for y=0, x for y=1."""
    table = {}
    for x0, x1 in itertools.product((0, 1), repeat=2):
        psi = rac_preparation(x0, x1, theta)
        for y in (0, 1):
            axis = (0.0, 0.0, 1.0) if y == 0 else (1.0, 0.0, 0.0)
            correct_bit = (x0, x1)[y]
            sign = (-1.0) ** correct_bit
            target = bloch_to_density(tuple(sign * c for c in axis))
            table[(x0, x1, y)] = np.trace(target @ psi).real
    return table


def rac_qubit_success(theta: float = math.pi / 4) -> float:
    """Average success of the qubit strategy; (2 + sqrt 2)/4 at the balanced tilt."""
    table = rac_qubit_table(theta)
    return sum(table.values()) / len(table)


def rac_success(stats_fn: Callable[[np.ndarray, np.ndarray], dict]) -> float:
    """Random-access-code success of a claimed simulator of the tilted measurement.

    ``stats_fn(psi, phi)`` must return outcome probabilities keyed by the
    twistA outcome labels.  The receiver guesses 0 on the outcomes whose
    receiver-side projector matches their query state and whose sender-side
    projector points along the positive axis, and 1 otherwise.
    """
    total = 0.0
    count = 0
    for x0, x1 in itertools.product((0, 1), repeat=2):
        psi = rac_preparation(x0, x1)
        for y in (0, 1):
            stats = stats_fn(psi, rac_query_state(y))
            guess0 = sum(stats.get(label, 0.0) for label in RAC_GUESS_ZERO)
            guess1 = sum(stats.get(label, 0.0) for label in RAC_GUESS_ONE)
            correct = (x0, x1)[y]
            total += guess0 if correct == 0 else guess1
            count += 1
    return total / count


def rac_success_via_protocol(protocol: OneRoundProtocol) -> float:
    """RAC success achieved by feeding a one-round simulator through the reduction."""
    expected = set(RAC_GUESS_ZERO + RAC_GUESS_ONE)
    if set(protocol.outcomes) != expected:
        raise ProtocolError("protocol outcomes do not match the tilted measurement")

    def stats_fn(psi, phi):
        probs = run_analytic(protocol, psi, phi)
        return dict(zip(protocol.outcomes, probs))

    return rac_success(stats_fn)


def rac_born_oracle_success() -> float:
    """RAC success of an oracle that outputs the exact joint statistics."""
    povm = qmath.catalog_measurement("twistA")

    def stats_fn(psi, phi):
        return dict(zip(povm.labels, born(tensor(psi, phi), povm)))

    return rac_success(stats_fn)


def rac_one_bit_bound(n_atoms: int = 8) -> tuple[Fraction, dict]:
    """Exact ceiling on RAC success for any 1-bit protocol with shared randomness.

    For each deterministic encoding of the bit pair into one message, the
    receiver's optimal effects solve a linear program whose exact optimum is
    the positive part of an integer diagonal operator, so the per-encoding
    value is exact.  Success is linear in the strategy conditioned on the
    shared atom, so randomizing over up to ``n_atoms`` deterministic choices
    cannot beat the best single encoding.
    """
    if n_atoms < 1:
        raise ProtocolError("need at least one shared-randomness atom")
    inputs = list(itertools.product((0, 1), repeat=2))
    per_encoder = {}
    for encoder in itertools.product((0, 1), repeat=4):
        enc = dict(zip(inputs, encoder))
        gain = 0
        for m in (0, 1):
            chosen = [x for x in inputs if enc[x] == m]
            for y in (0, 1):
                b = sum((-1) ** x[y] for x in chosen)
                gain += max(b, 0)
        per_encoder[encoder] = Fraction(4 + gain, 8)
    best = max(per_encoder.values())
    return best, {"per_encoder": per_encoder, "n_atoms": n_atoms}


def twist_simulator_protocol() -> OneRoundProtocol:
    """Two-bit one-round simulator of the sender-tilted twisted measurement."""
    return catalog_protocol("twistA")
