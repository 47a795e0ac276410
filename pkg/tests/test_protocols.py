import math
from fractions import Fraction

import numpy as np
import pytest
from helpers import (
    born_product_oracle,
    mixed_product_povm,
    random_product_povm,
)

from qchansim import qmath
from qchansim.protocols import (
    BasisBlock,
    OneRoundProtocol,
    ProtocolError,
    SharedRandomness,
    bit_cost,
    block_basis_protocol,
    block_branch_table,
    blocks_from_product_basis,
    catalog_protocol,
    constant_protocol,
    demo_block_basis,
    multi_sender_protocol,
    rac_born_oracle_success,
    rac_classical_best,
    rac_one_bit_bound,
    rac_qubit_success,
    rac_qubit_table,
    rac_success_via_protocol,
    rank1_product_protocol,
    run_analytic,
    run_sampled,
    twist_simulator_protocol,
)
from qchansim.qmath import (
    KET0,
    born,
    catalog_labels,
    catalog_measurement,
    catalog_product_effects,
    haar_ket,
    ket,
    projector,
    tensor,
)

RT2 = math.sqrt(2.0)
QUBIT_OPTIMUM = 0.5 * (1.0 + 1.0 / RT2)


class TestRunAnalytic:
    def test_constant_protocol_reduces_to_born(self):
        rng = np.random.default_rng(1)
        m = catalog_measurement("comp")
        p = constant_protocol(m)
        for _ in range(10):
            phi = projector(haar_ket(4, rng))
            np.testing.assert_allclose(
                run_analytic(p, qmath.I2 / 2, phi), born(phi, m), atol=1e-14
            )

    def test_encoder_normalization_enforced(self):
        p = OneRoundProtocol(
            randomness=SharedRandomness.trivial(),
            messages=(0, 1),
            encoder=lambda atom, psi: np.array([0.7, 0.7]),
            decoder=lambda m, atom: catalog_measurement("comp"),
            outcomes=catalog_measurement("comp").labels,
            cost_bits=1,
        )
        with pytest.raises(ProtocolError):
            run_analytic(p, qmath.I2 / 2, np.eye(4, dtype=complex) / 4)


class TestRankOneProductProtocol:
    def test_twisted_butterfly_matches_born(self):
        rng = np.random.default_rng(3)
        joint = catalog_product_effects("tb")
        protocol = rank1_product_protocol(joint, labels=catalog_labels("tb"))
        for _ in range(50):
            psi = projector(haar_ket(2, rng))
            phi = projector(haar_ket(2, rng))
            np.testing.assert_allclose(
                run_analytic(protocol, psi, phi),
                born_product_oracle(joint, psi, phi),
                atol=1e-10,
            )

    def test_twisted_butterfly_costs_two_bits(self):
        assert catalog_protocol("tb").cost_bits == 2

    def test_computational_basis_costs_one_bit(self):
        protocol = catalog_protocol("comp")
        assert protocol.cost_bits == 1
        assert protocol.n_messages == 2
        rng = np.random.default_rng(5)
        joint = catalog_product_effects("comp")
        for _ in range(20):
            psi = projector(haar_ket(2, rng))
            phi = projector(haar_ket(2, rng))
            np.testing.assert_allclose(
                run_analytic(protocol, psi, phi),
                born_product_oracle(joint, psi, phi),
                atol=1e-10,
            )

    def test_tilted_measurements_cost_two_bits(self):
        assert catalog_protocol("twistA").cost_bits == 2
        assert catalog_protocol("twistB").cost_bits == 1

    def test_random_product_measurements(self):
        rng = np.random.default_rng(7)
        for kinds in [("basis", "basis"), ("trine", "basis"), ("basis", "trine")]:
            joint = random_product_povm(rng, kinds)
            protocol = rank1_product_protocol(joint)
            for _ in range(10):
                psi = projector(haar_ket(2, rng))
                phi = projector(haar_ket(2, rng))
                np.testing.assert_allclose(
                    run_analytic(protocol, psi, phi),
                    born_product_oracle(joint, psi, phi),
                    atol=1e-10,
                )

    def test_six_outcome_random_measurement(self):
        rng = np.random.default_rng(11)
        joint = mixed_product_povm(rng)
        protocol = rank1_product_protocol(joint)
        psi = projector(haar_ket(2, rng))
        phi = projector(haar_ket(2, rng))
        np.testing.assert_allclose(
            run_analytic(protocol, psi, phi),
            born_product_oracle(joint, psi, phi),
            atol=1e-10,
        )

    def test_large_family_without_pruning(self):
        rng = np.random.default_rng(13)
        joint = random_product_povm(rng, ("tetra", "tetra"))
        protocol = rank1_product_protocol(joint)
        psi = projector(haar_ket(2, rng))
        phi = projector(haar_ket(2, rng))
        np.testing.assert_allclose(
            run_analytic(protocol, psi, phi),
            born_product_oracle(joint, psi, phi),
            atol=1e-10,
        )


class TestRunSampled:
    def test_same_seed_is_reproducible(self):
        protocol = catalog_protocol("tb")
        psi = projector(ket(1, 1j))
        phi = projector(ket(2, 1))
        a, _ = run_sampled(protocol, psi, phi, 2000, seed=42)
        b, _ = run_sampled(protocol, psi, phi, 2000, seed=42)
        np.testing.assert_array_equal(a, b)

    def test_matches_analytic_within_four_sigma(self):
        rng = np.random.default_rng(17)
        joint = catalog_product_effects("tb")
        protocol = rank1_product_protocol(joint, labels=catalog_labels("tb"))
        psi = projector(haar_ket(2, rng))
        phi = projector(haar_ket(2, rng))
        n = 10**6
        analytic = run_analytic(protocol, psi, phi)
        freqs, _ = run_sampled(protocol, psi, phi, n, seed=7)
        sigma = np.sqrt(np.clip(analytic * (1 - analytic), 1e-12, None) / n)
        assert np.all(np.abs(freqs - analytic) <= 4.0 * sigma)

    def test_deterministic_branch_is_exact(self):
        # Point-mass encoder and an eigenstate receiver: sampling has no noise.
        m = qmath.Povm.from_effects([projector(KET0), projector(qmath.KET1)])
        p = constant_protocol(m)
        freqs, stderr = run_sampled(p, qmath.I2 / 2, projector(KET0), 1000, seed=1)
        np.testing.assert_array_equal(freqs, born(projector(KET0), m))
        np.testing.assert_array_equal(stderr, [0.0, 0.0])


class TestBlockBasisProtocol:
    def demo_povm(self):
        blocks = demo_block_basis()
        effects, labels = [], []
        for i, b in enumerate(blocks):
            for j, v in enumerate(b.bob_bit0):
                effects.append(projector(tensor(b.alice, v)))
                labels.append((i, 0, j))
            for j, v in enumerate(b.bob_bit1):
                effects.append(projector(tensor(b.alice_perp, v)))
                labels.append((i, 1, j))
        return qmath.Povm(effects=tuple(effects), labels=tuple(labels))

    def test_three_blocks_cost_three_bits(self):
        protocol = block_basis_protocol(demo_block_basis())
        assert protocol.cost_bits == 3
        assert protocol.n_messages == 8

    def test_worked_point(self):
        # Known sender state |0>, receiver basis state 2: only the x-basis
        # block fires, splitting 1/2 : 1/4 : 1/4.
        protocol = block_basis_protocol(demo_block_basis())
        e2 = np.zeros(6, dtype=complex)
        e2[2] = 1.0
        dist = run_analytic(protocol, projector(KET0), projector(e2))
        expected = {(1, 0, 0): 0.5, (1, 1, 0): 0.25, (1, 1, 1): 0.25}
        for label, p in zip(protocol.outcomes, dist):
            np.testing.assert_allclose(p, expected.get(label, 0.0), atol=1e-12)

    def test_matches_born_for_random_states(self):
        rng = np.random.default_rng(19)
        protocol = block_basis_protocol(demo_block_basis())
        povm = self.demo_povm()
        order = [povm.labels.index(label) for label in protocol.outcomes]
        for _ in range(50):
            psi = projector(haar_ket(2, rng))
            phi = projector(haar_ket(6, rng))
            np.testing.assert_allclose(
                run_analytic(protocol, psi, phi),
                born(tensor(psi, phi), povm)[order],
                atol=1e-12,
            )

    def test_single_block_costs_one_bit(self):
        basis = np.eye(3, dtype=complex)
        block = BasisBlock(
            alice=ket(1, 0),
            bob_bit0=tuple(basis),
            bob_bit1=tuple(basis),
        )
        assert block_basis_protocol([block]).cost_bits == 1

    def test_branch_table_structure(self):
        blocks = demo_block_basis()
        table = block_branch_table(blocks)
        assert [row["block"] for row in table] == [0, 1, 2]
        # Subspace selectors pick out coordinate pairs (0,1), (2,3), (4,5).
        for i, row in enumerate(table):
            expected = np.zeros((6, 6))
            expected[2 * i, 2 * i] = expected[2 * i + 1, 2 * i + 1] = 1.0
            np.testing.assert_allclose(row["subspace_projector"], expected, atol=1e-12)
        # Sender bases are the z, x, y eigenbases.
        np.testing.assert_allclose(table[0]["alice_basis"][0], ket(1, 0), atol=1e-12)
        np.testing.assert_allclose(table[1]["alice_basis"][0], ket(1, 1), atol=1e-12)
        np.testing.assert_allclose(table[2]["alice_basis"][0], ket(1, 1j), atol=1e-12)

    def test_block_discovery_round_trip(self):
        blocks = demo_block_basis()
        pairs = []
        for b in blocks:
            pairs.extend((b.alice, v) for v in b.bob_bit0)
            pairs.extend((b.alice_perp, v) for v in b.bob_bit1)
        recovered = blocks_from_product_basis(pairs)
        assert len(recovered) == 3
        protocol = block_basis_protocol(recovered)
        assert protocol.cost_bits == 3

    def test_rejects_non_orthonormal(self):
        basis = np.eye(2, dtype=complex)
        bad = BasisBlock(
            alice=ket(1, 0),
            bob_bit0=tuple(basis),
            bob_bit1=(ket(1, 0), ket(1, 1)),
        )
        with pytest.raises(ProtocolError):
            block_basis_protocol([bad])


class TestMultiSender:
    def shift_povm(self):
        return qmath.catalog_measurement("shift")

    @pytest.mark.parametrize("config", ["A", "B"])
    def test_shift_basis_matches_born(self, config):
        rng = np.random.default_rng(23)
        joint = catalog_product_effects("shift")
        protocol = multi_sender_protocol(joint, config, labels=catalog_labels("shift"))
        povm = self.shift_povm()
        for _ in range(50):
            psi1 = projector(haar_ket(2, rng))
            psi2 = projector(haar_ket(2, rng))
            phi = projector(haar_ket(2, rng))
            state = tensor(psi1, psi2, phi)
            np.testing.assert_allclose(
                protocol.run_analytic([psi1, psi2], phi),
                born(state, povm),
                atol=1e-10,
            )

    def test_config_b_costs_at_least_config_a(self):
        joint = catalog_product_effects("shift")
        a = multi_sender_protocol(joint, "A", labels=catalog_labels("shift"))
        b = multi_sender_protocol(joint, "B", labels=catalog_labels("shift"))
        assert b.cost_bits >= a.cost_bits
        assert b.cost_bits > a.cost_bits  # shift has a branching alphabet

    def test_three_local_bases_one_bit_each(self):
        bases = [
            (ket(1, 0), ket(0, 1)),
            (ket(1, 1), ket(1, -1)),
            (ket(1, 1j), ket(1, -1j)),
        ]
        joint = [
            qmath.ProductRank1Effect(weight=1.0, factors=(a, b, c))
            for a in bases[0]
            for b in bases[1]
            for c in bases[2]
        ]
        protocol = multi_sender_protocol(joint, "A")
        assert protocol.first_bits == 1
        assert all(bits == 1 for bits in protocol.branch_bits)
        assert protocol.cost_bits == 2

        rng = np.random.default_rng(29)
        povm = qmath.Povm.from_effects([e.matrix() for e in joint])
        for _ in range(10):
            psi1 = projector(haar_ket(2, rng))
            psi2 = projector(haar_ket(2, rng))
            phi = projector(haar_ket(2, rng))
            np.testing.assert_allclose(
                protocol.run_analytic([psi1, psi2], phi),
                born(tensor(psi1, psi2, phi), povm),
                atol=1e-10,
            )

    def test_rejects_bad_config(self):
        with pytest.raises(ProtocolError):
            multi_sender_protocol(catalog_product_effects("shift"), "C")


class TestRac:
    def test_classical_maximum_is_three_quarters(self):
        best, argmax = rac_classical_best()
        assert best == Fraction(3, 4)
        # "Send x0, always answer the message" is among the maximizers.
        send_x0 = (0, 0, 1, 1)  # encoder over (x0,x1) in lex order
        echo = (0, 0, 1, 1)  # decoder over (m,y) in lex order
        assert (send_x0, echo) in argmax

    def test_constant_strategy_is_a_coin_flip(self):
        # Send 0 always, guess 0 always: correct exactly when x_y = 0.
        hits = sum((x0, x1)[y] == 0 for x0 in (0, 1) for x1 in (0, 1) for y in (0, 1))
        assert Fraction(hits, 8) == Fraction(1, 2)

    def test_qubit_success(self):
        assert abs(rac_qubit_success() - (2 + RT2) / 4) <= 1e-12

    def test_qubit_per_instance_success_is_uniform(self):
        table = rac_qubit_table()
        values = list(table.values())
        assert max(values) - min(values) <= 1e-12
        assert abs(values[0] - QUBIT_OPTIMUM) <= 1e-12

    def test_unbalanced_tilt_does_worse(self):
        assert rac_qubit_success(theta=0.0) < QUBIT_OPTIMUM - 0.05
        assert rac_qubit_success(theta=math.pi / 3) < QUBIT_OPTIMUM

    def test_born_oracle_reaches_qubit_optimum(self):
        assert abs(rac_born_oracle_success() - QUBIT_OPTIMUM) <= 1e-12

    def test_two_bit_simulator_reaches_qubit_optimum(self):
        protocol = twist_simulator_protocol()
        assert protocol.cost_bits == 2
        assert abs(rac_success_via_protocol(protocol) - QUBIT_OPTIMUM) <= 1e-10

    def test_one_bit_bound(self):
        best, detail = rac_one_bit_bound(n_atoms=8)
        assert best == Fraction(3, 4)
        assert best <= Fraction(3, 4) + Fraction(1, 10**9)
        # Shared randomness mixes per-encoder values and cannot exceed the max.
        rng = np.random.default_rng(31)
        values = list(detail["per_encoder"].values())
        for _ in range(100):
            weights = rng.dirichlet(np.ones(8))
            chosen = rng.choice(len(values), size=8)
            mix = sum(w * float(values[i]) for w, i in zip(weights, chosen))
            assert mix <= 0.75 + 1e-9


class TestBitCost:
    @pytest.mark.parametrize("size,bits", [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3)])
    def test_ceil_log2(self, size, bits):
        assert bit_cost(size) == bits
