import math

import numpy as np
import pytest

from qchansim import decompose, qmath
from qchansim.decompose import (
    DecompositionInfeasibleError,
    Rank1Povm,
    coarse_grain,
    effective_povm,
    enumerate_extremals,
    mixture_weights,
    refine_separable,
)
from qchansim.qmath import (
    KET0,
    KET1,
    Povm,
    bloch_to_density,
    born,
    catalog_product_effects,
    density_to_bloch,
    haar_ket,
    projector,
    tensor,
)

RT2 = math.sqrt(2.0)


def tb_bob_slots():
    """Slot projectors of the receiver side of the twisted-butterfly measurement."""
    return [projector(f.factors[1]) for f in catalog_product_effects("tb")]


def tb_mixture_oracle(psi):
    """Closed-form mixture coefficients for the twisted-butterfly family.

    Independent oracle used to freeze expectations: expressed directly in the
    x and z Bloch components of the known state.
    """
    n = density_to_bloch(psi)
    x, z = n[0], n[2]
    mu1 = max(0.0, (1.0 - 2.0 * RT2 * x + 3.0 * z) / 8.0)
    mu2 = 0.5 * (1.0 + z) - mu1
    mu3 = 0.75 * (1.0 - (2.0 * RT2 / 3.0) * x + z / 3.0) - 2.0 * mu1
    mu4 = 0.75 * (1.0 + (2.0 * RT2 / 3.0) * x + z / 3.0) - 2.0 * mu2
    return np.array([mu1, mu2, mu3, mu4])


class TestEnumerateExtremals:
    def test_orthonormal_basis_has_one_extremal(self):
        exts = enumerate_extremals([projector(KET0), projector(KET1)])
        assert len(exts) == 1
        assert exts[0].support == (0, 1)
        np.testing.assert_allclose(exts[0].weights, [1.0, 1.0], atol=1e-12)

    def test_trine_weights_two_thirds(self):
        # Three projectors at 120 degrees on a great circle; brute-force linear
        # solve gives weight 2/3 on each.
        vecs = [(0, 0, 1), (math.sqrt(3) / 2, 0, -0.5), (-math.sqrt(3) / 2, 0, -0.5)]
        exts = enumerate_extremals([bloch_to_density(v) for v in vecs])
        assert len(exts) == 1
        assert exts[0].support == (0, 1, 2)
        np.testing.assert_allclose(exts[0].weights, [2 / 3] * 3, atol=1e-12)

    def test_twisted_butterfly_family(self):
        exts = enumerate_extremals(tb_bob_slots())
        assert [e.support for e in exts] == [(0, 1), (0, 3), (1, 2, 4), (2, 3, 4)]
        np.testing.assert_allclose(exts[0].weights, [1.0, 1.0], atol=1e-10)
        np.testing.assert_allclose(exts[1].weights, [1.0, 1.0], atol=1e-10)
        np.testing.assert_allclose(exts[2].weights, [0.5, 0.75, 0.75], atol=1e-10)
        np.testing.assert_allclose(exts[3].weights, [0.75, 0.5, 0.75], atol=1e-10)

    def test_every_extremal_is_complete_and_positive(self):
        rng = np.random.default_rng(21)
        slots = [projector(haar_ket(2, rng)) for _ in range(6)]
        exts = enumerate_extremals(slots)
        supports = [e.support for e in exts]
        assert len(set(supports)) == len(supports)
        for ext in exts:
            total = sum(w * slots[i] for i, w in zip(ext.support, ext.weights))
            np.testing.assert_allclose(total, np.eye(2), atol=1e-10)
            assert min(ext.weights) > 1e-10

    def test_rejects_non_rank1(self):
        with pytest.raises(ValueError):
            enumerate_extremals([np.eye(2, dtype=complex)])

    def test_rejects_mixed_dimensions(self):
        with pytest.raises(qmath.DimensionError):
            enumerate_extremals([projector(KET0), projector(qmath.ket(1, 0, 0, 0))])


class TestEffectivePovm:
    def test_twisted_butterfly_at_ground_state(self):
        # Trace oracle: weights w_i tr(P_{u_i} |0><0|) on the receiver projectors.
        eff = effective_povm(catalog_product_effects("tb"), projector(KET0))
        np.testing.assert_allclose(eff.weights, [1.0, 0.5, 0.0, 0.5, 0.0], atol=1e-12)

    def test_maximally_mixed_gives_half_marginals(self):
        joint = catalog_product_effects("tb")
        eff = effective_povm(joint, qmath.I2 / 2)
        expected = [e.weight * 0.5 for e in joint]
        np.testing.assert_allclose(eff.weights, expected, atol=1e-12)

    def test_completeness_for_random_states(self):
        rng = np.random.default_rng(5)
        joint = catalog_product_effects("tb")
        for _ in range(100):
            eff = effective_povm(joint, projector(haar_ket(2, rng)))
            total = sum(w * p for w, p in zip(eff.weights, eff.projectors))
            np.testing.assert_allclose(total, np.eye(2), atol=1e-10)

    def test_rejects_incomplete_joint(self):
        joint = list(catalog_product_effects("tb"))[:-1]
        with pytest.raises(qmath.QmathError):
            effective_povm(joint, qmath.I2 / 2)


class TestMixtureWeights:
    def setup_method(self):
        self.joint = catalog_product_effects("tb")
        self.extremals = enumerate_extremals(tb_bob_slots())

    def test_ground_state_mixture(self):
        eff = effective_povm(self.joint, projector(KET0))
        dec = mixture_weights(eff, self.extremals)
        np.testing.assert_allclose(dec.coefficients, [0.5, 0.5, 0.0, 0.0], atol=1e-10)

    def test_single_extremal_target(self):
        ext = self.extremals[2]
        target = Rank1Povm(
            weights=tuple(ext.full_weights(5)),
            projectors=tuple(tb_bob_slots()),
            labels=tuple(range(5)),
        )
        dec = mixture_weights(target, self.extremals)
        np.testing.assert_allclose(dec.coefficients, [0.0, 0.0, 1.0, 0.0], atol=1e-10)

    def test_matches_closed_form_for_100_random_states(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            psi = projector(haar_ket(2, rng))
            dec = mixture_weights(effective_povm(self.joint, psi), self.extremals)
            np.testing.assert_allclose(dec.coefficients, tb_mixture_oracle(psi), atol=1e-9)

    def test_reconstruction_residual(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            psi = projector(haar_ket(2, rng))
            eff = effective_povm(self.joint, psi)
            dec = mixture_weights(eff, self.extremals)
            np.testing.assert_allclose(
                dec.reconstructed_weights(5), eff.weights, atol=1e-9
            )

    def test_end_to_end_statistics(self):
        # Mixture statistics sum_l mu_l born(phi, M^l) must equal the joint
        # Born rule on psi x phi.
        rng = np.random.default_rng(17)
        joint_povm = Povm.from_effects([e.matrix() for e in self.joint])
        slots = tb_bob_slots()
        for _ in range(100):
            psi = projector(haar_ket(2, rng))
            phi = projector(haar_ket(2, rng))
            dec = mixture_weights(effective_povm(self.joint, psi), self.extremals)
            simulated = np.zeros(5)
            for mu, ext in dec.mixture:
                for idx, w in zip(ext.support, ext.weights):
                    simulated[idx] += mu * w * np.trace(slots[idx] @ phi).real
            np.testing.assert_allclose(
                simulated, born(tensor(psi, phi), joint_povm), atol=1e-10
            )

    def test_random_families_reconstruct(self):
        # Full pipeline on random product measurements: enumerate, condition,
        # decompose, reconstruct, for a family that is complete by
        # construction.
        rng = np.random.default_rng(101)
        from helpers import random_product_povm

        for kinds in [("basis", "basis"), ("trine", "basis"), ("basis", "trine")]:
            joint = random_product_povm(rng, kinds)
            slots = [projector(e.factors[1]) for e in joint]
            family = enumerate_extremals(slots)
            for _ in range(10):
                psi = projector(haar_ket(2, rng))
                eff = effective_povm(joint, psi)
                dec = mixture_weights(eff, family)
                np.testing.assert_allclose(
                    dec.reconstructed_weights(len(joint)), eff.weights, atol=1e-9
                )

    def test_infeasible_family_raises(self):
        # Dropping the last extremal makes states on the +x side undecomposable.
        psi = bloch_to_density((1.0, 0.0, 0.0))
        eff = effective_povm(self.joint, psi)
        with pytest.raises(DecompositionInfeasibleError):
            mixture_weights(eff, self.extremals[:3])


class TestRefineSeparable:
    def test_twisted_butterfly_grouping(self):
        joint = catalog_product_effects("tb")
        groups = [[joint[0]], [joint[1], joint[2]], [joint[3], joint[4]]]
        refined, coarse_map = refine_separable(groups)
        assert len(refined) == 5
        assert coarse_map == (0, 1, 1, 2, 2)

    def test_identity_refinement(self):
        joint = catalog_product_effects("comp")
        refined, coarse_map = refine_separable([[e] for e in joint])
        assert refined == tuple(joint)
        assert coarse_map == (0, 1, 2, 3)

    def test_born_equality_under_coarse_graining(self):
        rng = np.random.default_rng(23)
        joint = catalog_product_effects("shift")
        grouping = [[joint[0], joint[3], joint[6]], [joint[1], joint[4]],
                    [joint[2], joint[5], joint[7]]]
        refined, coarse_map = refine_separable(grouping)
        group_povm = Povm.from_effects(
            [sum(t.matrix() for t in g) for g in grouping]
        )
        refined_povm = Povm.from_effects([t.matrix() for t in refined])
        for _ in range(50):
            state = tensor(*[projector(haar_ket(2, rng)) for _ in range(3)])
            coarse = coarse_grain(born(state, refined_povm), coarse_map)
            np.testing.assert_allclose(coarse, born(state, group_povm), atol=1e-12)

    def test_rejects_incomplete_refinement(self):
        joint = catalog_product_effects("comp")
        with pytest.raises(ValueError):
            refine_separable([[e] for e in joint[:-1]])
