"""Parametrized states, interactions, entangler presets, Kraus extraction."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from adqc.core import (
    AncillaSpec,
    CartanParams,
    Entangler,
    LocalFrame,
    MeasBasis,
    assemble_entangler,
    branch_analysis,
    kraus_pair,
    param_state,
    preset,
    preset_labels,
    rotation,
    weyl_interaction,
)
from adqc.linalg import (
    CZ,
    H,
    I2,
    SWAP,
    X,
    Y,
    Z,
    dagger,
    equal_up_to_global_phase,
    is_unitary,
    tensor,
)


def rx(t):
    return rotation("x", t)


class TestParamState:
    def test_plus_at_zero_is_ground(self):
        np.testing.assert_allclose(param_state("+", 0, 0).amplitudes, [1, 0], atol=1e-15)

    def test_plus_at_equator(self):
        got = param_state("+", math.pi / 2, 0).amplitudes
        np.testing.assert_allclose(got, [1 / math.sqrt(2)] * 2, atol=1e-15)

    def test_minus_at_zero(self):
        np.testing.assert_allclose(param_state("-", 0, 0).amplitudes, [0, -1], atol=1e-15)

    def test_orthonormal_pair(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            t, p = rng.uniform(0, 2 * math.pi, 2)
            a = param_state("+", t, p).amplitudes
            b = param_state("-", t, p).amplitudes
            assert abs(np.vdot(a, b)) < 1e-14


class TestRotation:
    def test_identity(self):
        np.testing.assert_allclose(rotation("x", 0), I2, atol=1e-15)

    def test_half_turn(self):
        np.testing.assert_allclose(rotation("x", math.pi), -1j * X, atol=1e-15)

    def test_quarter_z(self):
        expect = np.diag([np.exp(-1j * math.pi / 4), np.exp(1j * math.pi / 4)])
        np.testing.assert_allclose(rotation("z", math.pi / 2), expect, atol=1e-15)

    def test_matches_matrix_exponential(self):
        rng = np.random.default_rng(1)
        for axis, pauli in (("x", X), ("z", Z)):
            for _ in range(10):
                t = rng.uniform(-2 * math.pi, 2 * math.pi)
                np.testing.assert_allclose(
                    rotation(axis, t), expm(-1j * t * pauli / 2), atol=1e-12
                )


class TestWeylInteraction:
    def test_zero_exponent(self):
        np.testing.assert_allclose(
            weyl_interaction(CartanParams(0, 0, 0)), np.eye(4), atol=1e-15
        )

    def test_single_axis_closed_form(self):
        got = weyl_interaction(CartanParams(math.pi / 4, 0, 0))
        expect = (np.eye(4) - 1j * tensor(X, X)) / math.sqrt(2)
        np.testing.assert_allclose(got, expect, atol=1e-15)

    def test_against_matrix_exponential(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            az = rng.uniform(0, math.pi / 4)
            ay = rng.uniform(az, math.pi / 4)
            ax = rng.uniform(ay, math.pi / 4)
            ham = ax * tensor(X, X) + ay * tensor(Y, Y) + az * tensor(Z, Z)
            got = weyl_interaction(CartanParams(ax, ay, az))
            np.testing.assert_allclose(got, expm(-1j * ham), atol=1e-12)
            assert is_unitary(got)

    def test_factor_commutation(self):
        a = weyl_interaction(CartanParams(0.6, 0, 0))
        b = weyl_interaction(CartanParams(0.0, 0.3, 0))
        ab = weyl_interaction(CartanParams(0.6, 0.3, 0))
        np.testing.assert_allclose(a @ b, ab, atol=1e-15)
        np.testing.assert_allclose(b @ a, ab, atol=1e-15)

    def test_chamber_violation(self):
        with pytest.raises(ValueError):
            CartanParams(1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            CartanParams(0.1, -0.5, 0.0)


class TestEntanglerPresets:
    def test_hhcz_reassembles_exactly(self):
        got = assemble_entangler(preset("HHCZ"))
        np.testing.assert_allclose(got, tensor(H, H) @ CZ, atol=1e-14)

    def test_swapcz_reassembles_exactly(self):
        got = assemble_entangler(preset("SWAPCZ"))
        np.testing.assert_allclose(got, SWAP @ CZ, atol=1e-14)

    def test_swapcz_interaction_class(self):
        p = preset("SWAPCZ").cartan
        assert (p.alpha_x, p.alpha_y, p.alpha_z) == (math.pi / 4, math.pi / 4, 0.0)

    def test_all_presets_unitary(self):
        for label in preset_labels():
            assert is_unitary(assemble_entangler(preset(label)), 1e-12), label

    def test_identity_frame_assembly(self):
        e = Entangler(CartanParams(math.pi / 4, 0, 0), LocalFrame(), "custom")
        expect = (np.eye(4) - 1j * tensor(X, X)) / math.sqrt(2)
        np.testing.assert_allclose(assemble_entangler(e), expect, atol=1e-15)

    def test_unknown_preset(self):
        with pytest.raises(KeyError):
            preset("NOPE")


CZ_CANON = preset("CZ_CANON")


class TestKrausPair:
    def test_rotation_pair(self):
        """Hidden-angle row: branches are Rx(g) and X Rx(-g) at weight 1/sqrt2."""
        for g in (0.3, 1.2, 2.5, 4.0):
            pair = kraus_pair(CZ_CANON, AncillaSpec(g, 0), MeasBasis(0, 0))
            assert equal_up_to_global_phase(math.sqrt(2) * pair.k_plus, rx(g), 1e-10)
            assert equal_up_to_global_phase(
                math.sqrt(2) * pair.k_minus, X @ rx(-g), 1e-10
            )
            assert abs(pair.p_plus - 0.5) < 1e-12
            assert abs(pair.p_minus - 0.5) < 1e-12

    def test_standard_ancilla_rows(self):
        pair = kraus_pair(CZ_CANON, AncillaSpec(0, 0), MeasBasis(1.1, 0))
        assert equal_up_to_global_phase(math.sqrt(2) * pair.k_plus, rx(1.1), 1e-10)
        assert equal_up_to_global_phase(math.sqrt(2) * pair.k_minus, X @ rx(1.1), 1e-10)

        pair = kraus_pair(CZ_CANON, AncillaSpec(0, 0), MeasBasis(0, 0))
        assert equal_up_to_global_phase(math.sqrt(2) * pair.k_plus, I2, 1e-10)
        assert equal_up_to_global_phase(math.sqrt(2) * pair.k_minus, X, 1e-10)

    def test_completeness_random_sample(self):
        rng = np.random.default_rng(9)
        for _ in range(300):
            az = rng.uniform(0, math.pi / 4)
            ay = rng.uniform(az, math.pi / 4)
            ax = rng.uniform(ay, math.pi / 4)
            e = Entangler(CartanParams(ax, ay, az), LocalFrame(), "custom")
            a = AncillaSpec(*rng.uniform(0, 2 * math.pi, 2))
            m = MeasBasis(*rng.uniform(0, 2 * math.pi, 2))
            pair = kraus_pair(e, a, m)
            total = dagger(pair.k_plus) @ pair.k_plus + dagger(pair.k_minus) @ pair.k_minus
            np.testing.assert_allclose(total, I2, atol=1e-10)
            assert abs(pair.p_plus + pair.p_minus - 1) < 1e-10

    def test_completeness_with_dressed_frames(self):
        rng = np.random.default_rng(10)
        for label in preset_labels():
            e = preset(label)
            for _ in range(50):
                a = AncillaSpec(*rng.uniform(0, 2 * math.pi, 2))
                m = MeasBasis(*rng.uniform(0, 2 * math.pi, 2))
                pair = kraus_pair(e, a, m)
                total = (
                    dagger(pair.k_plus) @ pair.k_plus
                    + dagger(pair.k_minus) @ pair.k_minus
                )
                np.testing.assert_allclose(total, I2, atol=1e-10)

    def test_balanced_probabilities_on_protocol_rows(self):
        """Both rounds the delegation uses (theta=0 with any hidden angle, and
        standard ancilla with any basis angle) have exactly balanced branches."""
        rng = np.random.default_rng(12)
        for _ in range(200):
            g = rng.uniform(0, 2 * math.pi)
            p1 = kraus_pair(CZ_CANON, AncillaSpec(g, 0), MeasBasis(0, 0))
            t = rng.uniform(0, 2 * math.pi)
            p2 = kraus_pair(CZ_CANON, AncillaSpec(0, 0), MeasBasis(t, 0))
            for pair in (p1, p2):
                assert abs(pair.p_plus - 0.5) < 1e-10

    def test_frame_absorption_rewrite(self):
        """Dressed-entangler branches factor as w_s (bare branches with frame-
        rotated ancilla ket and measurement bra) v_s."""
        rng = np.random.default_rng(13)
        for _ in range(40):
            frame = LocalFrame(
                v_s=_rand_u2(rng), v_a=_rand_u2(rng), w_s=_rand_u2(rng), w_a=_rand_u2(rng)
            )
            e = Entangler(CartanParams(math.pi / 4, 0.2, 0.1), frame, "custom")
            a = AncillaSpec(*rng.uniform(0, 2 * math.pi, 2))
            m = MeasBasis(*rng.uniform(0, 2 * math.pi, 2))
            dressed = kraus_pair(e, a, m)

            bare = Entangler(e.cartan, LocalFrame(), "bare")
            em = assemble_entangler(bare)
            ket = frame.v_a @ a.ket().amplitudes
            bra_p, bra_m = (frame.w_a.conj().T.conj().T @ b.amplitudes for b in m.bra_states())
            # rotated bras: <m| w_a  <->  state (w_a^dag)^dag... i.e. w_a^dag |m>
            bra_p = dagger(frame.w_a) @ m.bra_states()[0].amplitudes
            bra_m = dagger(frame.w_a) @ m.bra_states()[1].amplitudes
            e4 = em.reshape(2, 2, 2, 2)
            kp = frame.w_s @ np.einsum("a,aibj,b->ij", bra_p.conj(), e4, ket) @ frame.v_s
            km = frame.w_s @ np.einsum("a,aibj,b->ij", bra_m.conj(), e4, ket) @ frame.v_s
            np.testing.assert_allclose(dressed.k_plus, kp, atol=1e-10)
            np.testing.assert_allclose(dressed.k_minus, km, atol=1e-10)

    def test_branch_form_split(self):
        pair = kraus_pair(CZ_CANON, AncillaSpec(0.9, 0), MeasBasis(0, 0))
        bf_p, bf_m = pair.branch_form
        assert bf_p is not None and bf_m is not None
        assert abs(bf_p.f - abs(math.cos(0.45)) / math.sqrt(2)) < 1e-12
        assert abs(bf_p.g - abs(math.sin(0.45)) / math.sqrt(2)) < 1e-12

    def test_branch_form_parity_differs_on_correctable_row(self):
        """On the one-step-correctable rotation row the internal signs of the
        two branches are opposite; this is what lets a single X correct them."""
        for t in (0.4, 1.3, 2.1):
            pair = kraus_pair(CZ_CANON, AncillaSpec(0, 0), MeasBasis(t, 0))
            bf_p, bf_m = pair.branch_form
            assert bf_p is not None and bf_m is not None
            assert bf_p.n_parity != bf_m.n_parity


def _rand_u2(rng):
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(m)
    return q @ np.diag(np.diag(r) / np.abs(np.diag(r)))


class TestBranchAnalysis:
    def test_rotation_row_correctable(self):
        pair = kraus_pair(CZ_CANON, AncillaSpec(0, 0), MeasBasis(0.8, 0))
        rep = branch_analysis(pair)
        assert rep.unitary_plus and rep.unitary_minus
        assert rep.one_step_correctable and rep.correction == "X"
        assert abs(abs(rep.scale) - 1) < 1e-9

    def test_hidden_angle_row_uncorrectable(self):
        pair = kraus_pair(CZ_CANON, AncillaSpec(1.0, 0), MeasBasis(0, 0))
        rep = branch_analysis(pair)
        assert rep.unitary_plus and rep.unitary_minus
        assert not rep.one_step_correctable

    def test_flipped_ancilla_row(self):
        """Ancilla |1>: branches proportional to X and to the identity."""
        pair = kraus_pair(CZ_CANON, AncillaSpec(math.pi, 0), MeasBasis(0, 0))
        assert equal_up_to_global_phase(math.sqrt(2) * pair.k_plus, X, 1e-10)
        assert equal_up_to_global_phase(math.sqrt(2) * pair.k_minus, I2, 1e-10)
        rep = branch_analysis(pair)
        assert rep.one_step_correctable and rep.correction == "X"

    def test_nonunitary_when_constraint_broken(self):
        pair = kraus_pair(CZ_CANON, AncillaSpec(1.0, 1.0), MeasBasis(0.5, 1.3))
        rep = branch_analysis(pair)
        assert not (rep.unitary_plus and rep.unitary_minus)
