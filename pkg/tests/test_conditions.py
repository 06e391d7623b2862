"""Closed-form conditions: constraint, coefficients, relation, tables, hiding."""

import math

import numpy as np
import pytest

from adqc.conditions import (
    DegenerateRelationError,
    ParamPoint,
    TableCase,
    classify_parameters,
    constraint_residual,
    fg_coefficients,
    l_hiding_residual,
    l_hiding_sign,
    pauli_components,
    relation_residual,
    required_alpha_x,
    sample_constraint_point,
    unitarity_relation_sweep,
    vw_form_check,
)
from adqc.core import (
    AncillaSpec,
    CartanParams,
    Entangler,
    LocalFrame,
    MeasBasis,
    kraus_pair,
    rotation,
)
from adqc.linalg import H, I2, X, Y, Z

PI = math.pi


def point(ax, g, d, t, f):
    return ParamPoint(ax, AncillaSpec(g, d), MeasBasis(t, f))


class TestConstraint:
    def test_vanishing_cases(self):
        assert constraint_residual(point(0.3, 0, 1.0, 2.0, 0)) == pytest.approx(0.0, abs=1e-15)

    def test_direct_substitution(self):
        got = constraint_residual(point(0.3, PI / 2, PI / 2, 0, 0))
        assert got == pytest.approx(-1.0, abs=1e-12)

    def test_matched_row_satisfies(self):
        for g, d in ((0.7, 0.2), (2.1, 1.9)):
            got = constraint_residual(point(0.3, g, d, g, d))
            assert abs(got) < 1e-12


class TestFgCoefficients:
    def test_balanced_point(self):
        fp, fm, gp, gm = fg_coefficients(point(PI / 4, 0, 0, PI / 2, 0))
        assert fp == pytest.approx(0.5, abs=1e-12)
        assert fm == pytest.approx(0.5, abs=1e-12)
        assert gp == pytest.approx(0.5, abs=1e-12)
        assert gm == pytest.approx(0.5, abs=1e-12)

    def test_identity_row_split(self):
        # branch + is proportional to I, branch - to X
        fp, fm, gp, gm = fg_coefficients(point(PI / 4, 0, 0, 0, 0))
        assert fp == pytest.approx(1 / math.sqrt(2), abs=1e-12)
        assert fm == pytest.approx(0.0, abs=1e-12)
        assert gp == pytest.approx(0.0, abs=1e-12)
        assert gm == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_zero_interaction_kills_g(self):
        fp, fm, gp, gm = fg_coefficients(point(0.0, 1.0, 0, 2.0, 0))
        assert gp == 0.0 and gm == 0.0

    def test_precondition_enforced(self):
        with pytest.raises(ValueError):
            fg_coefficients(point(0.3, 1.0, 1.0, 0.5, 1.3))

    def test_matches_computed_branch_magnitudes(self):
        """The formulas reproduce the I/X component magnitudes of the actual
        branches on constraint-satisfying points."""
        rng = np.random.default_rng(21)
        for _ in range(400):
            p = sample_constraint_point(rng)
            fp, fm, gp, gm = fg_coefficients(p)
            pair = kraus_pair(
                Entangler(CartanParams(p.alpha_x), LocalFrame(), "x"), p.ancilla, p.basis
            )
            cp = pauli_components(pair.k_plus)
            cm = pauli_components(pair.k_minus)
            assert abs(abs(cp["I"]) - fp) < 1e-9
            assert abs(abs(cp["X"]) - gp) < 1e-9
            assert abs(abs(cm["I"]) - fm) < 1e-9
            assert abs(abs(cm["X"]) - gm) < 1e-9
            assert abs(cp["Y"]) < 1e-12 and abs(cp["Z"]) < 1e-12


class TestRequiredAlphaX:
    def test_rotation_row_forces_max_strength(self):
        got = required_alpha_x(AncillaSpec(0, 0), MeasBasis(PI / 3, 0))
        assert got == pytest.approx(PI / 4, abs=1e-12)

    def test_degenerate_case(self):
        with pytest.raises(DegenerateRelationError):
            required_alpha_x(AncillaSpec(0, 0), MeasBasis(0, 0))

    def test_matched_row_value(self):
        # numerator vanishes on the matched row, so the relation singles out 0
        got = required_alpha_x(AncillaSpec(0.9, 0), MeasBasis(0.9, 0))
        assert got == pytest.approx(0.0, abs=1e-12)

    def test_relation_residual_zero_at_required(self):
        rng = np.random.default_rng(22)
        for _ in range(200):
            p = sample_constraint_point(rng)
            try:
                ax = required_alpha_x(p.ancilla, p.basis)
            except DegenerateRelationError:
                continue
            if ax > PI / 4:
                continue
            q = ParamPoint(ax, p.ancilla, p.basis)
            assert abs(relation_residual(q)) < 1e-10


class TestClassification:
    def test_identity_row(self):
        assert classify_parameters(point(PI / 4, 0, 0.4, 0, 0)) is TableCase.T1_IDENTITY

    def test_rotation_row(self):
        assert classify_parameters(point(PI / 4, 0, 0, 1.3, 0)) is TableCase.T1_XROT

    def test_flipped_ancilla_row(self):
        assert classify_parameters(point(PI / 4, PI, 0, 0, 0)) is TableCase.T1_X_A

    def test_equator_row(self):
        assert classify_parameters(point(PI / 4, 0.9, 0.4, PI / 2, 0)) is TableCase.T1_X_B

    def test_hidden_rotation_row(self):
        assert (
            classify_parameters(point(PI / 4, 1.0, 0, 0, 0)) is TableCase.T2_GENERAL_DELTA0
        )

    def test_matched_row(self):
        assert classify_parameters(point(PI / 4, 0.8, 0.5, 0.8, 0.5)) is TableCase.T2_MATCHED

    def test_no_match(self):
        got = classify_parameters(point(PI / 4, PI / 2, PI / 5, PI / 3, PI / 7))
        assert got is TableCase.NONE

    def test_random_negatives_have_no_false_positives(self):
        from adqc.conditions import _match_case

        rng = np.random.default_rng(23)
        checked = 0
        while checked < 1000:
            g, d, t, f = rng.uniform(0.2, 2 * PI - 0.2, 4)
            p = point(PI / 4, g, d, t, f)
            if _match_case(p, 1e-9) is not TableCase.NONE:
                continue
            checked += 1
            assert classify_parameters(p, 1e-9) is TableCase.NONE


class TestFrameForms:
    def test_hadamard_pair(self):
        assert vw_form_check(H, H)  # product is the identity

    def test_y_form(self):
        assert vw_form_check(Y, I2)

    def test_mixed_product_rejected(self):
        assert not vw_form_check(I2, rotation("z", PI / 3))

    def test_x_rotation_products(self):
        assert vw_form_check(rotation("x", 0.7), rotation("x", 1.9))


class TestLHiding:
    def test_trivial_frame(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            t, g = rng.uniform(0, 2 * PI, 2)
            s = int(rng.integers(2))
            assert l_hiding_residual(I2, I2, t, g, s) < 1e-12

    def test_anticommuting_frame(self):
        for t in np.linspace(0, 2 * PI, 16, endpoint=False):
            for g in np.linspace(0, 2 * PI, 16, endpoint=False):
                for s in (0, 1):
                    assert l_hiding_residual(Z, I2, t, g, s) < 1e-10

    def test_generic_frame_fails(self):
        count = 0
        for t in np.linspace(0.3, 5.9, 8):
            for g in np.linspace(0.3, 5.9, 8):
                if l_hiding_residual(I2, rotation("z", PI / 3), t, g, 0) > 0.1:
                    count += 1
        assert count > 40  # generic angles break the absorption law

    def test_sign_convention(self):
        assert l_hiding_sign(I2, I2) == 1
        assert l_hiding_sign(Z, I2) == -1
        assert l_hiding_sign(I2, rotation("z", PI / 3)) == 0

    def test_form_theorem_contrapositive(self):
        """Frames passing the absorption law on a grid satisfy the form check;
        sampled over random unitary pairs plus constructed compliant ones."""
        rng = np.random.default_rng(33)

        def rand_u2():
            m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            q, r = np.linalg.qr(m)
            return q @ np.diag(np.diag(r) / np.abs(np.diag(r)))

        grid = np.linspace(0, 2 * PI, 16, endpoint=False)

        def hiding_holds(v, w):
            for t in grid[::4]:
                for g in grid[::4]:
                    for s in (0, 1):
                        if l_hiding_residual(v, w, t, g, s) > 1e-9:
                            return False
            return True

        pairs = [(rand_u2(), rand_u2()) for _ in range(300)]
        pairs += [(rotation("x", 0.5), rotation("x", 1.1)), (Z, I2), (Y, I2), (H, H)]
        for v, w in pairs:
            if hiding_holds(v, w):
                assert vw_form_check(v, w, 1e-7)

    def test_plane_confinement_for_ix_frames(self):
        """With an aI+ibX frame product, every kernel composed from the slot
        gates is an X-axis rotation and preserves the X Bloch coordinate."""
        rng = np.random.default_rng(34)
        v, w = rotation("x", 0.4), rotation("x", 1.2)
        assert vw_form_check(v, w)
        m = v @ w
        for _ in range(50):
            angles = rng.uniform(0, 2 * PI, 3)
            kernel = np.eye(2, dtype=complex)
            for a in angles:
                kernel = rotation("x", a) @ m @ kernel
            comps = pauli_components(kernel)
            assert abs(comps["Y"]) < 1e-9 and abs(comps["Z"]) < 1e-9
            # preserved Bloch X coordinate on random states
            psi = rng.normal(size=2) + 1j * rng.normal(size=2)
            psi /= np.linalg.norm(psi)
            x_before = float(np.vdot(psi, X @ psi).real)
            out = kernel @ psi
            out /= np.linalg.norm(out)
            x_after = float(np.vdot(out, X @ out).real)
            assert abs(x_before - x_after) < 1e-9


class TestSweep:
    def test_small_sweep_fully_agrees(self):
        report = unitarity_relation_sweep(400, seed=1, tol=1e-9)
        assert report["agreement_rate"] == 1.0
        assert report["relation_disagreements"] == 0
        assert report["nonunitary_on_constraint"] == 0
        assert report["violations_missed"] == 0
        assert report["correctability_disagreements"] == 0
