"""Tests for linear-separability certificates.

The LP route is validated two independent ways: hand-solvable instances with
frozen margins, and bulk agreement with the enumeration oracle
(:func:`brute_force_separability`), which shares no code with the LP.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csbmgc.errors import ParameterError, ShapeError
from csbmgc.separability import (
    MARGIN_THRESHOLD,
    SeparabilityCertificate,
    brute_force_separability,
    certify_separability,
)


class TestCertifyKnownInstances:
    def test_two_points_frozen_margin(self):
        # Points 0 and 2 on a line: best box-normalized separator is
        # v = 1, b = -1, margin exactly 1.
        x = np.array([[0.0], [2.0]])
        y = np.array([0, 1])
        cert = certify_separability(x, y)
        assert isinstance(cert, SeparabilityCertificate)
        assert cert.separable
        assert cert.lp_status == "optimal"
        assert cert.margin == pytest.approx(1.0, abs=1e-9)
        scores = (2.0 * y - 1.0) * (x @ cert.witness_v + cert.witness_b)
        assert np.all(scores >= cert.margin - 1e-9)

    def test_conflicting_duplicates_not_separable(self):
        x = np.array([[0.5], [0.5]])
        y = np.array([0, 1])
        cert = certify_separability(x, y)
        assert not cert.separable
        assert cert.margin <= MARGIN_THRESHOLD
        assert cert.lp_status == "optimal"

    def test_interleaved_line_not_separable(self):
        x = np.array([[0.0], [1.0], [2.0]])
        y = np.array([0, 1, 0])
        cert = certify_separability(x, y)
        assert not cert.separable
        assert cert.margin <= MARGIN_THRESHOLD

    def test_single_class_is_separable(self):
        x = np.array([[0.0, 1.0], [1.0, 0.0]])
        y = np.array([1, 1])
        assert certify_separability(x, y).separable
        assert brute_force_separability(x, y)

    def test_xor_not_separable(self):
        x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        y = np.array([0, 0, 1, 1])
        cert = certify_separability(x, y)
        assert not cert.separable
        assert not brute_force_separability(x, y)

    def test_subset_certification(self):
        # Globally conflicted, but rows {0, 2} alone separate.
        x = np.array([[0.0], [0.0], [1.0]])
        y = np.array([0, 1, 1])
        assert not certify_separability(x, y).separable
        sub = certify_separability(x, y, indices=np.array([0, 2]))
        assert sub.separable
        np.testing.assert_array_equal(sub.indices, [0, 2])

    def test_margin_scales_with_geometry(self):
        # Halving the gap between two opposite points halves the margin.
        wide = certify_separability(np.array([[-1.0], [1.0]]), np.array([0, 1]))
        narrow = certify_separability(np.array([[-0.5], [0.5]]), np.array([0, 1]))
        assert wide.margin > narrow.margin > MARGIN_THRESHOLD


class TestBruteForce:
    def test_one_dimensional_overlap_rule(self):
        assert brute_force_separability(np.array([[0.0], [2.0]]), np.array([0, 1]))
        assert not brute_force_separability(
            np.array([[0.0], [1.0], [2.0]]), np.array([0, 1, 0])
        )

    def test_rejects_unsupported_sizes(self):
        with pytest.raises(ParameterError, match="d in"):
            brute_force_separability(np.zeros((3, 3)), np.array([0, 1, 0]))
        with pytest.raises(ParameterError, match="at most 14"):
            brute_force_separability(np.zeros((15, 2)), np.zeros(15, dtype=int))


class TestInputValidation:
    def test_bad_labels(self):
        with pytest.raises(ShapeError):
            certify_separability(np.zeros((2, 1)), np.array([0, 2]))
        with pytest.raises(ShapeError):
            certify_separability(np.zeros((2, 1)), np.array([0]))
        with pytest.raises(ShapeError):
            certify_separability(np.zeros(3), np.array([0, 1, 0]))

    def test_bad_indices(self):
        x = np.zeros((3, 1))
        y = np.array([0, 1, 0])
        with pytest.raises(ParameterError):
            certify_separability(x, y, indices=np.array([], dtype=np.int64))
        with pytest.raises(ParameterError):
            certify_separability(x, y, indices=np.array([3]))


class TestAgreementWithBruteForce:
    @pytest.mark.parametrize("case", range(80))
    def test_lattice_instance(self, case):
        # Half-integer lattice points invite collisions, collinearity, and
        # ties — exactly where the two routes could plausibly diverge.
        rng = np.random.default_rng(2000 + case)
        d = int(rng.integers(1, 3))
        m = int(rng.integers(2, 9))
        x = rng.integers(-2, 3, size=(m, d)) / 2.0
        y = rng.integers(0, 2, size=m)
        lp = certify_separability(x, y).separable
        brute = brute_force_separability(x, y)
        assert lp == brute, f"LP={lp} brute={brute} x={x.tolist()} y={y.tolist()}"


class TestPlantedInstances:
    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10**6))
    def test_planted_margin_is_found(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(2, 11))
        v = rng.standard_normal(2)
        v /= np.linalg.norm(v)
        b = float(rng.uniform(-1.0, 1.0))
        x = rng.uniform(-2.0, 2.0, size=(m, 2))
        scores = x @ v + b
        # Push every point at least 0.1 away from the plane, keeping its side.
        drift = np.where(np.abs(scores) < 0.1, 0.2 * np.sign(scores + 1e-12), 0.0)
        x = x + drift[:, None] * v
        y = (x @ v + b > 0).astype(np.int8)
        cert = certify_separability(x, y)
        assert cert.separable
        witness = (2.0 * y - 1.0) * (x @ cert.witness_v + cert.witness_b)
        assert np.all(witness > 0.0)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10**6))
    def test_conflicting_duplicate_defeats_any_instance(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 9))
        x = rng.uniform(-2.0, 2.0, size=(m, 2))
        y = rng.integers(0, 2, size=m).astype(np.int8)
        x = np.vstack([x, x[:1]])
        y = np.append(y, 1 - y[0])
        assert not certify_separability(x, y).separable
