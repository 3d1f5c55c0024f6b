"""Tests for model sampling: determinism, stream isolation, and moments."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from csbmgc import graph, sampling
from csbmgc.errors import DataError, MaskError, ParameterError
from csbmgc.graph import triu_edges
from csbmgc.sampling import (
    ConcentrationReport,
    CsbmParams,
    Sample,
    concentration_report,
    load_sample,
    place_means,
    round_half_up,
    sample_csbm,
    sample_mask,
    save_sample,
)


def make_params(n=50, d=6, p=0.4, q=0.1, distance=1.0, scale=1.0):
    mu, nu = place_means(distance, d)
    return CsbmParams(n=n, d=d, p=p, q=q, mu=mu, nu=nu, feature_variance_scale=scale)


class TestRoundHalfUp:
    def test_values(self):
        assert round_half_up(0.5) == 1
        assert round_half_up(1.5) == 2
        assert round_half_up(2.5) == 3
        assert round_half_up(2.4) == 2
        assert round_half_up(2.6) == 3
        assert round_half_up(0.0) == 0


class TestParams:
    def test_rejects_bad_sizes(self):
        mu, nu = place_means(1.0, 3)
        with pytest.raises(ParameterError):
            CsbmParams(n=0, d=3, p=0.5, q=0.1, mu=mu, nu=nu)
        with pytest.raises(ParameterError):
            CsbmParams(n=5, d=0, p=0.5, q=0.1, mu=mu, nu=nu)

    def test_rejects_bad_probabilities(self):
        mu, nu = place_means(1.0, 3)
        for p, q in ((1.5, 0.1), (-0.1, 0.1), (0.5, 2.0), (np.nan, 0.1)):
            with pytest.raises(ParameterError):
                CsbmParams(n=5, d=3, p=p, q=q, mu=mu, nu=nu)

    def test_rejects_bad_means(self):
        with pytest.raises(ParameterError):
            CsbmParams(n=5, d=3, p=0.5, q=0.1, mu=np.zeros(4), nu=np.zeros(3))
        with pytest.raises(ParameterError):
            CsbmParams(
                n=5, d=3, p=0.5, q=0.1, mu=np.array([np.inf, 0, 0]), nu=np.zeros(3)
            )

    def test_rejects_bad_scale(self):
        mu, nu = place_means(1.0, 3)
        with pytest.raises(ParameterError):
            CsbmParams(n=5, d=3, p=0.5, q=0.1, mu=mu, nu=nu, feature_variance_scale=0.0)

    def test_warns_on_large_mean_norm(self):
        nu = np.zeros(3)
        mu = np.array([1.5, 0.0, 0.0])
        with pytest.warns(UserWarning, match=r"\|\|mu\|\|"):
            CsbmParams(n=5, d=3, p=0.5, q=0.1, mu=mu, nu=nu)

    def test_dict_round_trip(self):
        params = make_params(n=7, d=4, p=0.3, q=0.2, distance=0.5, scale=2.0)
        again = CsbmParams.from_dict(params.to_dict())
        assert again.to_dict() == params.to_dict()

    def test_from_dict_missing_key(self):
        data = make_params().to_dict()
        del data["q"]
        with pytest.raises(ParameterError, match="q"):
            CsbmParams.from_dict(data)


class TestPlaceMeans:
    def test_opposed_on_first_axis(self):
        mu, nu = place_means(0.8, 5)
        np.testing.assert_array_equal(mu, [-0.4, 0, 0, 0, 0])
        np.testing.assert_array_equal(nu, [+0.4, 0, 0, 0, 0])
        assert np.linalg.norm(nu - mu) == pytest.approx(0.8)

    def test_zero_distance(self):
        mu, nu = place_means(0.0, 3)
        np.testing.assert_array_equal(mu, nu)

    def test_rejects_negative(self):
        with pytest.raises(ParameterError):
            place_means(-0.1, 3)


class TestSampleCsbm:
    def test_deterministic(self):
        params = make_params()
        a = sample_csbm(params, seed=3)
        b = sample_csbm(params, seed=3)
        np.testing.assert_array_equal(a.labels, b.labels)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.adjacency, b.adjacency)
        assert a.seed == 3 and a.mask is None and a.mask_seed is None

    def test_seed_changes_draw(self):
        params = make_params()
        a = sample_csbm(params, seed=3)
        b = sample_csbm(params, seed=4)
        assert not np.array_equal(a.features, b.features)

    def test_basic_structure(self):
        params = make_params(n=40, d=5)
        s = sample_csbm(params, seed=0)
        assert s.n == 40 and s.d == 5
        assert s.labels.dtype == np.int8
        assert set(np.unique(s.labels)) <= {0, 1}
        adj = np.asarray(s.adjacency)
        np.testing.assert_array_equal(adj, adj.T)
        assert np.all(np.diag(adj) == 0)

    def test_edge_stream_isolated_from_features(self):
        # Changing q redraws edges only: labels and features are untouched
        # because each stage runs on its own child stream.
        base = make_params(n=60, p=0.5, q=0.1)
        other = make_params(n=60, p=0.5, q=0.4)
        a = sample_csbm(base, seed=11)
        b = sample_csbm(other, seed=11)
        np.testing.assert_array_equal(a.labels, b.labels)
        np.testing.assert_array_equal(a.features, b.features)
        assert not np.array_equal(np.asarray(a.adjacency), np.asarray(b.adjacency))

    def test_mean_stream_isolated_from_noise(self):
        # Features are mean + scale * noise with noise independent of the
        # means, so shifting the means shifts features by exactly that delta.
        near = make_params(n=30, d=4, distance=0.2)
        far = make_params(n=30, d=4, distance=1.0)
        a = sample_csbm(near, seed=5)
        b = sample_csbm(far, seed=5)
        delta = b.features - a.features
        expected = np.where(
            (a.labels == 0)[:, None], far.mu - near.mu, far.nu - near.nu
        )
        np.testing.assert_allclose(delta, expected, rtol=0, atol=1e-15)

    def test_edge_density_moments(self):
        params = make_params(n=1200, d=2, p=0.30, q=0.10)
        s = sample_csbm(params, seed=7)
        edges = triu_edges(s.adjacency)
        same = s.labels[edges[:, 0]] == s.labels[edges[:, 1]]
        counts = np.bincount(s.labels.astype(np.int64), minlength=2)
        intra_pairs = counts[0] * (counts[0] - 1) // 2 + counts[1] * (counts[1] - 1) // 2
        inter_pairs = counts[0] * counts[1]
        p_hat = np.sum(same) / intra_pairs
        q_hat = np.sum(~same) / inter_pairs
        assert p_hat == pytest.approx(0.30, abs=0.01)
        assert q_hat == pytest.approx(0.10, abs=0.01)

    def test_feature_moments(self):
        params = make_params(n=2000, d=40, p=0.1, q=0.1, distance=1.0, scale=2.0)
        s = sample_csbm(params, seed=1)
        for cls, mean in ((0, params.mu), (1, params.nu)):
            rows = s.features[s.labels == cls]
            np.testing.assert_allclose(rows.mean(axis=0), mean, rtol=0, atol=0.035)
            centered = rows - mean
            var = float(np.mean(centered**2))
            assert var == pytest.approx(2.0 / 40, rel=0.05)

    def test_sparse_backend_same_bits(self, monkeypatch):
        params = make_params(n=80)
        dense = sample_csbm(params, seed=9)
        monkeypatch.setattr(sampling, "DENSE_NODE_LIMIT", 0)
        monkeypatch.setattr(graph, "DENSE_NODE_LIMIT", 0)
        sparse = sample_csbm(params, seed=9)
        assert sp.issparse(sparse.adjacency)
        np.testing.assert_array_equal(dense.labels, sparse.labels)
        np.testing.assert_array_equal(dense.features, sparse.features)
        np.testing.assert_array_equal(
            np.asarray(dense.adjacency), sparse.adjacency.toarray()
        )


class TestSampleMask:
    def test_sizes_and_membership(self):
        params = make_params(n=100)
        s = sample_mask(sample_csbm(params, seed=2), 0.2, 0.3, seed=42)
        counts = np.bincount(s.labels[s.mask].astype(np.int64), minlength=2)
        assert counts[0] == round_half_up(0.2 * 100)
        assert counts[1] == round_half_up(0.3 * 100)
        assert np.all(np.diff(s.mask) > 0)
        assert s.mask_seed == 42

    def test_deterministic_and_seed_sensitive(self):
        s = sample_csbm(make_params(n=100), seed=2)
        m1 = sample_mask(s, 0.25, 0.25, seed=7).mask
        m2 = sample_mask(s, 0.25, 0.25, seed=7).mask
        m3 = sample_mask(s, 0.25, 0.25, seed=8).mask
        np.testing.assert_array_equal(m1, m2)
        assert not np.array_equal(m1, m3)

    def test_oversized_request_raises_without_clamp(self):
        # With n odd, round(n/2) exceeds the smaller class size always.
        s = sample_csbm(make_params(n=11), seed=0)
        with pytest.raises(MaskError, match="only"):
            sample_mask(s, 0.5, 0.5, seed=1)

    def test_clamp_caps_at_class_size(self):
        s = sample_csbm(make_params(n=11), seed=0)
        masked = sample_mask(s, 0.5, 0.5, seed=1, clamp_to_class_size=True)
        counts = np.bincount(s.labels.astype(np.int64), minlength=2)
        want = round_half_up(0.5 * 11)
        picked = np.bincount(masked.labels[masked.mask].astype(np.int64), minlength=2)
        np.testing.assert_array_equal(picked, np.minimum(want, counts))

    def test_rejects_bad_beta(self):
        s = sample_csbm(make_params(), seed=0)
        for beta in (0.0, 0.6, -0.1, np.nan):
            with pytest.raises(ParameterError):
                sample_mask(s, beta, 0.25, seed=1)


class TestConcentrationReport:
    @staticmethod
    def path3_sample():
        adj = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.uint8)
        labels = np.array([0, 0, 1], dtype=np.int8)
        features = np.zeros((3, 2))
        return Sample(labels=labels, adjacency=adj, features=features, mask=None, seed=0)

    def test_hand_check(self):
        report = concentration_report(self.path3_sample())
        assert isinstance(report, ConcentrationReport)
        np.testing.assert_array_equal(report.class_counts, [2, 1])
        np.testing.assert_allclose(report.class_fractions, [2 / 3, 1 / 3])
        np.testing.assert_array_equal(report.degrees, [2, 3, 2])
        np.testing.assert_allclose(report.neighbor_fraction_class0, [1.0, 2 / 3, 0.5])
        np.testing.assert_allclose(report.neighbor_fraction_class1, [0.0, 1 / 3, 0.5])
        assert report.b_holds is None and report.b_tilde_holds is None

    def test_flags_loose_and_tight(self):
        s = self.path3_sample()
        loose = concentration_report(s, p=1.0, q=1.0, delta=1.0, delta_prime=1.0)
        assert loose.b_holds is True and loose.b_tilde_holds is True
        # Degrees are [2, 3, 2] against center (n/2)(p+q) = 3: a 10% band
        # excludes the endpoints.
        tight = concentration_report(s, p=1.0, q=1.0, delta=1.0, delta_prime=0.1)
        assert tight.b_holds is False and tight.b_tilde_holds is False

    def test_rejects_empty_density(self):
        with pytest.raises(ParameterError):
            concentration_report(self.path3_sample(), p=0.0, q=0.0, delta=0.5, delta_prime=0.5)


class TestSaveLoad:
    def test_round_trip(self, tmp_path):
        params = make_params(n=30, d=4)
        s = sample_mask(sample_csbm(params, seed=5), 0.25, 0.25, seed=9)
        path = tmp_path / "ds"
        save_sample(params, s, str(path))
        params2, s2 = load_sample(str(path))
        assert params2.to_dict() == params.to_dict()
        np.testing.assert_array_equal(s2.labels, s.labels)
        np.testing.assert_array_equal(s2.features, s.features)
        np.testing.assert_array_equal(np.asarray(s2.adjacency), np.asarray(s.adjacency))
        np.testing.assert_array_equal(s2.mask, s.mask)
        assert s2.seed == 5 and s2.mask_seed == 9

    def test_round_trip_without_mask(self, tmp_path):
        params = make_params(n=12, d=3)
        s = sample_csbm(params, seed=1)
        save_sample(params, s, str(tmp_path / "ds"))
        _, s2 = load_sample(str(tmp_path / "ds"))
        assert s2.mask is None

    def test_save_load_save_byte_identical(self, tmp_path):
        params = make_params(n=25, d=3)
        s = sample_mask(sample_csbm(params, seed=8), 0.2, 0.2, seed=3)
        first = tmp_path / "a"
        second = tmp_path / "b"
        save_sample(params, s, str(first))
        params2, s2 = load_sample(str(first))
        save_sample(params2, s2, str(second))
        names = sorted(f.name for f in first.iterdir())
        assert names == sorted(f.name for f in second.iterdir())
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes(), name

    def test_existing_dataset_needs_force(self, tmp_path):
        params = make_params(n=10, d=2)
        s = sample_csbm(params, seed=0)
        path = str(tmp_path / "ds")
        save_sample(params, s, path)
        with pytest.raises(DataError, match="force"):
            save_sample(params, s, path)
        save_sample(params, s, path, force=True)

    def test_load_rejects_tampered_labels(self, tmp_path):
        params = make_params(n=10, d=2)
        save_sample(params, sample_csbm(params, seed=0), str(tmp_path / "ds"))
        labels_file = tmp_path / "ds" / "labels.txt"
        lines = labels_file.read_text().splitlines()
        labels_file.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(DataError, match="labels.txt"):
            load_sample(str(tmp_path / "ds"))
        labels_file.write_text("\n".join(["2"] + lines[1:]) + "\n")
        with pytest.raises(DataError, match="0/1"):
            load_sample(str(tmp_path / "ds"))
