import numpy as np
import pytest

from crossgcca.errors import InvalidInputError
from crossgcca.evaluation import linear_svm
from crossgcca.synthgen import (SynthConfig, apply_power_ratio, export_dataset, generate, load_dataset,
                                mean_power, mixture_components, sample_latents)


@pytest.fixture(scope="module")
def default_splits():
    return generate(SynthConfig())


def test_degenerate_probabilities(rng):
    labels, g, _ = sample_latents(SynthConfig(class_probabilities=(1, 0, 0, 0)), rng, 200)
    assert np.all(labels == 0)
    assert np.all(g == [1, 0, 0, 0])


def test_class_frequencies(rng):
    labels, g, cs = sample_latents(SynthConfig(), rng, 10_000)
    freq = np.bincount(labels, minlength=4) / 10_000
    np.testing.assert_allclose(freq, [0.1, 0.2, 0.3, 0.4], atol=0.02)
    np.testing.assert_array_equal(np.argmax(g, axis=1), labels)
    assert [c.shape for c in cs] == [(10_000, 4), (10_000, 4)]


def test_conditional_independence_monte_carlo(rng):
    n = 50_000
    labels, _, (c1, c2) = sample_latents(SynthConfig(), rng, n)
    for z in range(4):
        rows = labels == z
        a = c1[rows] - c1[rows].mean(axis=0)
        b = c2[rows] - c2[rows].mean(axis=0)
        cross = a.T @ b / rows.sum()
        # scale by the per-coordinate standard deviations so the bound is in correlation units
        corr = cross / np.outer(a.std(axis=0), b.std(axis=0))
        assert np.max(np.abs(corr)) < 5 / np.sqrt(rows.sum())


def test_unconditional_dependence_with_class_means(rng):
    cfg = SynthConfig(private_means_scale=3.0)
    labels, _, (c1, c2) = sample_latents(cfg, rng, 50_000)
    cross = (c1 - c1.mean(0)).T @ (c2 - c2.mean(0)) / c1.shape[0]
    corr = cross / np.outer(c1.std(0), c2.std(0))
    assert np.max(np.abs(corr)) > 10 / np.sqrt(c1.shape[0])


def test_component_covariances_are_spd(rng):
    comps = mixture_components(SynthConfig(), rng)
    assert len(comps) == 2 and all(len(v) == 4 for v in comps)
    for per_view in comps:
        for mean, cov in per_view:
            np.testing.assert_array_equal(mean, 0.0)
            np.testing.assert_allclose(cov, cov.T)
            assert np.linalg.eigvalsh(cov).min() >= 0.1 - 1e-12


def test_power_ratio_zero_db_no_change(rng):
    g = rng.standard_normal((100, 3))
    c = g[:, ::-1].copy()
    g2, (c2,) = apply_power_ratio(g, [c], 0.0)
    np.testing.assert_allclose(c2, c, rtol=1e-12)
    assert g2 is g


def test_power_ratio_calibration(default_splits):
    d = default_splits
    g = np.vstack([s.latent_g for s in (d.train, d.val, d.test)])
    for k in range(2):
        c = np.vstack([s.latent_c[k] for s in (d.train, d.val, d.test)])
        ratio_db = 10 * np.log10(mean_power(g) / mean_power(c))
        assert abs(ratio_db + 18.0) < 0.1


def test_power_ratio_infinite_disables_private(rng):
    cfg = SynthConfig(power_ratio_db=np.inf, split_sizes=(200, 50, 50))
    d = generate(cfg)
    assert all(np.all(c == 0) for c in d.train.latent_c)
    # g-only determinism: equal labels give identical rows
    for z in np.unique(d.train.labels):
        rows = d.train.views[0][d.train.labels == z]
        np.testing.assert_array_equal(rows, np.broadcast_to(rows[0], rows.shape))


def test_power_ratio_zero_power_error(rng):
    with pytest.raises(InvalidInputError):
        apply_power_ratio(np.zeros((3, 2)), [np.ones((3, 2))], -18.0)
    with pytest.raises(InvalidInputError):
        apply_power_ratio(np.ones((3, 2)), [np.zeros((3, 2))], -18.0)


def test_default_shapes_and_label_frequencies(default_splits):
    d = default_splits
    assert [v.shape for v in d.train.views] == [(3000, 64), (3000, 64)]
    assert [v.shape for v in d.test.views] == [(1500, 64), (1500, 64)]
    assert len(d.val) == 1500
    for ds in (d.train, d.val, d.test):
        freq = np.bincount(ds.labels, minlength=4) / len(ds)
        assert np.all(np.abs(freq - [0.1, 0.2, 0.3, 0.4]) <= 3 / np.sqrt(len(ds)))
        assert ds.latent_g.shape == (len(ds), 4)


def test_generator_shared_across_splits(default_splits):
    d = default_splits
    for gen, k in zip(d.generators, range(2)):
        ds = d.test
        np.testing.assert_array_equal(gen(np.hstack([ds.latent_g, ds.latent_c[k]])), ds.views[k])
    assert d.generators[0].spec.widths == (8, 32, 32, 32, 64)


def test_same_seed_same_data():
    cfg = SynthConfig(split_sizes=(50, 20, 20), seed=11)
    a, b = generate(cfg), generate(cfg)
    for x, y in zip(a.train.views + a.test.views, b.train.views + b.test.views):
        np.testing.assert_array_equal(x, y)
    c = generate(SynthConfig(split_sizes=(50, 20, 20), seed=12))
    assert not np.array_equal(a.train.views[0], c.train.views[0])


def test_raw_view_predicts_labels_above_chance(default_splits):
    d = default_splits
    acc = linear_svm(d.train.views[0], d.train.labels, d.test.views[0], d.test.labels)
    assert acc > 0.4 + 0.05  # majority class frequency is 0.4


def test_config_validation():
    with pytest.raises(InvalidInputError):
        SynthConfig(class_probabilities=(0.5, 0.6))
    with pytest.raises(InvalidInputError):
        SynthConfig(private_dims=(4,), view_dims=(64, 64))


def test_export_roundtrip(tmp_path):
    d = generate(SynthConfig(split_sizes=(30, 10, 10), seed=5))
    export_dataset(d, tmp_path)
    back = load_dataset(tmp_path)
    for name, ds in d.splits().items():
        views, labels = back[name]
        np.testing.assert_array_equal(labels, ds.labels)
        for a, b in zip(views, ds.views):
            np.testing.assert_array_equal(a, b)
