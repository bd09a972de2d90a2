import logging

import numpy as np
import pytest

from src.config.schema import NoiseSpec
from src.services.sampling import BatchLoader, ImageDataset, dihedral, eligible_images, sample_batch
from src.utils.errors import ConfigurationError, DatasetError

NOISE = NoiseSpec(kind="awgn", sigma=25 / 255, seed=2)


def _dataset(rng, count=3, size=24, paired=False):
    clean = [rng.uniform(size=(3, size, size)).astype(np.float32) for _ in range(count)]
    noisy = [c + np.float32(0.1) for c in clean] if paired else None
    return ImageDataset(clean=clean, noisy=noisy)


def test_four_quarter_turns_are_identity(rng):
    patch = rng.standard_normal((3, 8, 8))
    out = patch
    for _ in range(4):
        out = dihedral(out, 1)
    np.testing.assert_array_equal(out, patch)


def test_dihedral_elements_are_distinct(rng):
    patch = rng.standard_normal((1, 4, 4))
    images = [dihedral(patch, k).tobytes() for k in range(8)]
    assert len(set(images)) == 8


def test_crops_are_reproducible_without_augmentation(rng):
    data = _dataset(rng)
    a = sample_batch(data, 8, 4, (False, False), np.random.default_rng(5), noise=NOISE)
    b = sample_batch(data, 8, 4, (False, False), np.random.default_rng(5), noise=NOISE)
    assert a.offsets == b.offsets and a.sources == b.sources
    assert a.transforms == [0, 0, 0, 0]
    np.testing.assert_array_equal(a.noisy, b.noisy)


def test_crop_contents_match_source(rng):
    data = _dataset(rng)
    batch = sample_batch(data, 8, 2, (False, False), np.random.default_rng(0), noise=NOISE)
    for i, (src, (top, left)) in enumerate(zip(batch.sources, batch.offsets)):
        np.testing.assert_array_equal(batch.clean[i], data.clean[src][:, top:top + 8, left:left + 8])
    assert batch.clean.shape == (2, 3, 8, 8)
    assert batch.noisy.dtype == np.float32


def test_dihedral_frequencies_are_uniform(rng):
    data = _dataset(rng, count=1, size=8)
    batch = sample_batch(data, 4, 10_000, (True, True), np.random.default_rng(1), noise=NOISE)
    counts = np.bincount(batch.transforms, minlength=8)
    se = np.sqrt(10_000 * (1 / 8) * (7 / 8))
    assert np.all(np.abs(counts - 10_000 / 8) < 4 * se)


def test_noise_is_applied_after_augmentation(rng):
    data = _dataset(rng, count=1, size=8)
    batch = sample_batch(data, 8, 1, (True, True), np.random.default_rng(3), noise=NOISE, noise_stream=7)
    from src.services.noise_service import apply_noise

    np.testing.assert_array_equal(batch.noisy, apply_noise(batch.clean, NOISE, stream=7))


def test_paired_crops_share_window_and_transform(rng):
    data = _dataset(rng, paired=True)
    batch = sample_batch(data, 8, 6, (True, True), np.random.default_rng(4))
    np.testing.assert_allclose(batch.noisy, batch.clean + np.float32(0.1), rtol=1e-6)


def test_unpaired_needs_noise(rng):
    with pytest.raises(ConfigurationError):
        sample_batch(_dataset(rng), 8, 1, (False, False), np.random.default_rng(0))


def test_small_images_are_skipped_with_warning(rng, caplog):
    data = ImageDataset(clean=[rng.uniform(size=(3, 4, 4)), rng.uniform(size=(3, 16, 16))])
    with caplog.at_level(logging.WARNING):
        assert eligible_images(data, 8) == [1]
    assert "skipping" in caplog.text
    with pytest.raises(DatasetError):
        eligible_images(data.subset([0]), 8)


def test_loader_is_independent_of_worker_count(rng):
    data = _dataset(rng)
    serial = list(BatchLoader(data, 8, 2, (True, True), seed=3, noise=NOISE).iterate(0, 6))
    threaded = list(BatchLoader(data, 8, 2, (True, True), seed=3, noise=NOISE, num_workers=3).iterate(0, 6))
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a.clean, b.clean)
        np.testing.assert_array_equal(a.noisy, b.noisy)
    assert len(threaded) == 6


def test_loader_resumes_mid_stream(rng):
    loader = BatchLoader(_dataset(rng), 8, 2, (True, True), seed=3, noise=NOISE)
    full = list(loader.iterate(0, 5))
    resumed = list(loader.iterate(3, 5))
    np.testing.assert_array_equal(full[3].noisy, resumed[0].noisy)


def test_frozen_noise_reuses_the_realisation(rng):
    data = _dataset(rng, count=1, size=8)
    loader = BatchLoader(data, 8, 1, (False, False), seed=0, noise=NOISE, freeze_noise=True)
    a, b = loader.make(0), loader.make(1)
    np.testing.assert_array_equal(a.noisy, b.noisy)
    fresh = BatchLoader(data, 8, 1, (False, False), seed=0, noise=NOISE)
    assert not np.array_equal(fresh.make(0).noisy, fresh.make(1).noisy)


def test_dataset_checks(rng):
    with pytest.raises(ConfigurationError):
        ImageDataset(clean=[np.zeros((3, 8, 8)), np.zeros((1, 8, 8))])
    with pytest.raises(ConfigurationError):
        ImageDataset(clean=[np.zeros((3, 8, 8))], noisy=[])
    assert ImageDataset(clean=[np.zeros((3, 8, 8))]).names == ["image000"]
