import numpy as np

from src.utils.image_io import read_image
from src.utils.toy_images import smooth_image, write_toy_corpus


def test_smooth_image_is_on_the_8bit_grid():
    img = smooth_image(np.random.default_rng(0), 32)
    assert img.shape == (3, 32, 32)
    assert img.min() >= 0.0 and img.max() <= 1.0
    np.testing.assert_allclose(img * 255, np.rint(img * 255), atol=1e-9)


def test_corpus_is_reproducible(tmp_path):
    a, paths_a = write_toy_corpus(tmp_path / "a", count=2, size=16, seed=5, channels=1)
    b, paths_b = write_toy_corpus(tmp_path / "b", count=2, size=16, seed=5, channels=1)
    assert a.color == "gray" and len(a) == 2
    assert [p.name for p in paths_a] == ["toy_0000.pgm", "toy_0001.pgm"]
    for pa, pb in zip(paths_a, paths_b):
        assert pa.read_bytes() == pb.read_bytes()
    assert read_image(paths_a[0]).shape == (1, 1, 16, 16)
    assert (tmp_path / "a" / "toy.tsv").is_file()
