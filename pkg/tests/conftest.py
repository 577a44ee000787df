import numpy as np
import pytest

from shadowsynth.imagery import save_image


def random_rgb(rng: np.random.Generator, h: int = 16, w: int = 16, lo=0.0, hi=1.0) -> np.ndarray:
    return rng.uniform(lo, hi, size=(h, w, 3))


def umbra_matte(h: int = 32, w: int = 32) -> np.ndarray:
    """Matte with a solid umbra block, a 0.5 penumbra ring, and lit remainder."""
    matte = np.zeros((h, w))
    matte[h // 8 : 5 * h // 8, w // 8 : 5 * w // 8] = 0.5
    matte[h // 4 : h // 2, w // 4 : w // 2] = 1.0
    return matte


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def triplet_inputs(tmp_path):
    """Small background/matte image directories for batch tests."""
    rng = np.random.default_rng(99)
    bg_dir = tmp_path / "bg"
    matte_dir = tmp_path / "mt"
    bg_dir.mkdir()
    matte_dir.mkdir()
    for i in range(3):
        save_image(rng.uniform(0.05, 0.95, size=(48, 48, 3)), bg_dir / f"bg{i}.png")
    save_image(umbra_matte(48, 48), matte_dir / "matte0.png")
    save_image(np.clip(umbra_matte(48, 48) * 0.8, 0, 1), matte_dir / "matte1.png")
    return bg_dir, matte_dir
