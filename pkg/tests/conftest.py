import numpy as np
import pytest

from polsar_gan.ctensor import ComplexTensor
from polsar_gan.data import SplitSpec, extract_patches, generate_scene, split
from polsar_gan.gan import TrainingConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_complex():
    def make(rng, shape, dtype=np.float64):
        return ComplexTensor(rng.standard_normal(shape).astype(dtype),
                             rng.standard_normal(shape).astype(dtype))
    return make


def _numeric_grad(f, arr, eps=1e-6):
    """Central differences of the scalar f() w.r.t. every entry of arr (perturbed in place)."""
    grad = np.zeros_like(arr, dtype=np.float64)
    for i in np.ndindex(arr.shape):
        old = arr[i]
        arr[i] = old + eps
        fp = f()
        arr[i] = old - eps
        fm = f()
        arr[i] = old
        grad[i] = (fp - fm) / (2 * eps)
    return grad


def _rel_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric  = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric)) / scale)


@pytest.fixture
def numeric_grad():
    return _numeric_grad


@pytest.fixture
def rel_error():
    return _rel_error


@pytest.fixture
def tiny_config():
    return TrainingConfig(
        num_classes = 2,
        patch_size  = 8,
        batch_size  = 4,
        epochs      = 2,
        m           = 2,
        latent_dim  = 8,
        g_channels  = (4, 2),
        d_channels  = (4, 8),
        seed        = 3,
    )


@pytest.fixture
def tiny_splits():
    raster  = generate_scene(2, layout="stripes", seed=5, height=16, width=32)
    patches = extract_patches(raster, 8, stride=4)
    return split(patches, SplitSpec(labeled_count=3, unlabeled_fraction=0.5, seed=1))
