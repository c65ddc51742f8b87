import numpy as np
import pytest

from driftguard import Example, build_dataset


def brute_pvalue(pool, alpha_star):
    """Literal count oracle for the p-value definition."""
    pool = list(pool)
    assert pool
    return sum(1 for a in pool if a >= alpha_star) / len(pool)


def point(ex_id, xy, label, ts):
    features = {i: float(v) for i, v in enumerate(xy) if v != 0.0}
    return Example(ex_id, features, label, ts)


def gaussian_dataset(n_per_class, centers, sigma, seed, dim=2, start_ts=0, label_order=None):
    """Balanced i.i.d. Gaussian blobs, interleaved in time."""
    rng = np.random.default_rng(seed)
    labels = label_order if label_order is not None else sorted(centers)
    examples = []
    ts = start_ts
    for i in range(n_per_class):
        for label in labels:
            x = rng.normal(centers[label], sigma, size=dim)
            examples.append(point(f"{label}-{i:05d}", x, label, ts))
            ts += 1
    return build_dataset(examples, label_space=tuple(sorted(centers)), dimensionality=dim)


@pytest.fixture
def two_blob_train():
    return gaussian_dataset(
        50, {"neg": (0.0, 0.0), "pos": (4.0, 0.0)}, sigma=0.4, seed=11
    )
