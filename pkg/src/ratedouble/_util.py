from __future__ import annotations

import numpy as np


def as_points(x, d: int):
    """Reshape evaluation input to (m, d) and return the matching output shape.

    For d = 1 a scalar or a flat vector of abscissae is accepted; for d > 1 the
    trailing axis holds coordinates.
    """
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        return x.reshape(-1, 1), x.shape
    if x.shape[-1] != d:
        raise ValueError(f"points have trailing dimension {x.shape[-1]}, expected {d}")
    return x.reshape(-1, d), x.shape[:-1]


def reshape_values(values: np.ndarray, shape):
    return float(values[0]) if shape == () else values.reshape(shape)


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator keyed by the seed and a stream tag."""
    ss = np.random.SeedSequence([int(seed), *[int(s) for s in stream]])
    return np.random.Generator(np.random.Philox(ss))
