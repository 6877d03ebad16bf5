"""Dense linear algebra, seeded random streams, and the finite-difference
gradient oracle.

All model arithmetic in this package is 64-bit: finite-difference gradient
checks at 1e-4 relative tolerance are not reliable in 32-bit. Matrices are
plain row-major ``numpy.ndarray`` objects of dtype float64; this module adds
the shape checking and the overflow-safe scalar nonlinearities the rest of
the package relies on.
"""

from __future__ import annotations

import zlib

import numpy as np

from .errors import NumericError, ShapeError

# A "Matrix" throughout the package is a 2-D float64 ndarray, row-major.
Matrix = np.ndarray
Vector = np.ndarray


def as_matrix(data, rows: int, cols: int) -> Matrix:
    """Coerce ``data`` to a float64 (rows, cols) matrix, validating shape."""
    m = np.asarray(data, dtype=np.float64)
    if m.shape != (rows, cols):
        raise ShapeError(f"expected shape ({rows}, {cols}), got {m.shape}")
    return m


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product with an explicit conformability check.

    Raises ShapeError naming both shapes when ``a.cols != b.rows``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def softplus(x):
    """log(1 + exp(x)), overflow-safe, elementwise on arrays.

    Implemented as logaddexp(0, x), which is the numerically stable branch
    form: for large x it returns x + log1p(exp(-x)) to machine precision.
    """
    out = np.logaddexp(0.0, x)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def sigmoid(x):
    """Logistic function, overflow-safe on both tails."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def _encode_key_part(part) -> int:
    """Map a stream-key part (int or str) to a non-negative integer.

    Strings hash through crc32 so the mapping is stable across platforms
    and interpreter runs.
    """
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    raise TypeError(f"stream key parts must be int or str, got {type(part)!r}")


class SeededRng:
    """Reproducible random stream keyed by (seed, stream identifier).

    A stream identifier is a tuple of ints/strings (purpose tag, layer index,
    sample index, draw index, ...). ``derive`` appends parts to the key and
    returns a fresh stream positioned at its head, so two derivations of the
    same key always replay the identical value sequence, while distinct keys
    give statistically independent streams. Deriving does not consume state
    from the parent.
    """

    __slots__ = ("seed", "key", "_gen")

    def __init__(self, seed: int, _key: tuple = ()):
        self.seed = int(seed)
        self.key = tuple(_key)
        spawn = tuple(_encode_key_part(p) for p in self.key)
        ss = np.random.SeedSequence(self.seed & 0xFFFFFFFFFFFFFFFF, spawn_key=spawn)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def derive(self, *parts) -> "SeededRng":
        """Child stream for the extended key; independent of this stream."""
        return SeededRng(self.seed, self.key + tuple(parts))

    def normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape, dtype=np.float64)

    def uniform(self, shape=None):
        return self._gen.random(shape, dtype=np.float64)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, key={self.key})"


def sample_standard_normal(rng: SeededRng, n: int) -> Vector:
    """n i.i.d. standard-normal draws, deterministic given (seed, stream)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return rng.normal(n)


def finite_difference_gradient(f, params: Vector, h: float = 1e-5) -> Vector:
    """Central-difference gradient of a scalar function of a flat vector.

    This is the independent oracle every analytic gradient in the package is
    checked against; it must stay free of any autodiff machinery.
    """
    if h <= 0:
        raise ValueError(f"step h must be positive, got {h}")
    params = np.asarray(params, dtype=np.float64)
    grad = np.empty_like(params)
    p = params.copy()
    for j in range(params.size):
        orig = p[j]
        p[j] = orig + h
        f_plus = float(f(p))
        p[j] = orig - h
        f_minus = float(f(p))
        p[j] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(
                f"non-finite evaluation at coordinate {j}", coordinate=j
            )
        grad[j] = (f_plus - f_minus) / (2.0 * h)
    return grad
