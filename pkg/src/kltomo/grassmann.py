"""Subspaces as orthonormal frames and their canonical angles to R^ell.

The coordinate splitting is R^n = R^{n-ell} (+) R^ell with R^ell spanned by
the *last* ``ell`` coordinate vectors.  A subspace xi of dimension i is
represented by an n x i matrix with orthonormal columns; its position
relative to R^ell is captured by the squared cosines of the
m = min(i, ell) canonical angles, sorted in non-increasing order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dims",
    "KlRotation",
    "as_rng",
    "check_frame",
    "haar_sample_frame",
    "canonical_lambdas",
    "equal_angle_frame",
    "orthocomplement_frame",
    "apply_kl_rotation",
    "haar_orthogonal",
]

ORTHO_TOL = 1e-8
CLAMP_TOL = 1e-10


@dataclass(frozen=True)
class Dims:
    """Ambient dimension ``n``, section dimension ``i`` and split ``ell``."""

    n: int
    i: int
    ell: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"ambient dimension must be >= 2, got n={self.n}")
        if not 1 <= self.i <= self.n - 1:
            raise ValueError(f"need 1 <= i <= n-1, got i={self.i}, n={self.n}")
        if not 1 <= self.ell <= self.n - 1:
            raise ValueError(f"need 1 <= ell <= n-1, got ell={self.ell}, n={self.n}")

    @property
    def m(self) -> int:
        return min(self.i, self.ell)

    def as_dict(self) -> dict:
        return {"n": self.n, "i": self.i, "ell": self.ell}


def as_rng(seed=None) -> np.random.Generator:
    """Accept an int, a SeedSequence or a Generator and return a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_orthogonal(k: int, rng) -> np.ndarray:
    """Haar-distributed element of O(k)."""
    rng = as_rng(rng)
    if k == 0:
        return np.zeros((0, 0))
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    return q * np.sign(np.diag(r))


def check_frame(frame: np.ndarray, tol: float = ORTHO_TOL) -> np.ndarray:
    frame = np.asarray(frame, dtype=float)
    if frame.ndim != 2 or frame.shape[1] > frame.shape[0]:
        raise ValueError(f"frame must be an n x i matrix with i <= n, got shape {frame.shape}")
    resid = np.linalg.norm(frame.T @ frame - np.eye(frame.shape[1]))
    if resid > tol:
        raise ValueError(f"frame columns are not orthonormal (residual {resid:.3e})")
    return frame


def haar_sample_frame(n: int, i: int, rng=None) -> np.ndarray:
    """Random i-frame in R^n whose span is Haar-distributed on G_{n,i}.

    A Gaussian n x i matrix is orthonormalised by QR; the columns are then
    sign-normalised so that the triangular factor has a positive diagonal,
    which makes the result a deterministic function of the Gaussian draw.
    """
    rng = as_rng(rng)
    q, r = np.linalg.qr(rng.standard_normal((n, i)))
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    return q * s


def _clamp(lams: np.ndarray) -> np.ndarray:
    if lams.size and (lams.min() < -CLAMP_TOL or lams.max() > 1.0 + CLAMP_TOL):
        raise ArithmeticError(f"canonical spectrum left [0, 1]: {lams}")
    return np.clip(lams, 0.0, 1.0)


def canonical_lambdas(frame: np.ndarray, ell: int) -> np.ndarray:
    """Squared cosines of the canonical angles between span(frame) and R^ell.

    Parameters
    ----------
    frame : (n, i) array with orthonormal columns
    ell : int
        Dimension of the coordinate subspace R^ell (last ``ell`` coordinates).

    Returns
    -------
    (m,) array, m = min(i, ell), sorted non-increasingly, entries in [0, 1].
    """
    frame = check_frame(frame)
    n, i = frame.shape
    if not 1 <= ell <= n - 1:
        raise ValueError(f"need 1 <= ell <= n-1, got ell={ell}, n={n}")
    low = frame[n - ell:, :]  # sigma' tau
    gram = low.T @ low if i <= ell else low @ low.T
    lams = np.linalg.eigvalsh(gram)[::-1]
    return _clamp(lams)


def equal_angle_frame(dims: Dims, lam: float, rng=None) -> np.ndarray:
    """Frame whose canonical angles to R^ell all have squared cosine ``lam``.

    Raises
    ------
    ValueError
        If ``lam`` is outside [0, 1], or the equal-angle configuration does
        not exist in these dimensions (lam < 1 needs i <= n - ell; lam = 1
        needs i <= ell).
    """
    n, i, ell = dims.n, dims.i, dims.ell
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if lam < 1.0 and i > n - ell:
        raise ValueError(
            f"equal angles with lambda < 1 need i <= n - ell (i={i}, n-ell={n - ell})"
        )
    if lam == 1.0 and i > ell:
        raise ValueError(f"lambda = 1 needs the {i}-frame inside R^ell (ell={ell})")
    rng = as_rng(rng)
    m = dims.m
    frame = np.zeros((n, i))
    if lam < 1.0:
        a = haar_sample_frame(n - ell, i, rng)
        frame[: n - ell, :] = a
    b = haar_sample_frame(ell, m, rng)
    if lam == 1.0:
        frame[: n - ell, :m] = 0.0
        frame[n - ell:, :m] = b
        return frame
    frame[: n - ell, :m] *= np.sqrt(1.0 - lam)
    frame[n - ell:, :m] = np.sqrt(lam) * b
    return frame


def orthocomplement_frame(frame: np.ndarray) -> np.ndarray:
    """Orthonormal (n - i)-frame spanning the orthogonal complement of ``frame``."""
    frame = check_frame(frame)
    i = frame.shape[1]
    # Householder completion: the trailing columns of the full Q orthonormalise
    # the standard-basis residuals left after projecting out span(frame)
    q, _ = np.linalg.qr(frame, mode="complete")
    return q[:, i:]


@dataclass(frozen=True)
class KlRotation:
    """Block rotation diag(alpha, beta) with alpha in O(n-ell), beta in O(ell)."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self) -> None:
        for name, blk in (("alpha", self.alpha), ("beta", self.beta)):
            blk = np.asarray(blk, dtype=float)
            if blk.ndim != 2 or blk.shape[0] != blk.shape[1]:
                raise ValueError(f"{name} block must be square, got shape {blk.shape}")
            if np.linalg.norm(blk.T @ blk - np.eye(blk.shape[0])) > 1e-12 * max(1, blk.shape[0]):
                raise ValueError(f"{name} block is not orthogonal")

    @property
    def n(self) -> int:
        return self.alpha.shape[0] + self.beta.shape[0]

    @property
    def ell(self) -> int:
        return self.beta.shape[0]

    def matrix(self) -> np.ndarray:
        k = self.alpha.shape[0]
        g = np.zeros((self.n, self.n))
        g[:k, :k] = self.alpha
        g[k:, k:] = self.beta
        return g

    def compose(self, other: "KlRotation") -> "KlRotation":
        """``self`` after ``other``."""
        return KlRotation(self.alpha @ other.alpha, self.beta @ other.beta)

    @classmethod
    def random(cls, n: int, ell: int, rng=None) -> "KlRotation":
        rng = as_rng(rng)
        return cls(haar_orthogonal(n - ell, rng), haar_orthogonal(ell, rng))

    @classmethod
    def identity(cls, n: int, ell: int) -> "KlRotation":
        return cls(np.eye(n - ell), np.eye(ell))


def apply_kl_rotation(frame: np.ndarray, rot: KlRotation) -> np.ndarray:
    frame = np.asarray(frame, dtype=float)
    if frame.shape[0] != rot.n:
        raise ValueError(f"rotation acts on R^{rot.n}, frame lives in R^{frame.shape[0]}")
    k = rot.alpha.shape[0]
    return np.concatenate([rot.alpha @ frame[:k], rot.beta @ frame[k:]], axis=0)
