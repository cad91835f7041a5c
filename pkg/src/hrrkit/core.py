"""Core algebra for holographic reduced representations.

Symbols live in R^d as float64 vectors. Binding is circular convolution,
computed through the FFT; unbinding convolves with an inverse. Two inverses
are provided: the exact spectral reciprocal and the cheap index-permutation
approximation, which coincide for unitary vectors (unit-magnitude spectrum).
The spectral projection produces such unitary vectors and is the stability
fix everything else in this package leans on.

All functions are pure and accept arrays with extra leading axes, operating
on the last axis, so callers can batch rows through a single FFT.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SpectralInverseError",
    "bind",
    "bind_adjoint",
    "cosine_similarity",
    "delta",
    "exact_inverse",
    "project",
    "pseudo_inverse",
    "sample_standard",
    "sample_unitary",
    "unbind",
]

PROJECT_EPS = 1e-5  # guard added to spectral magnitudes in project()
INVERSE_FLOOR = 1e-5  # minimum spectral magnitude accepted by exact_inverse()
COSINE_EPS = 1e-8  # guard added to the norm product in cosine_similarity()

_IMAG_TOL = 1e-8


class SpectralInverseError(ValueError):
    """Raised when a spectrum has a bin too close to zero to invert."""


def _check_vector(x, name="vector"):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 2:
        raise ValueError(f"{name} must have length >= 2, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def _check_same_dim(a, b):
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(
            f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}"
        )


def _discard_imag(z):
    # The inverse transform of a conjugate-symmetric spectrum is real; any
    # imaginary residue beyond rounding noise indicates a transform bug.
    bound = _IMAG_TOL * (1.0 + np.abs(z.real))
    if not np.all(np.abs(z.imag) < bound):
        worst = int(np.argmax(np.abs(z.imag) - bound))
        raise FloatingPointError(
            f"imaginary residue {np.abs(z.imag).max():.3e} after inverse "
            f"transform (flat index {worst}); expected a real result"
        )
    return np.ascontiguousarray(z.real)


def delta(d):
    """Convolution identity: 1 in slot 0, zeros elsewhere."""
    out = np.zeros(int(d), dtype=np.float64)
    out[0] = 1.0
    return out


def bind(a, b):
    """Circular convolution of a and b via the FFT.

    Equivalent to c_k = sum_i a_i * b_{(k-i) mod d}. Commutative,
    associative, and distributive over addition.
    """
    a = _check_vector(a, "a")
    b = _check_vector(b, "b")
    _check_same_dim(a, b)
    return _discard_imag(np.fft.ifft(np.fft.fft(a) * np.fft.fft(b)))


def exact_inverse(a, floor=INVERSE_FLOOR):
    """Exact convolution inverse: reciprocal of each spectral coefficient.

    Numerically unstable whenever the spectrum has small bins, so any bin
    with magnitude <= `floor` raises SpectralInverseError naming the bin.
    For unitary vectors this equals pseudo_inverse().
    """
    a = _check_vector(a, "a")
    spec = np.fft.fft(a)
    mags = np.abs(spec)
    lo = mags.min()
    if lo <= floor:
        j = int(np.argmin(mags)) % a.shape[-1]
        raise SpectralInverseError(
            f"spectral bin {j} has magnitude {lo:.3e} <= {floor:g}; "
            f"exact inverse is unstable"
        )
    return _discard_imag(np.fft.ifft(1.0 / spec))


def pseudo_inverse(a):
    """Involutive index permutation [a_1, a_d, a_{d-1}, ..., a_2].

    Conjugates the spectrum's phase while keeping its magnitude, so it
    approximates exact_inverse() and matches it exactly on unitary vectors.
    O(d), no transform.
    """
    a = _check_vector(a, "a")
    return np.roll(a[..., ::-1], 1, axis=-1)


def unbind(s, y):
    """Recover the partner bound with y inside s: bind(s, pseudo_inverse(y))."""
    return bind(s, pseudo_inverse(y))


def bind_adjoint(g, b):
    """Adjoint of the linear map a -> bind(a, b); circular correlation with b.

    Satisfies <bind(a, b), g> == <a, bind_adjoint(g, b)> and is the
    building block for backpropagating through binding.
    """
    return bind(g, pseudo_inverse(b))


def project(x, eps=PROJECT_EPS):
    """Normalize every spectral coefficient to (near) unit magnitude.

    Returns the inverse transform of F(x)_j / (|F(x)_j| + eps). The guard
    eps keeps zero bins from dividing by zero at the cost of leaving output
    magnitudes eps-shy of one; pass eps=0.0 for an exactly unit spectrum
    when the input is known to have no vanishing bins.
    """
    x = _check_vector(x, "x")
    spec = np.fft.fft(x)
    return _discard_imag(np.fft.ifft(spec / (np.abs(spec) + eps)))


def sample_standard(d, seed):
    """Gaussian symbol vector with i.i.d. N(0, 1/d) entries."""
    d = int(d)
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.standard_normal(d) / np.sqrt(d)


def sample_unitary(d, seed):
    """Projected Gaussian symbol vector with an exactly unit spectrum.

    Uses eps=0 in the projection: a continuous Gaussian draw has no zero
    spectral bins, and the exact normalization is what makes the pseudo
    inverse agree with the exact inverse to rounding error.
    """
    return project(sample_standard(d, seed), eps=0.0)


def cosine_similarity(a, b):
    """Cosine of the angle between a and b, guarded against zero norms.

    Returns dot(a, b) / (|a| * |b| + 1e-8); a zero vector therefore maps
    to similarity 0 rather than NaN.
    """
    a = _check_vector(a, "a")
    b = _check_vector(b, "b")
    _check_same_dim(a, b)
    num = np.sum(a * b, axis=-1)
    den = np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1) + COSINE_EPS
    return num / den
