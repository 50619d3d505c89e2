"""Centered unitary 2D DFT utilities and the k-space degradation model.

Low resolution maps are obtained by keeping only the centered n x n window
of the spectrum of the 64 x 64 ground truth; zero-filling that window back
to the full grid is the classical interpolation baseline.  All transforms
are unitary and DC-centered, so truncation + zero-fill preserves spectral
energy and the image mean exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class KSpaceGrid:
    """A complex spectrum with the DC term at the grid center."""

    values: np.ndarray
    dc_centered: bool = True

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


def _check_square(image: np.ndarray) -> None:
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise ValueError(f"expected a square 2D field, got shape {image.shape}")


def forward_dft(image: np.ndarray) -> KSpaceGrid:
    """Unitary centered 2D DFT of a real or complex square image."""
    _check_square(image)
    k = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(image), norm="ortho"))
    return KSpaceGrid(values=k, dc_centered=True)


def inverse_dft(k: KSpaceGrid) -> np.ndarray:
    """Inverse of :func:`forward_dft`; returns a complex image."""
    if not k.dc_centered:
        raise ValueError("KSpaceGrid must be DC-centered")
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(k.values), norm="ortho"))


def center_window(size: int, n: int) -> slice:
    """Index range of the centered n-wide window on a size-wide grid.

    DC sits at index size//2 after centering; for even n the window is
    [size/2 - n/2, size/2 + n/2), so n == size is the identity window.
    """
    lo = size // 2 - n // 2
    return slice(lo, lo + n)


def kspace_truncate(image: np.ndarray, n: int) -> KSpaceGrid:
    """Keep only the centered n x n k-space window of a square image."""
    _check_square(image)
    N = image.shape[0]
    if n % 2 != 0:
        raise ValueError(f"truncation size must be even, got {n}")
    if not 2 <= n <= N:
        raise ValueError(f"truncation size {n} outside [2, {N}]")
    k = forward_dft(image)
    w = center_window(N, n)
    return KSpaceGrid(values=k.values[w, w].copy(), dc_centered=True)


def embed_window(values: np.ndarray, N: int) -> np.ndarray:
    """Embed an n x n centered window into an N x N spectrum, Hermitian-safely.

    For even n the window's leading edge row/col (frequency -n/2) has no
    conjugate partner inside the window; its partner band at +n/2 is filled
    with the mirrored conjugates so that windows of real images embed to
    exactly Hermitian spectra.  This makes truncate-then-zero-fill exactly
    idempotent and keeps data consistency a true projection.
    """
    n = values.shape[0]
    if n > N:
        raise ValueError(f"window size {n} exceeds target size {N}")
    full = np.zeros((N, N), dtype=complex)
    w = center_window(N, n)
    full[w, w] = values
    if n < N:
        lo, hi = w.start, w.stop
        cols = np.arange(lo, hi)
        full[hi, (N - cols) % N] = np.conj(full[lo, cols])
        full[(N - cols) % N, hi] = np.conj(full[cols, lo])
    return full


def window_mask(N: int, n: int) -> np.ndarray:
    """Boolean mask of the positions :func:`embed_window` fills: the centered
    window plus its Hermitian mirror band."""
    mask = np.zeros((N, N), dtype=bool)
    w = center_window(N, n)
    mask[w, w] = True
    if n < N:
        lo, hi = w.start, w.stop
        cols = np.arange(lo, hi)
        mask[hi, (N - cols) % N] = True
        mask[(N - cols) % N, hi] = True
    return mask


def zero_fill_upsample(k: KSpaceGrid, N: int) -> np.ndarray:
    """Embed an n x n spectrum at the center of an N x N grid and invert.

    Returns the real part; for windows of real images the imaginary part
    is at floating-point noise level.
    """
    full = embed_window(k.values, N)
    return np.real(inverse_dft(KSpaceGrid(values=full)))


def degrade(image: np.ndarray, n: int) -> np.ndarray:
    """Full degradation: truncate to n x n, zero-fill back to input size."""
    return zero_fill_upsample(kspace_truncate(image, n), image.shape[0])


def apply_quality_mask(field: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero out pixels rejected by quality filtering."""
    if field.shape != mask.shape:
        raise ValueError(f"shape mismatch: {field.shape} vs {mask.shape}")
    return np.where(mask.astype(bool), field, 0.0)


def data_consistency(raw: np.ndarray, measured: KSpaceGrid) -> np.ndarray:
    """Hard projection onto the measured k-space window.

    Overwrites the centered window of the raw output's spectrum with the
    measurement and inverts; guarantees the served image agrees with the
    acquisition at the measured frequencies.
    """
    _check_square(raw)
    N = raw.shape[0]
    n = measured.size
    if n > N:
        raise ValueError(f"measured window {n} exceeds image size {N}")
    k = forward_dft(raw).values
    w = center_window(N, n)
    k[w, w] = measured.values
    if n < N:
        lo, hi = w.start, w.stop
        cols = np.arange(lo, hi)
        k[hi, (N - cols) % N] = np.conj(k[lo, cols])
        k[(N - cols) % N, hi] = np.conj(k[cols, lo])
    return np.real(inverse_dft(KSpaceGrid(values=k)))
