"""2D Fourier transform, real projection, low-pass mask, and inverse.

A fused latent (rows = sequence positions, columns = features) is
transformed along the feature axis first, then the sequence axis; the real
part is kept, multiplied by a binary low-pass mask, and transformed back
(sequence axis first, then feature axis). Because the real projection
discards the imaginary part, the round trip is lossy by design; the
leftover imaginary magnitude after the inverse is reported, not restored.

Power-of-two lengths take the radix-2 fast path; other lengths use the
direct quadratic transform so frequency semantics never depend on padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LPF_MODES = ("both_axes", "seq_only")


@dataclass
class Spectrum:
    values: np.ndarray          # complex, (T, D)
    axes: tuple[int, int]


@dataclass
class LpfMask:
    alpha: int
    mode: str
    matrix: np.ndarray          # binary, (T, D)


def dft_1d(x, inverse: bool = False) -> np.ndarray:
    """Direct O(T^2) transform: X_k = sum_t x_t exp(-2*pi*i*t*k/T); the
    inverse uses the conjugate kernel and 1/T so it exactly undoes forward."""
    x = np.asarray(x, dtype=np.complex128)
    if x.size == 0:
        raise ValueError("empty input")
    t = x.shape[0]
    k = np.arange(t)
    sign = 2.0 if inverse else -2.0
    kernel = np.exp(sign * 1j * np.pi * np.outer(k, k) / t)
    out = kernel @ x
    if inverse:
        out /= t
    return out


def _bitrev_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _fft_stack(x: np.ndarray, inverse: bool) -> np.ndarray:
    """Iterative radix-2 transform of every column of a (T, K) stack.
    T must be a power of two."""
    t = x.shape[0]
    out = x[_bitrev_indices(t)].astype(np.complex128)
    sign = 2.0 if inverse else -2.0
    size = 2
    while size <= t:
        half = size // 2
        w = np.exp(sign * 1j * np.pi * np.arange(half) / size)[None, :, None]
        blocks = out.reshape(t // size, size, -1)
        even = blocks[:, :half, :]
        odd = blocks[:, half:, :] * w
        top = even + odd
        bottom = even - odd
        blocks[:, :half, :] = top
        blocks[:, half:, :] = bottom
        size *= 2
    if inverse:
        out /= t
    return out


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def fft_1d(x, inverse: bool = False) -> np.ndarray:
    """Radix-2 Cooley-Tukey for power-of-two lengths, identical semantics to
    dft_1d; other lengths dispatch to the direct transform."""
    x = np.asarray(x, dtype=np.complex128)
    if x.size == 0:
        raise ValueError("empty input")
    if not _is_pow2(x.shape[0]):
        return dft_1d(x, inverse=inverse)
    return _fft_stack(x[:, None], inverse)[:, 0]


def _transform_axis(mat: np.ndarray, axis: int, inverse: bool) -> np.ndarray:
    mat = np.asarray(mat, dtype=np.complex128)
    moved = np.moveaxis(mat, axis, 0)
    n = moved.shape[0]
    if _is_pow2(n):
        res = _fft_stack(moved.reshape(n, -1), inverse).reshape(moved.shape)
    else:
        k = np.arange(n)
        sign = 2.0 if inverse else -2.0
        kernel = np.exp(sign * 1j * np.pi * np.outer(k, k) / n)
        res = (kernel @ moved.reshape(n, -1)).reshape(moved.shape)
        if inverse:
            res /= n
    return np.moveaxis(res, 0, axis)


def fft_2d(h: np.ndarray) -> Spectrum:
    """Feature-axis transform first, then sequence axis."""
    h = np.asarray(h)
    if h.ndim != 2:
        raise ValueError(f"expected a rank-2 latent, got shape {h.shape}")
    values = _transform_axis(_transform_axis(h, axis=1, inverse=False),
                             axis=0, inverse=False)
    return Spectrum(values=values, axes=(h.shape[0], h.shape[1]))


def real_project(s: Spectrum) -> np.ndarray:
    return s.values.real.copy()


def make_lpf_mask(t: int, d: int, alpha: int, mode: str = "both_axes") -> LpfMask:
    """Binary mask keeping low-frequency bins up to index alpha (0-based,
    inclusive); both_axes keeps the (alpha+1) x (alpha+1) corner, seq_only
    cuts the sequence axis alone."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if mode not in LPF_MODES:
        raise ValueError(f"unknown LPF mode {mode!r}")
    rows = (np.arange(t) <= alpha)[:, None]
    if mode == "both_axes":
        cols = (np.arange(d) <= alpha)[None, :]
        matrix = (rows & cols).astype(np.float64)
    else:
        matrix = np.broadcast_to(rows, (t, d)).astype(np.float64)
    return LpfMask(alpha=alpha, mode=mode, matrix=matrix)


def apply_lpf(h_freq: np.ndarray, mask: LpfMask) -> np.ndarray:
    if h_freq.shape != mask.matrix.shape:
        raise ValueError(
            f"apply_lpf: shape mismatch {h_freq.shape} vs {mask.matrix.shape}")
    return h_freq * mask.matrix


def ifft_2d(h_freq: np.ndarray) -> np.ndarray:
    """Inverse along the sequence axis, then the feature axis; the input is
    treated as complex with zero imaginary part and the real part of the
    result is returned."""
    out, _ = ifft_2d_with_residue(h_freq)
    return out


def ifft_2d_with_residue(h_freq: np.ndarray) -> tuple[np.ndarray, float]:
    comp = _transform_axis(_transform_axis(np.asarray(h_freq), axis=0, inverse=True),
                           axis=1, inverse=True)
    return comp.real.copy(), float(np.abs(comp.imag).max(initial=0.0))


def lowpass_pipeline(h: np.ndarray, mask: LpfMask) -> tuple[np.ndarray, float]:
    """Full filter: fft_2d -> real projection -> mask -> ifft_2d.

    Returns the filtered latent and the discarded imaginary residue of the
    inverse step. For fixed shape and mask this is a fixed linear map.
    """
    filtered = apply_lpf(real_project(fft_2d(h)), mask)
    return ifft_2d_with_residue(filtered)
