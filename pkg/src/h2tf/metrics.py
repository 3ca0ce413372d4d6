"""Quality metrics for [0, 1]-scaled cubes: band-averaged PSNR and SSIM."""

import numpy as np
from scipy.signal import convolve2d

#: per-band mean squared error is floored at 1e-10, capping PSNR at 100 dB
#: (identical inputs report exactly 100.0 rather than infinity).
MSE_FLOOR = 1e-10

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def _check_pair(x, ref):
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError(f"shapes differ: {x.shape} vs {ref.shape}")
    if x.ndim != 3:
        raise ValueError(f"expected order-3 arrays, got shape {x.shape}")
    return x, ref


def psnr(x, ref):
    """Mean over bands of ``10 log10(1 / MSE_band)`` with peak value 1."""
    x, ref = _check_pair(x, ref)
    mse = np.mean((x - ref) ** 2, axis=(0, 1))
    return float(np.mean(10.0 * np.log10(1.0 / np.maximum(mse, MSE_FLOOR))))


def _gaussian_kernel(size, sigma):
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


def ssim(x, ref):
    """Band-averaged single-scale SSIM with an 11x11 Gaussian window.

    Window sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1; the map is
    averaged over all fully-interior window positions and then over bands.
    Images smaller than the window fall back to the largest odd window
    that fits.
    """
    x, ref = _check_pair(x, ref)
    h, w, b = x.shape
    win = min(_SSIM_WINDOW, h if h % 2 else h - 1, w if w % 2 else w - 1)
    if win < 1:
        raise ValueError(f"image {h}x{w} too small for any window")
    kernel = _gaussian_kernel(win, _SSIM_SIGMA)
    c1 = _SSIM_K1 ** 2
    c2 = _SSIM_K2 ** 2

    def smooth(img):
        return convolve2d(img, kernel, mode="valid")

    vals = np.empty(b)
    for k in range(b):
        a = x[:, :, k]
        r = ref[:, :, k]
        mu_a = smooth(a)
        mu_r = smooth(r)
        var_a = smooth(a * a) - mu_a * mu_a
        var_r = smooth(r * r) - mu_r * mu_r
        cov = smooth(a * r) - mu_a * mu_r
        num = (2.0 * mu_a * mu_r + c1) * (2.0 * cov + c2)
        den = (mu_a * mu_a + mu_r * mu_r + c1) * (var_a + var_r + c2)
        vals[k] = np.mean(num / den)
    return float(np.mean(vals))
