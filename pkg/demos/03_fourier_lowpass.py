"""Low-pass filtering a latent matrix in the Fourier domain.

Shows the 2D transform (feature axis, then sequence axis), the real
projection, the binary cutoff mask, and how the retained energy grows with
the cutoff index.
"""

import numpy as np

from repurgen import spectral

rng = np.random.default_rng(0)

x = rng.normal(size=8) + 1j * rng.normal(size=8)
spec = spectral.fft_1d(x)
print("1D: fast vs direct transform agree to",
      f"{np.abs(spec - spectral.dft_1d(x)).max():.2e}")
back = spectral.fft_1d(spec, inverse=True)
print("   inverse recovers the input to", f"{np.abs(back - x).max():.2e}")

# a latent with global structure plus high-frequency noise
t_len, d_len = 16, 12
t = np.arange(t_len)[:, None]
d = np.arange(d_len)[None, :]
latent = (1.0 + np.cos(2 * np.pi * t / t_len) + 0.5 * np.cos(2 * np.pi * d / d_len)
          + 0.3 * rng.normal(size=(t_len, d_len)))

print(f"\nlatent {t_len}x{d_len}: mean + slow oscillations + noise")
print(f"{'alpha':>5} {'kept energy':>12} {'change vs input':>16}")
freq = spectral.real_project(spectral.fft_2d(latent))
total = float((freq ** 2).sum())
for alpha in (0, 1, 2, 4, 8, 15):
    mask = spectral.make_lpf_mask(t_len, d_len, alpha)
    filtered, _ = spectral.lowpass_pipeline(latent, mask)
    kept = float((spectral.apply_lpf(freq, mask) ** 2).sum()) / total
    change = float(np.sqrt(((filtered - latent) ** 2).mean()))
    print(f"{alpha:5d} {kept:12.4f} {change:16.4f}")

print("\nretained energy grows monotonically with the cutoff. Two lossy steps")
print("shape the result. First, keeping only the real part of the spectrum")
print("projects the latent onto its even-symmetric component, so even the")
print("all-pass setting is not a perfect identity. Second, the mask is")
print("one-sided: a real cosine splits its energy between a low bin and its")
print("negative-frequency twin near the top of the spectrum, and the literal")
print("cutoff keeps only the low one, halving oscillation amplitudes while")
print("the global mean (the DC bin) passes through untouched.")
