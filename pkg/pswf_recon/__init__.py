"""
PSWF reconstruction toolkit.

Reconstructs a compactly supported function from its Fourier transform
restricted to a ball:
- pswf_core: prolate spheroidal wave functions and their spectra
- bandlimit1d: finite Fourier operator, truncated inverse, truncation rule
- phantoms / radon2d: analytic test functions, sinograms, inverse Radon
- recon: exact and regularized pipelines, error metrics, stability sweeps
- cli: command-line interface (run.py)
"""

__version__ = "0.1.0"
