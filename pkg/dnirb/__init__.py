"""
DnIRB Thermal Denoising Toolkit
===============================

Denoising inception-residual network for single-channel thermal images:
1. A small float64 tensor engine with verified gradients (dnirb.core)
2. The DnIRB network, checkpoints and residual-learning trainer
3. Laplace / Gaussian noise lab and the patch-based data pipeline
4. PSNR evaluation sweeps and the `python -m dnirb` command line
"""

from dnirb.config import pin_blas_threads

__version__ = "1.0.0"

# BLAS pools read these once, when numpy is first imported.
pin_blas_threads()
