"""Pseudo-spectral laboratory for nonlocal parabolic equations on the torus.

Periodic grids and discrete Fourier calculus (grid), explicit kernels
(kernels), singular-integral operators with dual Fourier/quadrature
realizations (nonlocal_ops), exponential time integrators (stepper), six
model evolution equations (models), and rate-fit verdicts (ratefit), all
driven by a batch cli.
"""

__version__ = "0.1.0"
