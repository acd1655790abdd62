"""Numerical laboratory for phase information in translation-invariant inputs.

Fourier-domain samplers for a Gaussian baseline and a phase-perturbed planted
model, Hermite/Bessel special functions, analytic loss and drift oracles,
online SGD with overlap tracking, spectral image surgery and a small
two-layer classifier.
"""
from ._backend import CYTHON_AVAILABLE
from .errors import (
    AsymmetricSpectrum,
    Blowup,
    ConfigError,
    ConstantPatch,
    DimensionMismatch,
    EmptyClass,
    NegativeEigenvalue,
    PairingExhausted,
    PhaseLabError,
    QuadratureNonConvergence,
    SymmetryViolation,
    ZeroNorm,
)

__version__ = "0.1.0"
