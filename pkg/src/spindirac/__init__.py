"""Dirac-operator spectra on spin surfaces and harmonic maps to CP^n."""

from . import errors
from .lattice import (
    DualVector,
    LatticeBasis,
    SpinCharacter,
    TorusGeometry,
    affine_shift,
    dual_basis,
    enumerate_shifted_dual,
    validate_moduli,
)
from .spectra import (
    NormalizedEigenvalue,
    SpectrumEntry,
    SpectrumReport,
    kernel_dimension,
    normalized,
    sphere_spectrum,
    squared_index,
    torus_spectrum,
)

__version__ = "0.1.0"
