"""Exception and warning types shared across the toolkit."""


class SpinDiracError(Exception):
    """Base class for all toolkit errors."""


class DegenerateLattice(SpinDiracError):
    """Lattice basis with non-positive cell area."""


class RadiusTooLarge(SpinDiracError):
    """Dual-lattice enumeration would exceed the configured element cap."""


class EmptyBasis(SpinDiracError):
    """No dual-lattice vectors inside the requested cutoff."""


class SolverFailure(SpinDiracError):
    """Generalized eigensolver failed; carries condition diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NotNormalized(SpinDiracError):
    """Eigenpair is not normalized in the weighted (M) inner product."""


class ZeroEigenvalue(SpinDiracError):
    """First positive eigenvalue is indistinguishable from the kernel."""


class IndexBeyondComputed(SpinDiracError):
    """Requested eigenvalue index exceeds the computed part of the spectrum."""


class QuadratureInsufficient(SpinDiracError):
    """Sphere basis fails its orthonormality residual under the quadrature."""


class LiftVanishes(SpinDiracError):
    """Homogeneous lift vanishes at a requested sample point."""


class QuadratureUnresolved(SpinDiracError):
    """Energy quadrature does not resolve the map (degree residual too large)."""


class CommonZeroOnGrid(SpinDiracError):
    """Eigenspinor family has a common (near-)zero on the sample grid."""


class MixedEigenvalues(SpinDiracError):
    """Eigenspinor family does not share a single eigenvalue."""


class HolomorphicMap(SpinDiracError):
    """Operation undefined for a holomorphic map (dbar derivative vanishes)."""


class NotLinearlyFull(SpinDiracError):
    """Holomorphic curve is not linearly full; derivative flag is rank deficient."""


class EvenAmbientDimension(SpinDiracError):
    """Quaternionic structure needs an odd projective dimension CP^(2m-1)."""


class NotAnEigenspinor(SpinDiracError):
    """Spinor field fails the first-order eigenspinor system on the chart."""


class LineSearchStall(SpinDiracError):
    """Armijo backtracking could not find an acceptable step."""


class AliasingRisk(UserWarning):
    """Sampling grid is marginal for the requested Fourier content."""
