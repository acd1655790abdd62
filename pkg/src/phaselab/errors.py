"""Exception types raised across the package."""


class PhaseLabError(Exception):
    """Base class for every error raised by phaselab."""


class SymmetryViolation(PhaseLabError):
    """A Fourier array that should describe a real signal is not conjugate symmetric."""


class NegativeEigenvalue(PhaseLabError):
    pass


class AsymmetricSpectrum(PhaseLabError):
    pass


class QuadratureNonConvergence(PhaseLabError):
    pass


class Blowup(PhaseLabError):
    """ODE state left the plausible range, usually a sign or step-size mistake."""


class ZeroNorm(PhaseLabError):
    pass


class DimensionMismatch(PhaseLabError):
    pass


class PairingExhausted(PhaseLabError):
    pass


class ConstantPatch(PhaseLabError):
    pass


class EmptyClass(PhaseLabError):
    pass


class ConfigError(PhaseLabError):
    pass
