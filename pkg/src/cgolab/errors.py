"""Exception types shared across the package."""


class CgolabError(Exception):
    """Base class for all package errors."""


class DomainError(CgolabError):
    """Arguments outside the mathematical domain of an operation."""


class QuadratureFailure(CgolabError):
    """An adaptive quadrature did not reach the requested tolerance."""


class SplitFailure(CgolabError):
    """No truncation level achieves the requested small/bounded splitting."""


class DegenerateZ(CgolabError):
    """A phase vector violates z.z = 0 or vanishes."""


class SymbolZero(CgolabError):
    """A lattice frequency lies too close to the zero set of the symbol."""

    def __init__(self, xi, symbol_value, floor):
        self.xi = tuple(float(c) for c in xi)
        self.symbol_value = complex(symbol_value)
        self.floor = float(floor)
        super().__init__(
            f"|p_z(xi)| = {abs(symbol_value):.3e} below floor {floor:.3e} "
            f"at xi = {self.xi}"
        )


class NotContractive(CgolabError):
    """The perturbation operator has norm >= 1; the series cannot converge."""


class NoConvergence(CgolabError):
    """An iteration stalled before reaching its tolerance."""


class SpectrumAtZero(CgolabError):
    """The discrete Schrodinger operator has an eigenvalue at (numerical) zero."""


class SolverDivergence(CgolabError):
    """The linear solver failed to reduce the residual to tolerance."""


class BasisMismatch(CgolabError):
    """Boundary data defined on incompatible discretizations."""


class TraceResolutionError(CgolabError):
    """A boundary basis cannot represent a trace to the configured residual."""


class ConfigError(CgolabError):
    """A run configuration failed validation."""
