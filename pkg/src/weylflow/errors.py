"""Exception types shared across the package."""


class WeylflowError(Exception):
    """Base class for all package errors."""


class DegenerateMetricError(WeylflowError):
    """Metric is singular (non-invertible) at some grid point."""

    def __init__(self, location, det):
        self.location = tuple(location)
        self.det = float(det)
        super().__init__(f"metric is degenerate at grid index {self.location} (det={det:.3e})")


class StencilError(WeylflowError):
    """Grid is too small for the finite-difference stencils required."""


class UnsupportedRankError(WeylflowError):
    """Tensor rank outside the supported range (0..2 for co-derivatives)."""


class DomainError(WeylflowError):
    """An input field violates a pointwise domain constraint (e.g. lambda <= 0, b <= floor)."""


class IntegrabilityError(WeylflowError):
    """Scale vector fails the integrability (closedness) condition."""

    def __init__(self, residual, tol):
        self.residual = float(residual)
        self.tol = float(tol)
        super().__init__(f"scale vector is not integrable: curl residual {residual:.3e} > tol {tol:.3e}")


class NodeProximityError(WeylflowError):
    """Field amplitude is below the node floor where a phase/velocity was requested."""


class ExitDomainError(WeylflowError):
    """A requested point lies outside the grid domain."""


class QuantumMassInvalidError(WeylflowError):
    """Trajectory entered a region with non-positive squared quantum mass."""


class SolverInstabilityError(WeylflowError):
    """Time stepping diverged or violated its conservation tolerance."""

    def __init__(self, scheme, dt, message):
        self.scheme = scheme
        self.dt = float(dt)
        super().__init__(f"{scheme} (dt={dt:g}): {message}")


class CflError(WeylflowError):
    """Explicit scheme called with a time step above its stability limit."""


class StatisticsInvalidError(WeylflowError):
    """Too many trajectories were excluded for ensemble statistics to be meaningful."""


class ScenarioError(WeylflowError):
    """Scenario config rejected; carries all (line, message) pairs found."""

    def __init__(self, problems):
        self.problems = list(problems)
        lines = "; ".join(f"line {ln}: {msg}" if ln else msg for ln, msg in self.problems)
        super().__init__(f"invalid scenario: {lines}")


class RunStageError(WeylflowError):
    """Pipeline stage failed; wraps the original error with its stage name."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
