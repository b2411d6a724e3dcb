"""Exception types raised across the package."""


class ShellAdsError(Exception):
    """Base class for all package-specific errors."""


class MeshError(ShellAdsError):
    """Invalid mesh topology or geometry."""


class UnmatchedBoundaryVertexError(MeshError):
    """A boundary vertex has no periodic partner within tolerance."""


class NonManifoldAfterMergeError(MeshError):
    """Merging periodic vertices produced a non-manifold edge."""


class RemeshDegenerateError(MeshError):
    """A remeshing operation would create a non-manifold configuration."""


class FillFailedError(MeshError):
    """A surgery hole could not be triangulated as a disk."""


class ZeroNormalError(MeshError):
    """A vertex star has a vanishing accumulated normal."""


class SingularEdgeSystemError(MeshError):
    """Edge vectors of a face are too degenerate to fit a second form."""


class DegenerateFaceError(MeshError):
    """Face area below the assembly threshold."""


class NoConvergenceError(ShellAdsError):
    """Iterative solver exhausted its iteration budget."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"solver did not converge in {iterations} iterations "
            f"(relative residual {residual:.3e})"
        )


class SingularTensorError(ShellAdsError):
    """Objective needs an invertible stiffness tensor but got a singular one."""


class EmptyLevelSetError(ShellAdsError):
    """Level set does not cross zero on the sampling grid."""


class NonManifoldExtractionError(MeshError):
    """Extracted iso-surface is not a closed 2-manifold."""


class ProjectionDivergedError(ShellAdsError):
    """Binary-search projection onto a level set failed to bracket zero."""


class ConfigError(ShellAdsError):
    """Invalid run configuration."""
