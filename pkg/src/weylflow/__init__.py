"""weylflow: pilot-wave quantum dynamics as motion in integrable Weyl geometry.

Submodules:
    grids      structured grids over the (t, x, y, z) tangent space
    cofields   co-tensor fields with scale weights and analytic jets
    geometry   Weyl connection, curvature, scale transforms, residual checks
    dynamics   quantum mass, trajectory integration, guiding velocity
    waves      Schrodinger and Klein-Gordon solvers
    polar      amplitude/phase decomposition, densities, equation residuals
    ensembles  position sampling, guided ensembles, equivariance statistics
    scenarios  declarative experiment configs
    runner     full pipeline orchestration and file outputs
    cli        command-line entry points
"""

__version__ = "0.1.0"
