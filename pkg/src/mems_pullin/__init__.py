"""Pull-in voltages of p-MEMS devices and their behaviour under symmetrization.

Finite-volume solvers for the Laplacian, the p-Laplacian and divergence-form
elliptic operators, Schwarz rearrangement of grid functions, the Picard
iteration for minimal solutions, pull-in bisection, the Newtonian-potential
formulation on R^d, and first-eigenvalue bounds.
"""

__version__ = "0.1.0"

from .domain import (
    DomainSpec,
    GridFunction,
    ball_mask,
    box_mask,
    cube_mask,
    disk_mask,
    ellipse_mask,
    load_bitmap,
    lshape_mask,
    make_ball,
    make_interval,
    make_mask,
    measure,
    read_grid_csv,
    save_bitmap,
    square_mask,
    symmetrize_domain,
    write_grid_csv,
)
from .errors import (
    BracketFailure,
    ConfigError,
    DomainError,
    EigenDiverged,
    InvalidArgument,
    PullInError,
    SingularityError,
    SolverDiverged,
)
from .mems import (
    IterationConfig,
    IterationOutcome,
    Nonlinearity,
    PullInConfig,
    PullInResult,
    eval_g,
    minimal_solution,
    picard_step,
    pull_in_voltage,
    pullin_compare,
    talenti_check,
)
from .newton import (
    EigenResult,
    KernelQuadrature,
    fundamental_solution,
    newton_minimal_solution,
    newton_mu1,
    newton_potential,
    newton_pull_in,
    pullin_upper_bound,
    pullin_upper_bound_weighted,
)
from .operators import EllipticOperator, SolverConfig, comparison_check, residual, solve, solve_radial
from .rearrange import RearrangedFunction, compose_check, distribution_function, rearrange
from .spectral import (
    DirichletEigenResult,
    EigenConfig,
    dirichlet_eig1,
    dirichlet_pullin_bound,
    faber_krahn_check,
)
