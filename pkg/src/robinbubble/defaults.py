"""Single table of numerical defaults.

Every module reads its defaults from here so the CLI and the library agree.

==================  =========  ====================================================
name                value      meaning
==================  =========  ====================================================
N_COLLOCATION       400        boundary collocation points (charges = n / 2)
N_ANSATZ            800        collocation points for the bubble ansatz solver
INFLATION           1.0        charge offset as a fraction of the local radius
SVD_CUT             1e-12      relative singular-value cutoff
RESIDUAL_THRESHOLD  1e-2       relative flux misfit above which a solve is flagged
MARGIN_FRACTION     0.02       interior margin for g, times the diameter
GRAD_STEP_FRACTION  1e-4       FD step for grad g, times the diameter
DLAMBDA_STEP        1e-4       relative FD step in lambda
HESSIAN_STEP        1e-3       FD step for the Hessian, times the diameter
SUP_GRID            9          grid points per axis for the multistart search
SUP_STARTS          8          number of multistart seeds
MU_WINDOW           0.02, 0.2  mu range for the expansion fits
QUAD_LEVEL          1          volume quadrature refinement level
D0_RMAX             500        outer radius for the D0 tail match
SEED                20240917   seed for anything random (tests, sampling)
==================  =========  ====================================================
"""
N_COLLOCATION = 400
N_ANSATZ = 800
INFLATION = 1.0
SVD_CUT = 1e-12
RESIDUAL_THRESHOLD = 1e-2
MARGIN_FRACTION = 0.02
GRAD_STEP_FRACTION = 1e-4
DLAMBDA_STEP = 1e-4
HESSIAN_STEP = 1e-3
SUP_GRID = 9
SUP_STARTS = 8
MU_WINDOW = (0.02, 0.2)
MU_LIST = (0.2, 0.141, 0.1, 0.0707, 0.05, 0.0354, 0.025, 0.02)
QUAD_LEVEL = 1
D0_RMAX = 500.0
SEED = 20240917


def as_dict():
    return {k: v for k, v in globals().items() if k.isupper()}
