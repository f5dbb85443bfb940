from __future__ import annotations

# Monte Carlo sizes
MIN_MC_SAMPLE = 10_000
MC_TABLE_SIZE = 1_000_000
MC_LOOP_SIZE = 100_000
LSM_CHI_DRAWS = 1_000_000

# Cholesky jitter ladder
JITTER_START = 1e-10
JITTER_MAX = 1e-6
JITTER_WARN = 1e-8

# Conditional simulation (MCMC)
MCMC_BURNIN = 5_000
MCMC_STEPS = 50_000
MCMC_THIN = 100
MCMC_PROP_SD = 1.0
MCMC_ACCEPT_LOW = 0.1
MCMC_ACCEPT_HIGH = 0.6

# Estimation
DEGENERATE_TOL = 1e-12
STEP1_MAXITER = 2_000
STEP1_XATOL = 1e-4
STEP1_FATOL = 1e-6
CVM_XATOL = 1e-4
CVM_FATOL = 1e-8
CVM_MAXITER = 400
COPULA_FATOL = 1e-6
COPULA_MAX_EVALS = 200
LOG_PARAM_BOUND = 12.0

# Bootstrap
MIN_BOOTSTRAP = 50
MAX_FAILED_FRACTION = 0.10

# Numerics
CDF_FLOOR = 1e-300
CDF_CEIL = 1.0 - 1e-16
GPD_XI_ZERO = 1e-8
BINV_TOL = 1e-12

# Simulation
SIM_CHUNK_ROWS = 4_096
STUDY_DOMAIN = 200.0

# Tail dependence
CHI_THRESHOLDS = (0.5, 0.75, 0.9, 0.95, 0.975, 0.99)
CHI_BIN_WIDTH = 25.0
MIN_JOINT_EXCEEDANCES = 20

# Marginal fitting
MIN_EGPD_SAMPLES = 100

# I/O
FLOAT_FMT = "%.17g"
WORKERS_ENV = "LSMIX_WORKERS"
