from __future__ import annotations
import os

# Worker pool size for curve sampling, multi-starts and Monte Carlo chunks
THREADS = int(os.getenv("MODEXP_THREADS", str(os.cpu_count() or 1)))

LOG_LEVEL = os.getenv("MODEXP_LOG_LEVEL", "WARNING")

# Simplex / scalar optimization defaults
MAX_ITERS = int(os.getenv("MODEXP_MAX_ITERS", "20000"))
TOLERANCE = float(os.getenv("MODEXP_TOLERANCE", "1e-10"))
RESTARTS = int(os.getenv("MODEXP_RESTARTS", "1"))
SEED = int(os.getenv("MODEXP_SEED", "0"))

# Coarse grid for sup-over-varrho searches (log spaced)
RHO_GRID_MIN = float(os.getenv("MODEXP_RHO_GRID_MIN", "1e-3"))
RHO_GRID_MAX = float(os.getenv("MODEXP_RHO_GRID_MAX", "1e3"))
RHO_GRID_POINTS = int(os.getenv("MODEXP_RHO_GRID_POINTS", "200"))

# Root-finding bracket for rho_0
RHO0_BRACKET = (1e-6, 1e3)

# Step for the derivative constants R_+, R_-, R_0
DERIVATIVE_STEP = 1e-5

ROW_SUM_TOLERANCE = 1e-9
DISTRIBUTION_TOLERANCE = 1e-12

DPT_KMAX = int(os.getenv("MODEXP_DPT_KMAX", "4"))
DPT_STARTS = int(os.getenv("MODEXP_DPT_STARTS", "200"))
# Nelder-Mead runs per k after screening the starts
DPT_POLISH = int(os.getenv("MODEXP_DPT_POLISH", "8"))
DPT_DENOMINATOR_FLOOR = 1e-9

VNC_REGIME_LIMIT = 0.2

SEED_SEARCH = int(os.getenv("MODEXP_SEED_SEARCH", "20"))
ENUMERATION_BUDGET = int(os.getenv("MODEXP_ENUMERATION_BUDGET", str(10**7)))
CODEBOOK_BUDGET = int(os.getenv("MODEXP_CODEBOOK_BUDGET", str(10**6)))
MC_CHUNK = 10_000
