import os

# Pin BLAS to one thread before numpy loads anywhere: runtime bounds and
# determinism checks assume a fixed thread count of 1.
for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ.setdefault(var, "1")
