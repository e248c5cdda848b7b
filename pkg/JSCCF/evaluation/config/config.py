# Peak pixel value of 8-bit images
PSNR_MAX = 255.0

# Channel realizations averaged per image
DEFAULT_REALIZATIONS = 10

# Images per evaluation batch
DEFAULT_EVAL_BATCH = 128

# Variable-length quality targets (dB)
DEFAULT_TARGETS_DB = (20.0, 25.0, 30.0)

# Histogram bins for per-image PSNR gaps
DEFAULT_GAP_BINS = 20

# Output files
EVAL_CSV = "eval.csv"
SWEEP_CSV = "sweep.csv"
VARLEN_CSV = "varlen.csv"

# Per-image PSNR gap against the separation capacity bound
GAP_CSV = "gap.csv"
