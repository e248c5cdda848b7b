# Optimization
DEFAULT_BATCH_SIZE = 128
DEFAULT_MAX_STEPS = 20000
DEFAULT_LOSS_REDUCTION = "mean"  # "per_image" sums each image's squared error

# Validation-based stopping
DEFAULT_PATIENCE = 10
DEFAULT_TOL_IMPROVE = 1e-5
DEFAULT_EVAL_EVERY = 100
DEFAULT_VALIDATION_FRACTION = 0.1

# Realization indices of the training and validation noise streams, kept
# clear of the evaluation realizations 0, 1, 2, ...
TRAIN_STREAM = 1_000_000
VALIDATION_STREAM = 1_000_001

LOG_EVERY = 50
