import numpy as np

# Arithmetic precision
DEFAULT_DTYPE = np.float32
GRADCHECK_DTYPE = np.float64
CHANNEL_DTYPE = np.float64  # channel symbols keep the power constraint to 1e-9

# Adam defaults
DEFAULT_LEARNING_RATE = 1e-4
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPSILON = 1e-8

# GDN parameter floors, enforced after every optimizer step
GDN_BETA_MIN = 1e-6
GDN_GAMMA_MIN = 0.0

# Initialization
PRELU_INIT_SLOPE = 0.25
GDN_BETA_INIT = 1.0
GDN_GAMMA_INIT = 0.1

# Finite-difference gradient checks
GRADCHECK_STEP = 1e-5
GRADCHECK_TOLERANCE = 1e-4
GRADCHECK_POINTS = 20
GRADCHECK_KINK_MARGIN = 1e-3
GRADCHECK_RELATIVE_FLOOR = 1e-3  # fraction of the largest gradient magnitude
