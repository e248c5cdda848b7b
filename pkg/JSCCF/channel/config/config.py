# Channel kinds
FORWARD_KINDS = ("awgn", "rayleigh_slow")
FEEDBACK_KINDS = ("noiseless", "awgn")
DEFAULT_FORWARD_KIND = "awgn"
DEFAULT_FEEDBACK_KIND = "noiseless"

# Signal-to-noise ratios (dB); +inf is the noiseless sentinel
DEFAULT_FORWARD_SNR_DB = 1.0
DEFAULT_FEEDBACK_SNR_DB = float("inf")

# Variance H_c of the slow Rayleigh gain
DEFAULT_FADING_VARIANCE = 1.0

DEFAULT_SEED = 0

# Link index, the last component of every noise-stream key
LINK_FORWARD = 0
LINK_FEEDBACK = 1
LINK_FADING = 2
