# Default architecture (all values overridable through ArchSpec)
DEFAULT_KERNEL_SIZE = 5
DEFAULT_ENCODER_WIDTHS = (32, 32, 32)
DEFAULT_DECODER_WIDTHS = (32, 32, 32)
DEFAULT_COMBINER_WIDTHS = (32, 32)
DEFAULT_HEIGHT = 32
DEFAULT_WIDTH = 32
DEFAULT_CHANNELS = 3

# Strides per block; two stride-2 stages map H x W to H/4 x W/4
ENCODER_STRIDES = (2, 2, 1, 1)
DECODER_STRIDES = (1, 1, 2, 2)
DOWNSAMPLING = 4

# Checkpoint file format
CHECKPOINT_MAGIC = b"JSCF"
CHECKPOINT_VERSION = 1
CHECKPOINT_SUFFIX = ".jscf"
