from JSCCF.autodiff.config.config import DEFAULT_LEARNING_RATE, GRADCHECK_POINTS, GRADCHECK_TOLERANCE
from JSCCF.channel.config.config import (
    DEFAULT_FADING_VARIANCE,
    DEFAULT_FEEDBACK_KIND,
    DEFAULT_FEEDBACK_SNR_DB,
    DEFAULT_FORWARD_KIND,
    DEFAULT_FORWARD_SNR_DB,
    FEEDBACK_KINDS,
    FORWARD_KINDS,
)
from JSCCF.evaluation.config.config import DEFAULT_REALIZATIONS, DEFAULT_TARGETS_DB
from JSCCF.model.config.config import (
    DEFAULT_CHANNELS,
    DEFAULT_COMBINER_WIDTHS,
    DEFAULT_DECODER_WIDTHS,
    DEFAULT_ENCODER_WIDTHS,
    DEFAULT_HEIGHT,
    DEFAULT_KERNEL_SIZE,
    DEFAULT_WIDTH,
)
from JSCCF.training.config.config import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_EVAL_EVERY,
    DEFAULT_LOSS_REDUCTION,
    DEFAULT_MAX_STEPS,
    DEFAULT_PATIENCE,
    DEFAULT_TOL_IMPROVE,
    DEFAULT_VALIDATION_FRACTION,
)

SUBCOMMANDS = ("train", "eval", "sweep", "varlen", "baseline", "gradcheck")
DATASET_FORMATS = ("cifar10-bin", "ppm", "synthetic")

DEFAULT_OUT_DIR = "runs"
RESOLVED_CONFIG = "config.resolved"
CHECKPOINT_NAME = "model.jscf"
GRADCHECK_CSV = "gradcheck.csv"

MODEL_COMMANDS = ("eval", "sweep", "varlen")

# Experiment file schema, in echo order. ``type`` is one of int, float, str,
# bool, int_list, float_list; ``required`` lists the subcommands that need the
# key; ``min`` / ``choices`` bound the value. A default of None means unset.
SCHEMA = {
    'subcommand': {'type': 'str', 'default': None, 'choices': SUBCOMMANDS},
    'seed': {'type': 'int', 'default': 0, 'min': 0},
    'out': {'type': 'str', 'default': DEFAULT_OUT_DIR},

    # Dataset
    'dataset': {'type': 'str', 'default': 'synthetic', 'choices': DATASET_FORMATS},
    'dataset_path': {'type': 'str', 'default': None},
    'test_path': {'type': 'str', 'default': None},
    'synthetic_count': {'type': 'int', 'default': 256, 'min': 1},
    'val_fraction': {'type': 'float', 'default': DEFAULT_VALIDATION_FRACTION, 'min': 0.0},
    'test_fraction': {'type': 'float', 'default': 0.1, 'min': 0.0},

    # Architecture
    'height': {'type': 'int', 'default': DEFAULT_HEIGHT, 'min': 4},
    'width': {'type': 'int', 'default': DEFAULT_WIDTH, 'min': 4},
    'channels': {'type': 'int', 'default': DEFAULT_CHANNELS, 'min': 1},
    'layers': {'type': 'int', 'default': 1, 'min': 1},
    'bandwidth_ratio': {'type': 'float', 'default': 1 / 6, 'min': 0.0},
    'channel_uses': {'type': 'int_list', 'default': None},
    'kernel_size': {'type': 'int', 'default': DEFAULT_KERNEL_SIZE, 'min': 1},
    'encoder_widths': {'type': 'int_list', 'default': DEFAULT_ENCODER_WIDTHS},
    'decoder_widths': {'type': 'int_list', 'default': DEFAULT_DECODER_WIDTHS},
    'combiner_widths': {'type': 'int_list', 'default': DEFAULT_COMBINER_WIDTHS},

    # Training
    'lr': {'type': 'float', 'default': DEFAULT_LEARNING_RATE},
    'batch': {'type': 'int', 'default': DEFAULT_BATCH_SIZE, 'min': 1},
    'max_steps': {'type': 'int', 'default': DEFAULT_MAX_STEPS, 'min': 1},
    'patience': {'type': 'int', 'default': DEFAULT_PATIENCE, 'min': 1},
    'tol_improve': {'type': 'float', 'default': DEFAULT_TOL_IMPROVE, 'min': 0.0},
    'eval_every': {'type': 'int', 'default': DEFAULT_EVAL_EVERY, 'min': 1},
    'loss_reduction': {'type': 'str', 'default': DEFAULT_LOSS_REDUCTION, 'choices': ('mean', 'per_image')},
    'feedback_ablation': {'type': 'bool', 'default': False},

    # Channel
    'forward_kind': {'type': 'str', 'default': DEFAULT_FORWARD_KIND, 'choices': FORWARD_KINDS},
    'snr_db': {'type': 'float', 'default': DEFAULT_FORWARD_SNR_DB},
    'feedback_kind': {'type': 'str', 'default': DEFAULT_FEEDBACK_KIND, 'choices': FEEDBACK_KINDS},
    'feedback_snr_db': {'type': 'float', 'default': DEFAULT_FEEDBACK_SNR_DB},
    'fading_variance': {'type': 'float', 'default': DEFAULT_FADING_VARIANCE},

    # Evaluation
    'checkpoint': {'type': 'str', 'default': None, 'required': MODEL_COMMANDS},
    'realizations': {'type': 'int', 'default': DEFAULT_REALIZATIONS, 'min': 1},
    'snr_test_db': {'type': 'float_list', 'default': None, 'required': ('sweep',)},
    'snr_fb_db': {'type': 'float_list', 'default': None},
    'targets_db': {'type': 'float_list', 'default': DEFAULT_TARGETS_DB},

    # Separation baseline
    'rd_csv': {'type': 'str', 'default': None, 'required': ('baseline',)},
    'fer_csv': {'type': 'str', 'default': None},
    'snr_grid': {'type': 'float_list', 'default': None, 'required': ('baseline',)},

    # Gradient checks
    'gradcheck_points': {'type': 'int', 'default': GRADCHECK_POINTS, 'min': 1},
    'gradcheck_tolerance': {'type': 'float', 'default': GRADCHECK_TOLERANCE},
}
