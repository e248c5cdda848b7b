"""
Composite gradient-check cases: encoder -> channel with frozen noise -> decoder.

Each sampled point builds a tiny 64-bit model, draws one forward-noise block
and one fading gain, and checks the gradient of the reconstruction MSE with
respect to every parameter of the transmitted layer. The combiner cases run
layer 2 end to end: frozen layer 1, its (noiseless or noisy) feedback, the
transmitter estimate, the layer-2 encoder and decoder, and the combiner.
Points where a PReLU input sits within the kink margin are resampled.
"""

from typing import List

import numpy as np

from JSCCF.autodiff import functional as F
from JSCCF.autodiff.config.config import GRADCHECK_DTYPE, GRADCHECK_KINK_MARGIN
from JSCCF.autodiff.gradcheck import GradCheckCase
from JSCCF.autodiff.tensor import Tape, Tensor
from JSCCF.channel.channel import ComplexSignal, add_noise, complex_noise, snr_to_sigma2
from JSCCF.model.arch import ArchSpec
from JSCCF.model.model import build_model, combine_layer, decode_layer, encode_layer, reconstruct

COMPOSITE_SPEC = ArchSpec(
    channel_uses=(4, 4),
    height=8,
    width=8,
    channels=1,
    kernel_size=3,
    encoder_widths=(2, 2, 2),
    decoder_widths=(2, 2, 2),
    combiner_widths=(2, 2),
)
COMPOSITE_SNR_DB = 5.0
MAX_RESAMPLES = 50


def _prelu_margin(fn, inputs) -> float:
    """Smallest |PReLU input| seen while evaluating ``fn`` on a tape."""
    with Tape() as tape:
        fn(*inputs)
    margins = [np.min(np.abs(node.inputs[0].data)) for node in tape.nodes if node.op == "prelu"]
    return float(min(margins)) if margins else float("inf")


def _composite_sampler(layer: int, fading: bool):
    def sample(rng: np.random.Generator):
        for _ in range(MAX_RESAMPLES):
            model = build_model(COMPOSITE_SPEC, seed=int(rng.integers(2**31)), dtype=GRADCHECK_DTYPE)
            x = Tensor(rng.uniform(0.0, 1.0, size=(1, 8, 8, 1)).astype(GRADCHECK_DTYPE))
            x_prev = Tensor(rng.uniform(0.0, 1.0, size=(1, 8, 8, 1)).astype(GRADCHECK_DTYPE))
            sigma2 = snr_to_sigma2(COMPOSITE_SNR_DB)
            noises = [complex_noise(1, 2 * k, sigma2, rng) for k in COMPOSITE_SPEC.channel_uses]
            h = rng.standard_normal(1) + 1j * rng.standard_normal(1) if fading else None
            model.set_trainable(layer)
            params = list(model.layer_parameters(layer).values())

            def fn(*_params):
                outputs: List[ComplexSignal] = []
                for j in range(1, layer + 1):
                    y = encode_layer(model, j, x, None if j == 1 else x_prev)
                    if h is not None:
                        y = ComplexSignal(F.complex_gain(y.pairs, h))
                    outputs.append(add_noise(y, noises[j - 1]))
                u = decode_layer(model, layer, outputs, image_size=(8, 8))
                return F.mse_loss(x, u)

            if _prelu_margin(fn, params) >= GRADCHECK_KINK_MARGIN:
                return fn, params
        raise RuntimeError("could not sample a composite point away from PReLU kinks")
    return sample


def _combiner_sampler(feedback_snr_db):
    """Layer 2 through the feedback path and combiner, layer 1 frozen."""
    def sample(rng: np.random.Generator):
        for _ in range(MAX_RESAMPLES):
            model = build_model(COMPOSITE_SPEC, seed=int(rng.integers(2**31)), dtype=GRADCHECK_DTYPE)
            x = Tensor(rng.uniform(0.0, 1.0, size=(1, 8, 8, 1)).astype(GRADCHECK_DTYPE))
            k1, k2 = COMPOSITE_SPEC.channel_uses
            sigma2 = snr_to_sigma2(COMPOSITE_SNR_DB)
            forward = [complex_noise(1, 2 * k1, sigma2, rng), complex_noise(1, 2 * k2, sigma2, rng)]
            back = None if feedback_snr_db is None else complex_noise(1, 2 * k1, snr_to_sigma2(feedback_snr_db), rng)
            model.set_trainable(2)
            params = list(model.layer_parameters(2).values())

            def fn(*_params):
                z1 = add_noise(encode_layer(model, 1, x), forward[0])
                w1 = z1 if back is None else add_noise(z1, back)
                x_tilde = reconstruct(model, 1, [w1], image_size=(8, 8))
                z2 = add_noise(encode_layer(model, 2, x, x_tilde), forward[1])
                x_hat = combine_layer(
                    model, 2,
                    decode_layer(model, 1, [z1], image_size=(8, 8)),
                    decode_layer(model, 2, [z1, z2], image_size=(8, 8)),
                )
                return F.mse_loss(x, x_hat)

            if _prelu_margin(fn, params) >= GRADCHECK_KINK_MARGIN:
                return fn, params
        raise RuntimeError("could not sample a composite point away from PReLU kinks")
    return sample


COMPOSITE_CASES = [
    GradCheckCase("composite_layer1_awgn", _composite_sampler(layer=1, fading=False)),
    GradCheckCase("composite_layer2_rayleigh", _composite_sampler(layer=2, fading=True)),
    GradCheckCase("composite_layer2_combiner_feedback", _combiner_sampler(feedback_snr_db=None)),
    GradCheckCase("composite_layer2_combiner_noisy_feedback", _combiner_sampler(feedback_snr_db=10.0)),
]
