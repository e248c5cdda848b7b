"""
Baseline Table Ingestion Module

This module reads the externally produced tables the separation baseline
works from:
- load_rd_curves: codec rate-distortion points (image_id, rate_bpp, psnr_db),
  one file per codec; image_id "*" marks a dataset-wide aggregate curve
- load_fer_table: measured frame error rates of channel-code configurations
  (code_rate, bits_per_symbol, snr_db, fer)

Rates are in bits per pixel after any container header has been removed by
whoever produced the file.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from JSCCF.errors import ConfigurationError, IngestionError
from JSCCF.separation.config.config import AGGREGATE_ID, DEFAULT_CODEC, FER_COLUMNS, RD_COLUMNS

logger = logging.getLogger("JSCCF.separation.tables")

CurveKey = Union[int, str]


@dataclass(frozen=True)
class RdCurve:
    """
    Sorted (rate bpp, PSNR dB) points of one image or of the whole dataset.

    ``fallback_psnr_db`` is the PSNR of the per-channel mean image, used when
    the available rate is below the curve's first point.
    """
    rates: Tuple[float, ...]
    psnrs: Tuple[float, ...]
    codec: str = DEFAULT_CODEC
    image_id: CurveKey = AGGREGATE_ID
    fallback_psnr_db: Optional[float] = None

    def __post_init__(self):
        if len(self.rates) != len(self.psnrs):
            raise ValueError(f"{len(self.rates)} rates but {len(self.psnrs)} PSNR values")
        rates = np.asarray(self.rates, dtype=np.float64)
        psnrs = np.asarray(self.psnrs, dtype=np.float64)
        if np.any(np.diff(rates) <= 0):
            raise ValueError(f"rates of curve {self.image_id} must be strictly increasing")
        if np.any(np.diff(psnrs) < 0):
            raise ValueError(f"PSNR of curve {self.image_id} must not decrease with rate")

    @property
    def empty(self) -> bool:
        return len(self.rates) == 0

    def with_fallback(self, fallback_psnr_db: float) -> "RdCurve":
        return replace(self, fallback_psnr_db=float(fallback_psnr_db))


@dataclass(frozen=True)
class DigitalConfig:
    """A channel code plus modulation with its frame error rate per SNR."""
    code_rate: float
    bits_per_symbol: int
    fer: Dict[float, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.code_rate <= 1.0:
            raise ConfigurationError(f"code rate must be in (0, 1], got {self.code_rate}")
        if self.bits_per_symbol < 1:
            raise ConfigurationError(f"bits per symbol must be at least 1, got {self.bits_per_symbol}")
        bad = {snr: e for snr, e in self.fer.items() if not 0.0 <= e <= 1.0}
        if bad:
            raise ConfigurationError(f"frame error rates outside [0, 1]: {bad}")

    @property
    def name(self) -> str:
        return f"r{self.code_rate:g}:m{self.bits_per_symbol}"

    def fer_at(self, snr_db: float) -> float:
        """
        Raises:
            ConfigurationError: If no frame error rate was supplied for ``snr_db``
        """
        try:
            return self.fer[float(snr_db)]
        except KeyError:
            raise ConfigurationError(f"no frame error rate for {self.name} at {snr_db} dB") from None


def _read_table(path: Union[str, Path], columns: Tuple[str, ...], dtype=None) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Table not found: {path}")
    try:
        frame = pd.read_csv(path, skipinitialspace=True, comment="#", dtype=dtype)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError, ValueError) as e:
        logger.error(f"Could not parse {path}: {e}")
        raise IngestionError(f"{path}: {e}") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        logger.error(f"{path} lacks columns {missing}")
        raise IngestionError(f"{path}: missing columns {missing}, expected {list(columns)}")
    if frame[list(columns)].isna().any().any():
        raise IngestionError(f"{path}: empty cells in required columns")
    return frame


def _curve_key(raw: str) -> CurveKey:
    raw = str(raw).strip()
    if raw == AGGREGATE_ID:
        return AGGREGATE_ID
    try:
        return int(raw)
    except ValueError:
        raise IngestionError(f"image_id must be an integer or '{AGGREGATE_ID}', got '{raw}'") from None


def load_rd_curves(path: Union[str, Path], codec: Optional[str] = None) -> Dict[CurveKey, RdCurve]:
    """
    Read one codec's RD CSV into curves keyed by image id (or "*").

    Args:
        path: CSV with columns image_id, rate_bpp, psnr_db
        codec: Codec tag; defaults to the file stem

    Returns:
        Curves sorted by rate, in first-appearance order of their ids

    Raises:
        FileNotFoundError: If ``path`` does not exist
        IngestionError: On unparsable content or a curve that breaks monotonicity
    """
    path = Path(path)
    codec = codec or path.stem
    frame = _read_table(path, RD_COLUMNS, dtype={"image_id": str})
    try:
        frame["rate_bpp"] = frame["rate_bpp"].astype(np.float64)
        frame["psnr_db"] = frame["psnr_db"].astype(np.float64)
    except ValueError as e:
        raise IngestionError(f"{path}: non-numeric rate or PSNR ({e})") from e

    curves: Dict[CurveKey, RdCurve] = {}
    for raw_id, group in frame.groupby("image_id", sort=False):
        key = _curve_key(raw_id)
        group = group.sort_values("rate_bpp", kind="stable")
        try:
            curves[key] = RdCurve(
                rates=tuple(group["rate_bpp"]), psnrs=tuple(group["psnr_db"]),
                codec=codec, image_id=key,
            )
        except ValueError as e:
            raise IngestionError(f"{path}: {e}") from e
    logger.info(f"Loaded {len(curves)} {codec} RD curves from {path}")
    return curves


def load_fer_table(path: Union[str, Path]) -> List[DigitalConfig]:
    """
    Read a frame error rate table into one DigitalConfig per
    (code_rate, bits_per_symbol), in first-appearance order.

    Raises:
        FileNotFoundError: If ``path`` does not exist
        IngestionError: On unparsable content or an error rate outside [0, 1]
    """
    frame = _read_table(path, FER_COLUMNS)
    configs = []
    try:
        for (rate, bps), group in frame.groupby(["code_rate", "bits_per_symbol"], sort=False):
            fer = {float(s): float(e) for s, e in zip(group["snr_db"], group["fer"])}
            configs.append(DigitalConfig(code_rate=float(rate), bits_per_symbol=int(bps), fer=fer))
    except (ValueError, TypeError) as e:
        raise IngestionError(f"{path}: {e}") from e
    logger.info(f"Loaded {len(configs)} digital configurations from {path}")
    return configs
