"""
Artifact Writer Module

Writes run outputs (CSV tables, checkpoints, the resolved config) into one
output directory with deterministic formatting, so identical runs produce
identical bytes.
"""

import logging
import re
from pathlib import Path
from typing import Union

import pandas as pd

logger = logging.getLogger("JSCCF.runner.artifacts")

FLOAT_FORMAT = "%.10g"


class ArtifactWriter:
    """Class to handle saving the artifacts of one run."""

    def __init__(self, out_dir: Union[str, Path]):
        """
        Args:
            out_dir: Directory for every artifact of the run (created if missing)
        """
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out_dir / self._safe_filename(name)

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        """
        Save a table with fixed float formatting and Unix line endings.

        Raises:
            OSError: If the file cannot be written
        """
        target = self.path(name)
        try:
            frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        except OSError as e:
            logger.error(f"Error saving {target}: {e}")
            raise
        logger.info(f"Wrote {len(frame)} rows to {target}")
        return target

    @staticmethod
    def _safe_filename(name: str) -> str:
        # Keep word characters, dots and dashes; everything else becomes "_"
        safe_name = re.sub(r"[^\w.-]", "_", name)
        return safe_name.strip("_") or "artifact"
