"""
Output writer for the lattice subradiance simulator.
CSV tables via pandas, JSON documents and an atomically written run manifest.
"""
import json
import logging
import os
import tempfile
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars and arrays so json can serialise them."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def dumps(document: Dict[str, Any]) -> str:
    return json.dumps(_jsonable(document), indent=2, sort_keys=True) + "\n"


class OutputWriter:
    """
    Writes the data products of one command into an output directory and
    keeps the {file, rows} ledger for the manifest.
    """

    MANIFEST_NAME = "manifest.json"

    def __init__(self, out_dir: str):
        """
        Args:
            out_dir: Target directory, created if missing
        """
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.outputs: List[Dict[str, Any]] = []

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_table(
        self,
        name: str,
        rows: Union[pd.DataFrame, Sequence[Dict[str, Any]]],
        columns: Optional[List[str]] = None,
    ) -> int:
        """
        Write a CSV table with a header row and round-trip float formatting.

        Returns:
            Number of data rows written
        """
        frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=columns)
        frame.to_csv(self.path(name), index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self._record(name, len(frame))
        return len(frame)

    def write_document(self, name: str, document: Dict[str, Any], rows: Optional[int] = None) -> None:
        """Write a JSON document; `rows` is the logical record count for the manifest."""
        with open(self.path(name), "w", encoding="utf-8") as handle:
            handle.write(dumps(document))
        self._record(name, 1 if rows is None else rows)

    def write_manifest(
        self,
        config_echo: Dict[str, Any],
        tool_version: str,
        wall_seconds: float,
        numerics: Optional[Dict[str, Any]] = None,
    ) -> str:
        """
        Write manifest.json atomically after every data file is in place.
        numerics holds the numeric defaults and tolerances the run used.

        Returns:
            Path of the manifest
        """
        manifest = {
            "config": config_echo,
            "tool_version": tool_version,
            "wall_clock_seconds": wall_seconds,
            "timestamp_utc": datetime.now(timezone.utc).isoformat(),
            "outputs": self.outputs,
        }
        if numerics is not None:
            manifest["numerics"] = numerics
        fd, tmp_path = tempfile.mkstemp(prefix=".manifest-", suffix=".json", dir=self.out_dir)
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(dumps(manifest))
            os.replace(tmp_path, self.path(self.MANIFEST_NAME))
        except BaseException:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise
        logger.info("Wrote %s (%d outputs)", self.MANIFEST_NAME, len(self.outputs))
        return self.path(self.MANIFEST_NAME)

    def _record(self, name: str, rows: int) -> None:
        self.outputs.append({"file": name, "rows": int(rows)})
        logger.info("Wrote %s (%d rows)", name, rows)
