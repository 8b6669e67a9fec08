"""
CSV and JSON emission.

Floats are written with 12 significant digits and JSON keys sorted, so
identical runs produce byte-identical files.
"""

import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from xitrace.config import FLOAT_FORMAT, REPORT_SCHEMA_VERSION

logger = logging.getLogger(__name__)

STDOUT = "-"


def _clean(value: Any) -> Any:
    """JSON-safe copy: 12-digit floats, non-finite values as strings, complex as [re, im]."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [_clean(float(value.real)), _clean(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return str(value)
        return float(FLOAT_FORMAT % value)
    return value


def write_table(records: List[Dict[str, Any]], name: str, output_dir: Union[str, Path],
                columns: Optional[List[str]] = None) -> Optional[Path]:
    """
    Write rows as CSV; `output_dir` "-" writes to stdout.

    Returns:
        Path of the written file, or None for stdout
    """
    df = pd.DataFrame.from_records(records, columns=columns)
    if str(output_dir) == STDOUT:
        df.to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT)
        return None
    file_path = Path(output_dir) / f"{name}.csv"
    logger.info(f"Writing {len(df)} rows to CSV: {file_path}")
    file_path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(file_path, index=False, float_format=FLOAT_FORMAT)
    return file_path


def write_report(payload: Dict[str, Any], name: str, output_dir: Union[str, Path],
                 config: Optional[Dict[str, Any]] = None) -> Optional[Path]:
    """
    Write a JSON report carrying the schema version and the resolved config.

    Returns:
        Path of the written file, or None for stdout
    """
    document = dict(payload)
    document["schema_version"] = REPORT_SCHEMA_VERSION
    if config is not None:
        document["config"] = config
    text = json.dumps(_clean(document), indent=2, sort_keys=True, default=str)
    if str(output_dir) == STDOUT:
        sys.stdout.write(text + "\n")
        return None
    file_path = Path(output_dir) / f"{name}.json"
    logger.info(f"Writing JSON report: {file_path}")
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        f.write(text + "\n")
    return file_path
