"""Writers for the JSON and CSV artifacts; every file carries the run configuration."""

import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.utils.custom_logger import get_logger
from src.utils.errors import CrossFormatError, InputError

logger = get_logger("Output")

PathLike = Union[str, Path]


def _clean(value: Any) -> Any:
    """Plain JSON types; NaN and infinities become null."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_json(path: PathLike, payload: dict, run_config: Optional[dict] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"run_config": run_config or {}, "created_at": timestamp(), **payload}
    with open(path, "w", encoding="utf-8") as file:
        json.dump(_clean(document), file, indent=2)
        file.write("\n")
    logger.info(f"Wrote {path}")
    return path


def read_json(path: PathLike) -> dict:
    """Read a JSON artifact; a missing or malformed file is an input error naming the path."""
    try:
        with open(path, "r", encoding="utf-8") as file:
            document = json.load(file)
    except FileNotFoundError as error:
        logger.error(f"File {path} not found")
        raise InputError(f"file not found: {path}") from error
    except json.JSONDecodeError as error:
        raise CrossFormatError(path, f"invalid JSON ({error.msg})", line=error.lineno) from error
    if not isinstance(document, dict):
        raise CrossFormatError(path, "expected a JSON object")
    return document


def write_csv(
    path: PathLike,
    rows: Sequence[dict],
    columns: Sequence[str],
    run_config: Optional[dict] = None,
) -> Path:
    """CSV with a header row; the run configuration goes in leading '# ' comment lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(columns))
    with open(path, "w", encoding="utf-8", newline="") as file:
        file.write(f"# run_config: {json.dumps(_clean(run_config or {}), sort_keys=True)}\n")
        file.write(f"# created_at: {timestamp()}\n")
        frame.to_csv(file, index=False, na_rep="NA", lineterminator="\n")
    logger.info(f"Wrote {path} ({len(frame)} rows)")
    return path


def read_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", na_values=["NA"], keep_default_na=False)
