"""
Run Outputs

CSV and JSON emission, experiment config loading, and the reproducibility
manifest. Nothing here writes timestamps, so an identical config gives
byte-identical files.
"""

import csv
import hashlib
import json
import logging
from collections import Counter
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from algostab import __version__
from algostab.errors import ConfigError, InputError
from algostab.schema import ExperimentConfig, OutputRecord, RunManifest, Violation

logger = logging.getLogger(__name__)

FLOAT_FORMAT = ".17g"


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    return str(value)


def emit_csv(table: Mapping[str, Sequence[Any]], path: str | Path) -> Path:
    """
    Write a column table as CSV.

    Floats are printed with 17 significant digits so they parse back exactly;
    line endings are '\\n' and the header is the first row.

    Args:
        table: Column name to values; every column has the same length
        path: Output file

    Returns:
        The written path

    Raises:
        InputError: Columns of unequal length
    """
    columns = list(table.keys())
    lengths = {len(table[c]) for c in columns}
    if len(lengths) > 1:
        raise InputError(f"table is not rectangular: column lengths {sorted(lengths)}")
    n_rows = lengths.pop() if lengths else 0

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for i in range(n_rows):
            writer.writerow([_cell(table[c][i]) for c in columns])
    logger.debug("Wrote %d rows to %s", n_rows, path)
    return path


def _parse(cell: str) -> Any:
    try:
        return float(cell)
    except ValueError:
        return cell


def read_csv(path: str | Path) -> Dict[str, List[Any]]:
    """Load a CSV written by emit_csv back into columns; numeric cells become floats."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        return {}
    header, body = rows[0], rows[1:]
    return {name: [_parse(row[i]) for row in body] for i, name in enumerate(header)}


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if hasattr(value, "model_dump"):
        return _jsonable(value.model_dump())
    return value


def write_json(data: Any, path: str | Path) -> Path:
    """Write sorted-key, indented JSON; non-finite floats become strings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_jsonable(data), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return path


def canonical_json(data: Any) -> str:
    """Compact sorted-key JSON with floats normalized (1 and 1.0 hash alike)."""

    def normalize(value):
        value = _jsonable(value)
        if isinstance(value, dict):
            return {k: normalize(v) for k, v in value.items()}
        if isinstance(value, list):
            return [normalize(v) for v in value]
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return format(float(value), FLOAT_FORMAT)
        return value

    return json.dumps(normalize(data), sort_keys=True, separators=(",", ":"))


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_json(config.model_dump()).encode("utf-8")).hexdigest()


def _diagnostics(exc: ValidationError) -> List[str]:
    return [f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()]


def load_config(path: str | Path, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Load and validate an experiment config file.

    Args:
        path: JSON config
        overrides: Top-level keys replacing the file's values (CLI flags); None
            entries are ignored

    Returns:
        Validated ExperimentConfig

    Raises:
        FileNotFoundError: Missing file
        ConfigError: Unparseable JSON or failed validation, with field-level diagnostics
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config is not valid JSON: {e}", [f"line {e.lineno}: {e.msg}"]) from e
    if not isinstance(raw, dict):
        raise ConfigError("Config must be a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}", _diagnostics(e)) from e


def violation_summary(violations: Sequence[Violation]) -> Dict[str, Any]:
    """Count violations per check, like an error summary."""
    counts = Counter(v.check for v in violations)
    return {"total": len(violations), "counts": dict(sorted(counts.items()))}


def build_manifest(
    config: ExperimentConfig,
    output_paths: Sequence[Path],
    root: Path,
    violation_count: int,
    warning_count: int,
    strict: bool = False,
) -> RunManifest:
    """RunManifest over the emitted files, paths relative to root and sorted."""
    records = [
        OutputRecord(path=Path(p).relative_to(root).as_posix(), sha256=sha256_file(p))
        for p in sorted(output_paths, key=lambda p: Path(p).as_posix())
    ]
    passed = violation_count == 0 and not (strict and warning_count > 0)
    return RunManifest(
        experiment=config.experiment,
        config_hash=config_hash(config),
        toolkit_version=__version__,
        outputs=records,
        passed=passed,
        violation_count=violation_count,
        warning_count=warning_count,
    )
