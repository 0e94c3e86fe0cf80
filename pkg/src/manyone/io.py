"""Config parsing, run manifests and report serialization."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import ChannelConfig, ValidationError, ensure_valid

SIGNIFICANT_DIGITS = 12
SWEEP_COLUMNS = ("P", "half_log2P", "lower", "upper", "gap")
LAYER_CSV_COLUMNS = ("layer", "receiver", "errors", "trials")


class ParseError(ValueError):
    """Malformed config text; ``offset`` is the character offset of the fault."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset


def _config_from_obj(obj) -> ChannelConfig:
    if not isinstance(obj, dict):
        raise ValidationError("config must be a JSON object", "")
    for key in ("K", "gains", "powers"):
        if key not in obj:
            raise ValidationError(f"missing field {key!r}", f"/{key}")
    K = obj["K"]
    if isinstance(K, bool) or not isinstance(K, int):
        raise ValidationError(f"K must be an integer, got {K!r}", "/K")
    for key in ("gains", "powers"):
        values = obj[key]
        if not isinstance(values, list):
            raise ValidationError(f"{key} must be an array", f"/{key}")
        for i, v in enumerate(values):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ValidationError(f"{key}[{i}] must be a number", f"/{key}/{i}")
    return ensure_valid(ChannelConfig(K, obj["gains"], obj["powers"]))


def parse_config(source) -> ChannelConfig:
    """Validated config from a path, inline JSON text, or a dict.

    Raises :class:`ParseError` for malformed JSON and
    :class:`~manyone.core.ValidationError` (with a JSON pointer) otherwise.
    """
    if isinstance(source, dict):
        return _config_from_obj(source)
    text = str(source)
    if not text.lstrip().startswith("{"):
        path = Path(text)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed config JSON: {exc.msg} at offset {exc.pos}", exc.pos) from exc
    return _config_from_obj(obj)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_digest(config: ChannelConfig) -> str:
    return hashlib.sha256(canonical_json(config.to_dict()).encode()).hexdigest()


def round_floats(obj, digits: int = SIGNIFICANT_DIGITS):
    """Recursively round floats to ``digits`` significant digits; non-finite become strings."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.{digits}g}")
    if isinstance(obj, dict):
        return {str(k): round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return round_floats(obj.tolist(), digits)
    return obj


def manifest(command: str, config: ChannelConfig = None, seed=None, timestamp: bool = False) -> dict:
    """Run manifest embedded in every report.

    The timestamp comes from ``SOURCE_DATE_EPOCH`` when set, from the wall
    clock only when ``timestamp`` is requested, and is null otherwise, so
    that repeated runs produce identical bytes.
    """
    stamp = None
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        stamp = datetime.fromtimestamp(int(epoch), timezone.utc).isoformat()
    elif timestamp:
        stamp = datetime.now(timezone.utc).isoformat()
    return {
        "command": command,
        "config_digest": None if config is None else config_digest(config),
        "seed": seed,
        "version": __version__,
        "timestamp": stamp,
    }


def dumps_report(payload: dict, manifest_: dict) -> str:
    return json.dumps(round_floats({"manifest": manifest_, **payload}), indent=2)


def write_csv(rows, columns, out=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([f"{v:.{SIGNIFICANT_DIGITS}g}" if isinstance(v, float) else v for v in row])
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text)
    return text
