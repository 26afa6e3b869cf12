# audit/artifacts.py
"""Reading inputs and writing phase outputs.

JSON outputs are canonical (sorted keys, two-space indent, trailing newline)
so identical inputs always produce byte-identical files.
"""
import hashlib
import json
import logging
from pathlib import Path

import pandas as pd

from .exceptions import ConfigError
from .serializers import flatten_errors

logger = logging.getLogger(__name__)


def dumps(data):
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data), encoding='utf-8')
    logger.debug("wrote %s", path)
    return path


def write_csv(path, rows, columns):
    """Rows (list of dicts or tuples) -> CSV with exactly `columns`, in order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=columns)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


def read_json(path, field=None):
    path = Path(path)
    try:
        with path.open(encoding='utf-8') as handle:
            return json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", field=field)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON ({exc.msg}, line {exc.lineno})", field=field)


def validate(serializer_class, data, field=None, many=False, context=None):
    """Run a DRF serializer over `data`; raise ConfigError naming the bad fields."""
    serializer = serializer_class(data=data, many=many, context=context or {})
    if not serializer.is_valid():
        raise ConfigError("; ".join(flatten_errors(serializer.errors, field or '')) or "invalid data")
    return serializer.validated_data


def load_validated(path, serializer_class, field=None, many=False):
    return validate(serializer_class, read_json(path, field=field), field=field, many=many)


def file_digest(path):
    digest = hashlib.sha256()
    with Path(path).open('rb') as handle:
        for block in iter(lambda: handle.read(65536), b''):
            digest.update(block)
    return digest.hexdigest()
