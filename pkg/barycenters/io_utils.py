import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from .core import defaults
from .exceptions import EmptyFile, IngestError, InvalidSpec, NonNumeric, RaggedRows

logger = logging.getLogger(__name__)


def read_json(path):
    """Load a JSON document; malformed JSON is a spec error, a missing file an OSError."""
    path = Path(path)
    with path.open(encoding='utf-8-sig') as handle:
        try:
            return json.load(handle)
        except json.JSONDecodeError as e:
            raise InvalidSpec(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
        except UnicodeDecodeError as e:
            raise InvalidSpec(f"{path}: not UTF-8 text (byte {e.start})") from e


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8') as handle:
        # NaN is not JSON; serializers map it to null before this point
        json.dump(payload, handle, indent=2, allow_nan=False)
        handle.write('\n')
    logger.debug(f"Wrote {path}")
    return path


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow(['' if isinstance(v, float) and math.isnan(v) else v for v in row])
    logger.debug(f"Wrote {path}")
    return path


def read_csv_rows(path):
    """Rows of a CSV file as lists of strings, skipping blank lines. A leading BOM is dropped."""
    path = Path(path)
    with path.open(encoding='utf-8-sig', newline='') as handle:
        try:
            return [(number, row) for number, row in enumerate(csv.reader(handle), start=1) if any(c.strip() for c in row)]
        except UnicodeDecodeError as e:
            raise IngestError(f"{path}: not UTF-8 text (byte {e.start})") from e


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_samples(path):
    """Observations of one measure: rows are observations, columns coordinates.

    A first row without any numeric cell is taken as a header; a partly
    numeric first row is data and fails as such. Returns an (n, q) float array.
    """
    rows = read_csv_rows(path)
    if rows and not any(_is_number(cell.strip()) for cell in rows[0][1]):
        logger.debug(f"{path}: treating first row as header {rows[0][1]}")
        rows = rows[1:]
    if not rows:
        raise EmptyFile(path)

    width = len(rows[0][1])
    data = np.empty((len(rows), width))
    for i, (number, row) in enumerate(rows):
        if len(row) != width:
            raise RaggedRows(path, number, width, len(row))
        for col, cell in enumerate(row, start=1):
            try:
                value = float(cell)
            except ValueError:
                raise NonNumeric(path, number, col, cell) from None
            if not math.isfinite(value):
                raise NonNumeric(path, number, col, cell)
            data[i, col - 1] = value
    return data


def output_dir(out_dir=None, name=None):
    path = Path(defaults('OUTPUT_DIR', out_dir))
    if name:
        path = path / name
    path.mkdir(parents=True, exist_ok=True)
    return path
