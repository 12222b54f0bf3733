"""CSV tables with a ``#`` provenance line."""

import csv
import math
from importlib import metadata


def tool_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def provenance_line(command, params):
    """``# cauchy-sketch <version> <command> key=value ...`` with keys in insertion order."""
    parts = [f"{key}={_fmt_param(value)}" for key, value in params.items()]
    return " ".join(["# cauchy-sketch", tool_version(), command, *parts])


def _fmt_param(value):
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt_param(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def write_table(stream, columns, rows, provenance=None):
    """Write an optional provenance comment, a header row and the data rows."""
    if provenance:
        stream.write(provenance.rstrip("\n") + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
