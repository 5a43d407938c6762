"""Diagnostics CSV schema, writer, and validating reader."""

import numpy as np

CSV_COLUMNS = ("step", "t", "energy", "mom_x", "mom_y", "ang_mom",
               "div_norm", "l2_err", "h1_err", "slack")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_diagnostics_csv(path, records):
    """Write records in the fixed 10-column schema, full precision."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(_fmt(v) for v in rec.csv_row()) + "\n")


def read_diagnostics_csv(path):
    """Parse a diagnostics CSV; rejects any schema drift.

    Returns a dict of numpy arrays keyed by column name.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        cols = tuple(header.split(","))
        if cols != CSV_COLUMNS:
            raise ValueError(
                f"unexpected diagnostics schema {cols!r}; "
                f"expected {CSV_COLUMNS!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if any(len(r) != len(CSV_COLUMNS) for r in rows):
        raise ValueError("ragged diagnostics CSV")
    data = np.array([[float(v) for v in r] for r in rows]) \
        if rows else np.zeros((0, len(CSV_COLUMNS)))
    return {name: data[:, k] for k, name in enumerate(CSV_COLUMNS)}
