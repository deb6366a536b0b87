"""Undefined-score sentinel shared by all metrics.

Degenerate computations (zero-variance correlations, all-zero maps) return
``UNDEFINED`` instead of a fabricated number; aggregation excludes these
values and surfaces per-cell exclusion counts.
"""

import math

UNDEFINED = math.nan


def is_undefined(value: float) -> bool:
    return isinstance(value, float) and math.isnan(value)
