"""Small data builders shared by several test modules."""
import datetime as dt

import numpy as np

from moonvol.signals import DailySignalRow

START = dt.date(2021, 1, 4)


def random_rows(rng, n=40, noise_only=False):
    """Signal rows with a weak lagged dependence (or none)."""
    cols = {k: rng.normal(size=n) for k in ("moon1", "moon2", "yolo1", "yolo2", "m", "vix")}
    v = rng.normal(size=n)
    if not noise_only:
        v[1:] += 0.5 * cols["moon1"][:-1] - 0.2 * cols["moon2"][:-1] + 0.3 * v[:-1]
    cols["moon2"] = np.abs(np.tanh(cols["moon2"]))
    return [
        DailySignalRow(START + dt.timedelta(days=i), float(v[i]), **{k: float(c[i]) for k, c in cols.items()})
        for i in range(n)
    ]
