"""Independent reference implementations used as test oracles.

Nothing here imports from adaptive_lab's numeric internals; each oracle is a
straightforward (slow) reimplementation against which the package is checked.
"""

import math
import statistics

import numpy as np
from scipy import integrate


def gauss_solve(a, b):
    """Linear solve by Gaussian elimination with partial pivoting."""
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = a.shape[0]
    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if a[piv, col] == 0.0:
            raise ZeroDivisionError("singular matrix")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        for row in range(col + 1, n):
            factor = a[row, col] / a[col, col]
            a[row, col:] -= factor * a[col, col:]
            b[row] -= factor * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1:] @ x[row + 1:]) / a[row, row]
    return x


def truncated_moment_numeric(c):
    """E[eps^2 1{|eps| > c}] for eps ~ N(0,1) by numeric integration."""
    dens = lambda x: x * x * math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    value, _ = integrate.quad(dens, c, 40.0)
    return 2.0 * value


def one_step_scalar(outcomes, lam_h, lam_alpha, nu=1.0):
    """Closed-form one-step estimate for d=1 with phi == 1."""
    y = np.asarray(outcomes, dtype=np.float64)
    s = 1.0
    s_zy = float(np.mean(y))
    beta = s_zy / (s + lam_h)
    w = nu / (s + lam_alpha)
    correction = w * float(np.mean(y - beta))
    return nu * beta + correction


def recompute_summary(records_csv_text, level):
    """Independent one-pass reduction of records.csv into summary rows.

    Returns a dict keyed by (T, d) with the aggregate fields that do not
    require re-running the KS machinery (those are cross-checked separately).
    """
    lines = records_csv_text.strip().split("\n")
    header = lines[0].split(",")
    idx = {name: i for i, name in enumerate(header)}
    cells = {}
    for line in lines[1:]:
        parts = line.split(",")
        key = (int(parts[idx["T"]]), int(parts[idx["d"]]))
        cells.setdefault(key, []).append(parts)
    out = {}
    for key, rows in cells.items():
        truth = float(rows[0][idx["truth"]])
        ok = [r for r in rows if r[idx["status"]] == "ok"]
        n_failed = len(rows) - len(ok)
        if not ok:
            out[key] = {"n_failed": n_failed}
            continue
        covered = errors = 0
        widths, sq = [], []
        for r in ok:
            lo, hi = float(r[idx["ci_low"]]), float(r[idx["ci_high"]])
            covered += lo <= truth <= hi
            widths.append(hi - lo)
            sq.append((float(r[idx["psi_hat"]]) - truth) ** 2)
        out[key] = {
            "coverage": covered / len(ok),
            "mean_ci_width": statistics.fmean(widths),
            "rmse": math.sqrt(statistics.fmean(sq)),
            "bias": statistics.fmean(
                float(r[idx["psi_hat"]]) - truth for r in ok),
            "n_failed": n_failed,
        }
    return out
