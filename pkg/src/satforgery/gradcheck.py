"""Finite-difference verification of analytic gradients.

Works against any scalar objective expressed over a named parameter dict:
``loss_fn(params) -> (loss, grads)``. All arithmetic is done at 64-bit
precision regardless of the precision the caller trains at.
"""

from dataclasses import dataclass

import numpy as np

FD_STEP = 1e-5
SAMPLES_PER_PARAM = 100


@dataclass
class GradCheckReport:
    max_rel_error: dict      # parameter name -> max relative error over sampled entries
    tolerance: float
    passed: bool

    @property
    def worst(self):
        return max(self.max_rel_error.values()) if self.max_rel_error else 0.0

    def summary(self):
        lines = [f"{name}: {err:.3e}" for name, err in sorted(self.max_rel_error.items())]
        lines.append(f"worst {self.worst:.3e} vs tolerance {self.tolerance:.1e} "
                     f"-> {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _rel_error(a, n):
    return abs(a - n) / max(abs(a), abs(n), 1e-8)


def grad_check(loss_fn, params, tolerance=1e-4, step=FD_STEP,
               samples_per_param=SAMPLES_PER_PARAM, seed=0):
    """Compare analytic gradients against central finite differences.

    A random subsample of up to `samples_per_param` entries is probed per
    parameter array. Raises on a non-finite loss.
    """
    params64 = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    loss, grads = loss_fn(params64)
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite loss {loss}")
    rng = np.random.default_rng(seed)
    errors = {}
    for name, p in params64.items():
        g = np.asarray(grads[name], dtype=np.float64)
        idx = np.arange(p.size)
        if p.size > samples_per_param:
            idx = rng.choice(p.size, size=samples_per_param, replace=False)
        worst = 0.0
        flat = p.reshape(-1)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + step
            lp, _ = loss_fn(params64)
            flat[i] = orig - step
            lm, _ = loss_fn(params64)
            flat[i] = orig
            numeric = (lp - lm) / (2 * step)
            worst = max(worst, _rel_error(g.reshape(-1)[i], numeric))
        errors[name] = worst
    passed = all(e <= tolerance for e in errors.values())
    return GradCheckReport(max_rel_error=errors, tolerance=tolerance, passed=passed)
