"""Radial kernel profiles: the Gaussian and its compact-support surrogate.

A profile is a 1-D function of the radius with a known Lipschitz constant
and a support radius beyond which it is constant.  Compactness is required
before a profile can be turned into a fold network, so the module also
fits the Wendland Q_{3,1} polynomial to a Gaussian of given width.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class RadialProfile:
    """r -> value(r) with Lipschitz constant and support radius.

    ``value`` accepts scalars or numpy arrays of radii (r >= 0) and must be
    constant for r >= support_R.  support_R is math.inf for non-compact
    profiles, which the fold builders reject.
    """

    value: callable
    support_R: float
    lipschitz_L: float
    kind: str = "tabulated"
    params: dict = field(default_factory=dict)

    @property
    def is_compact(self):
        return math.isfinite(self.support_R)

    def __call__(self, r):
        return self.value(r)


def gaussian_profile(gamma):
    """exp(-gamma r^2); non-compact, must be fitted before fold building."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    g = float(gamma)

    def value(r):
        r = np.asarray(r, dtype=np.float64)
        return np.exp(-g * r * r)

    # max |d/dr exp(-g r^2)| attained at r = 1/sqrt(2g)
    lipschitz = math.sqrt(2.0 * g) * math.exp(-0.5)
    return RadialProfile(value, math.inf, lipschitz, "gaussian", {"gamma": g})


def _wendland_value(r, R):
    r = np.asarray(r, dtype=np.float64)
    u = np.clip(r / R, 0.0, 1.0)
    return (1.0 - u) ** 4 * (4.0 * u + 1.0)


def _max_abs_slope(value, lo, hi, coarse=20001):
    """Numeric maximization of |value'| on [lo, hi]: grid bracket + dense rescan."""
    grid = np.linspace(lo, hi, coarse)
    h = (hi - lo) / (coarse - 1)
    inner = grid[1:-1]
    slopes = np.abs(value(inner + h) - value(inner - h)) / (2.0 * h)
    k = int(np.argmax(slopes))
    a, b = inner[max(k - 2, 0)], inner[min(k + 2, inner.size - 1)]
    step = 1e-6 * (hi - lo)
    fine = np.linspace(a, b, 4001)
    fine_slopes = np.abs(value(fine + step) - value(fine - step)) / (2.0 * step)
    return float(np.max(fine_slopes))


def wendland_q31(support_R):
    """Wendland Q_{3,1}: (1 - r/R)^4 (4 r/R + 1) inside [0, R), 0 beyond."""
    if support_R <= 0:
        raise ValueError(f"support_R must be positive, got {support_R}")
    R = float(support_R)

    def value(r):
        return _wendland_value(r, R)

    lipschitz = _max_abs_slope(value, 0.0, R)
    return RadialProfile(value, R, lipschitz, "wendland_q31", {"support_R": R})


def truncate_profile(profile, R):
    """Clamp a profile to be constant beyond radius R (value of f(R))."""
    if R <= 0:
        raise ValueError(f"truncation radius must be positive, got {R}")
    inner = profile.value

    def value(r):
        r = np.asarray(r, dtype=np.float64)
        return inner(np.minimum(r, R))

    return RadialProfile(value, float(R), profile.lipschitz_L, "tabulated",
                         {"truncated_from": profile.kind, "support_R": float(R)})


def wendland_gaussian_sup_distance(gamma, support_R, n_grid=4001):
    """sup over r >= 0 of |wendland(support_R)(r) - exp(-gamma r^2)|."""
    scale = 1.0 / math.sqrt(gamma)
    r = np.linspace(0.0, 6.5 * scale, n_grid)
    gauss = np.exp(-gamma * r * r)
    return float(np.max(np.abs(_wendland_value(r, support_R) - gauss)))


def fit_wendland_to_gaussian(gamma):
    """Support radius minimizing the sup distance to exp(-gamma r^2).

    1-D grid search on [0.5, 6]/sqrt(gamma) with golden-section refinement
    to 1e-3 relative resolution; fully deterministic.  The search grid is
    expressed in units of 1/sqrt(gamma), so the result obeys the scaling
    law R*(gamma) = R*(1)/sqrt(gamma) up to grid resolution.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    scale = 1.0 / math.sqrt(gamma)
    r = np.linspace(0.0, 6.5 * scale, 4001)
    gauss = np.exp(-gamma * r * r)

    def objective(R):
        return float(np.max(np.abs(_wendland_value(r, R) - gauss)))

    candidates = np.linspace(0.5 * scale, 6.0 * scale, 221)
    errs = [objective(R) for R in candidates]
    k = int(np.argmin(errs))
    a = candidates[max(k - 1, 0)]
    b = candidates[min(k + 1, len(candidates) - 1)]
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = objective(c), objective(d)
    while (b - a) > 1e-3 * scale * 1e-1:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = objective(d)
    return 0.5 * (a + b)


# -- serialization ----------------------------------------------------
# Schema: {"kind": "gaussian|wendland_q31", "gamma": ..., "support_R": ...,
#          "lipschitz_L": ...}


def emit_profile_json(profile):
    if profile.kind == "gaussian":
        doc = {"kind": "gaussian", "gamma": profile.params["gamma"],
               "support_R": None, "lipschitz_L": profile.lipschitz_L}
    elif profile.kind == "wendland_q31":
        doc = {"kind": "wendland_q31", "gamma": None,
               "support_R": profile.support_R, "lipschitz_L": profile.lipschitz_L}
    else:
        raise ValueError(f"profile kind {profile.kind!r} has no JSON form")
    return json.dumps(doc)


def parse_profile_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"profile JSON: line {exc.lineno}: {exc.msg}") from exc
    kind = doc.get("kind")
    if kind == "gaussian":
        if doc.get("gamma") is None:
            raise ValueError("profile JSON: field 'gamma' required for gaussian")
        return gaussian_profile(doc["gamma"])
    if kind == "wendland_q31":
        if doc.get("support_R") is None:
            raise ValueError("profile JSON: field 'support_R' required for wendland_q31")
        return wendland_q31(doc["support_R"])
    raise ValueError(f"profile JSON: unknown kind {kind!r}")
