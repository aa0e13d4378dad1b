"""Constructive fold-network builders and their size/error audits.

A 2-D fold reflects one half-plane about a line through the origin and
leaves the other half fixed; it is realized exactly by a 4-unit ReLU
block whose 2-output recombination is absorbed into the next layer, so
built networks contain only ReLU layers plus a final linear readout.
Stacking folds with the angle schedule pi/2^(j-1) contracts every point
toward the positive x-axis, which turns the first coordinate into a
norm estimate; a binary tree of such fold stacks handles d dimensions,
and a single-hidden-layer piecewise-linear stage turns the norm into
any Lipschitz radial profile.

Counting conventions used by the audits: layers and neurons count ReLU
layers/units only (linear readouts are absorbable); weights count 8 per
fold block and 1 per piecewise-linear hidden unit.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .network import Layer, Network

SQRT2 = math.sqrt(2.0)


# -- 2-D fold ----------------------------------------------------------


@dataclass
class FoldSpec:
    """Unit direction vector (lx, ly) of the fold line through the origin."""

    lx: float
    ly: float

    def __post_init__(self):
        norm2 = self.lx * self.lx + self.ly * self.ly
        if abs(norm2 - 1.0) > 1e-12:
            raise ValueError(f"fold direction must be a unit vector, |l|^2 = {norm2}")


def _fold_hidden_block(lx, ly):
    # rows: x-, x+, y-, y+; exactly one of each +/- pair is active
    return np.array([
        [-ly, lx],
        [ly, -lx],
        [-lx, -ly],
        [lx, ly],
    ])


def _fold_recomb_block(lx, ly):
    # x' = ly(x- + x+) - lx y- + lx y+ ; y' = -lx(x- + x+) - ly y- + ly y+
    return np.array([
        [ly, ly, -lx, lx],
        [-lx, -lx, -ly, ly],
    ])


def make_fold_layer(spec):
    """Two-layer network (4 ReLU units + linear recombination) for one fold."""
    hidden = Layer(_fold_hidden_block(spec.lx, spec.ly), np.zeros(4), "relu")
    recomb = Layer(_fold_recomb_block(spec.lx, spec.ly), np.zeros(2), "linear")
    net = Network([hidden, recomb])
    net.build_info = {"builder": "fold_layer", "l": (spec.lx, spec.ly)}
    return net


def _fold_direction(j):
    """Direction for the j-th fold layer (1-based): angle pi / 2^(j-1)."""
    if j == 1:
        return -1.0, 0.0
    if j == 2:
        return 0.0, 1.0
    theta = math.pi / 2.0 ** (j - 1)
    return math.cos(theta), math.sin(theta)


def fold_layer_count(radius, delta1):
    """Fold layers needed for sup error <= delta1 on the disk of given radius.

    ceil(log2(radius*pi/delta1)) plus, for coarse targets (delta1 close to
    the radius), extra layers until the exact sector-error formula
    radius*(1 - cos(pi/2^(f-1))) is within delta1.
    """
    f = max(1, math.ceil(math.log2(radius * math.pi / delta1) - 1e-12))
    while radius * (1.0 - math.cos(math.pi / 2.0 ** (f - 1))) > delta1:
        f += 1
    return f


# -- incremental chain builder ----------------------------------------


class _ChainBuilder:
    """Builds a layered net while absorbing pending linear recombinations.

    ``pending`` maps the last ReLU layer's outputs to the current logical
    channels; each new ReLU layer multiplies its logical weights by the
    pending map, so no explicit linear layers appear mid-chain.
    """

    def __init__(self, in_dim, pad_to=None):
        self.layers = []
        width = pad_to if pad_to is not None else in_dim
        self.pending = np.eye(width, in_dim)

    @property
    def n_channels(self):
        return self.pending.shape[0]

    def add_relu(self, logical_weights, biases):
        self.layers.append(Layer(logical_weights @ self.pending, biases, "relu"))
        self.pending = np.eye(logical_weights.shape[0])

    def absorb(self, linear_map):
        self.pending = linear_map @ self.pending

    def finish(self, readout=None, bias=None):
        if readout is None:
            readout = np.eye(self.n_channels)
        out = np.atleast_2d(readout) @ self.pending
        b = np.zeros(out.shape[0]) if bias is None else np.atleast_1d(np.asarray(bias, float))
        self.layers.append(Layer(out, b, "linear"))
        return Network(self.layers)


def _stage_fold_schedule(n_layers):
    return [_fold_direction(j) for j in range(1, n_layers + 1)]


def _add_fold_stage(builder, n_pairs, n_layers):
    """Append one fold sequence acting on n_pairs coordinate pairs."""
    for lx, ly in _stage_fold_schedule(n_layers):
        hidden = np.kron(np.eye(n_pairs), _fold_hidden_block(lx, ly))
        builder.add_relu(hidden, np.zeros(4 * n_pairs))
        builder.absorb(np.kron(np.eye(n_pairs), _fold_recomb_block(lx, ly)))
    # keep only each pair's x' channel (the norm estimate)
    selector = np.zeros((n_pairs, 2 * n_pairs))
    selector[np.arange(n_pairs), 2 * np.arange(n_pairs)] = 1.0
    builder.absorb(selector)


def _amplification(n_stages):
    """Accumulated error factor: sum of sqrt(2)^k for k < n_stages."""
    return (SQRT2 ** n_stages - 1.0) / (SQRT2 - 1.0)


def _norm_tree_plan(d, R, delta):
    """Per-stage error split and layer counts for the d-dim norm tree.

    The per-stage error delta1 solves delta = amplification(m) * delta1,
    inverting the recurrence delta_{i+1} = sqrt(2) delta_i + delta1.
    Stage i sees pair norms up to R + sqrt(2) * (accumulated error), so
    its layer count uses that enlarged radius.
    """
    d_pad = 1 << max(1, (d - 1)).bit_length()
    m = d_pad.bit_length() - 1
    delta1 = delta * (SQRT2 - 1.0) / (SQRT2 ** m - 1.0)
    stage_layers = []
    for i in range(1, m + 1):
        radius_i = R + SQRT2 * _amplification(i - 1) * delta1
        stage_layers.append(fold_layer_count(radius_i, delta1))
    return d_pad, m, delta1, stage_layers


def _build_norm_chain(d, R, delta):
    """Fold-tree chain for ||x|| plus its build metadata (readout pending)."""
    d_pad, m, delta1, stage_layers = _norm_tree_plan(d, R, delta)
    builder = _ChainBuilder(d, pad_to=d_pad)
    neurons = 0
    for i, f_i in enumerate(stage_layers, start=1):
        n_pairs = d_pad >> i
        _add_fold_stage(builder, n_pairs, f_i)
        neurons += 4 * n_pairs * f_i
    f_max = max(stage_layers)
    info = {
        "d": d,
        "d_pad": d_pad,
        "R": R,
        "delta": delta,
        "delta1": delta1,
        "n_stages": m,
        "stage_layers": stage_layers,
        "amplification_factor": _amplification(m),
        "layers_built": sum(stage_layers),
        "layers_bound": m * f_max,
        "neurons_built": neurons,
        "neurons_bound": 4 * (d_pad - 1) * f_max,
        "weights_built": 2 * neurons,
        "weights_bound": 8 * (d_pad - 1) * f_max,
        # one fold stack per stage (the pair blocks within a stage are copies)
        "distinct_weights_built": 8 * sum(stage_layers),
        "distinct_weights_bound": 8 * m * f_max,
        "error_bound": delta,
        "derivation": (
            "delta1 = delta*(sqrt2-1)/(sqrt2^m-1) from the error recurrence "
            "delta_{i+1} = sqrt2*delta_i + delta1; per-stage layers "
            "ceil(log2(R_i*pi/delta1)) with R_i = R + sqrt2*amp(i-1)*delta1"
        ),
    }
    return builder, info


def build_norm2(R, delta):
    """Fold network approximating ||x|| on the 2-D disk of radius R.

    Stacks ceil(log2(R*pi/delta)) fold layers with directions at angles
    pi/2^(j-1), then reads out the first coordinate; sup error over
    ||x|| <= R is at most delta.
    """
    _validate_norm_args(2, R, delta)
    builder, info = _build_norm_chain(2, R, delta)
    net = builder.finish(readout=np.array([[1.0]]))
    info["builder"] = "norm2"
    net.build_info = info
    return net


def build_normd(d, R, delta):
    """Fold-tree network approximating ||x|| on the d-dim ball of radius R.

    Pairs of coordinates are folded to their 2-norms, then the results are
    paired again, log2(d) stages in total; d is zero-padded to the next
    power of two.  Sup error over ||x|| <= R is at most delta.
    """
    _validate_norm_args(d, R, delta)
    builder, info = _build_norm_chain(d, R, delta)
    net = builder.finish(readout=np.array([[1.0]]))
    info["builder"] = "normd"
    net.build_info = info
    return net


def _validate_norm_args(d, R, delta):
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise ValueError(f"d must be an integer >= 2, got {d}")
    if R <= 0:
        raise ValueError(f"R must be positive, got {R}")
    if delta <= 0 or delta >= R:
        raise ValueError(f"delta must lie in (0, R); got delta={delta}, R={R}")


# -- piecewise-linear 1-D approximators --------------------------------


def _pwl_interpolant_coeffs(func, lo, hi, lipschitz, delta):
    """ReLU expansion a + sum alpha_i relu(x - beta_i) interpolating func.

    Uniform knots with spacing 2*delta/L keep the interpolant within delta
    of an L-Lipschitz func on [lo, hi]; the expansion is constant outside.
    Falls back to a single constant when that already meets the target.
    """
    width = hi - lo
    if lipschitz * width <= 2.0 * delta or width == 0.0:
        samples = func(np.linspace(lo, hi, 101)) if width > 0 else np.atleast_1d(func(lo))
        if not np.all(np.isfinite(samples)):
            raise ValueError("profile values must be finite on its support")
        a = 0.5 * (float(np.max(samples)) + float(np.min(samples)))
        return a, np.zeros(0), np.zeros(0)
    n = max(1, math.ceil(width * lipschitz / (2.0 * delta) - 1e-12))
    knots = np.linspace(lo, hi, n + 1)
    vals = np.asarray(func(knots), dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise ValueError("profile values must be finite on its support")
    slopes = np.diff(vals) / np.diff(knots)
    alphas = np.empty(n + 1)
    alphas[0] = slopes[0]
    alphas[1:n] = np.diff(slopes)
    alphas[n] = -slopes[-1]
    return float(vals[0]), alphas, knots


def _sqrt_warped_coeffs(func, R, lipschitz, delta):
    """ReLU expansion of t -> func(sqrt(max(t,0))) on [0, R^2].

    Knots at the squares of a uniform radius grid with spacing delta/L, so
    each knot interval maps to a radius interval where func varies by at
    most delta; the expansion is constant outside [0, R^2].
    """
    if lipschitz * R <= 2.0 * delta or R == 0.0:
        r = np.linspace(0.0, max(R, 1.0), 101)
        samples = func(r if R > 0 else np.zeros(1))
        if not np.all(np.isfinite(samples)):
            raise ValueError("profile values must be finite on its support")
        a = 0.5 * (float(np.max(samples)) + float(np.min(samples)))
        return a, np.zeros(0), np.zeros(0)
    n = max(1, math.ceil(R * lipschitz / delta - 1e-12))
    radii = np.linspace(0.0, R, n + 1)
    knots = radii * radii
    vals = np.asarray(func(radii), dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise ValueError("profile values must be finite on its support")
    slopes = np.diff(vals) / np.diff(knots)
    alphas = np.empty(n + 1)
    alphas[0] = slopes[0]
    alphas[1:n] = np.diff(slopes)
    alphas[n] = -slopes[-1]
    return float(vals[0]), alphas, knots


def build_lipschitz1d(profile, delta):
    """Single-hidden-layer net h(x) = a + sum alpha_i relu(x - beta_i).

    h interpolates the profile at uniformly spaced knots on [0, support_R]
    and is constant outside; sup error <= delta, hidden width
    w <= 3*support_R*L/delta, and every |alpha_i| <= 2L.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not profile.is_compact:
        raise ValueError(
            "profile has unbounded support; fit a compact surrogate first "
            "(fit_wendland_to_gaussian)"
        )
    R, L = profile.support_R, profile.lipschitz_L
    a, alphas, betas = _pwl_interpolant_coeffs(profile.value, 0.0, R, L, delta)
    w = alphas.size
    budget = 3.0 * R * L / delta
    if w > budget:
        raise AssertionError(f"knot budget exceeded: w={w} > 3RL/delta={budget}")
    hidden = Layer(np.ones((w, 1)), -betas, "relu")
    readout = Layer(alphas[None, :], np.array([a]), "linear")
    net = Network([hidden, readout])
    net.build_info = {
        "builder": "lipschitz1d",
        "profile": profile,
        "R": R,
        "L": L,
        "delta": delta,
        "layers_built": 1,
        "layers_bound": 1,
        "neurons_built": w,
        "neurons_bound": budget,
        "weights_built": w,
        "weights_bound": budget,
        "distinct_weights_built": w,
        "distinct_weights_bound": budget,
        "error_bound": delta,
        "derivation": "uniform knots, spacing 2*delta/L, interpolation at knots",
    }
    return net


def build_radial_net(profile, d, delta):
    """Deep net approximating profile(||x||) on the ball of radius support_R.

    A fold tree estimates the norm to sqrt(delta), and a piecewise-linear
    hidden layer applies the profile to delta, for a total sup error below
    L*sqrt(delta) + delta.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not profile.is_compact:
        raise ValueError(
            "profile has unbounded support; fit a compact surrogate first "
            "(fit_wendland_to_gaussian)"
        )
    R, L = profile.support_R, profile.lipschitz_L
    delta_norm = math.sqrt(delta)
    if delta_norm >= R:
        raise ValueError(
            f"sqrt(delta)={delta_norm:.4g} must be below the support radius {R:.4g}"
        )
    builder, info = _build_norm_chain(d, R, delta_norm)
    a, alphas, betas = _pwl_interpolant_coeffs(profile.value, 0.0, R, L, delta)
    w = alphas.size
    budget = 3.0 * R * L / delta
    if w > budget:
        raise AssertionError(f"knot budget exceeded: w={w} > 3RL/delta={budget}")
    # the pending map holds the norm readout row; feed it into every knot unit
    builder.add_relu(np.ones((w, 1)), -betas)
    net = builder.finish(readout=alphas[None, :], bias=np.array([a]))
    error_bound = L * delta_norm + delta
    info.update({
        "builder": "radial",
        "profile": profile,
        "delta": delta,
        "delta_norm": delta_norm,
        "L": L,
        "profile_width": w,
        "layers_built": info["layers_built"] + 1,
        "layers_bound": info["layers_bound"] + 1,
        "neurons_built": info["neurons_built"] + w,
        "neurons_bound": info["neurons_bound"] + budget,
        "weights_built": info["weights_built"] + w,
        "weights_bound": info["weights_bound"] + budget,
        "distinct_weights_built": info["distinct_weights_built"] + w,
        "distinct_weights_bound": info["distinct_weights_bound"] + budget,
        "error_bound": error_bound,
        "derivation": info["derivation"] + "; norm target sqrt(delta), profile target delta",
    })
    net.build_info = info
    return net


def build_3layer_radial(profile, d, delta):
    """Shallow baseline: hidden squares per coordinate, hidden profile stage.

    Layer 2 approximates min(x_i^2, R^2) per coordinate to delta/d (each is
    2R-Lipschitz), layer 3 sums them and applies profile(sqrt(.)); the total
    width stays within (6 d^2 R^2 + 3 R L)/delta and the sup error below
    delta + L*sqrt(delta).
    """
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ValueError(f"d must be an integer >= 1, got {d}")
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not profile.is_compact:
        raise ValueError(
            "profile has unbounded support; fit a compact surrogate first "
            "(fit_wendland_to_gaussian)"
        )
    R, L = profile.support_R, profile.lipschitz_L

    def clipped_square(x):
        x = np.asarray(x, dtype=np.float64)
        return np.minimum(x * x, R * R)

    a_sq, alpha_sq, beta_sq = _pwl_interpolant_coeffs(
        clipped_square, -R, R, 2.0 * R, delta / d)
    w1 = alpha_sq.size
    a_f, alpha_f, beta_f = _sqrt_warped_coeffs(profile.value, R, L, delta)
    w3 = alpha_f.size

    # hidden 1: for every coordinate, the square block's knot units
    weights1 = np.kron(np.eye(d), np.ones((w1, 1)))
    biases1 = np.tile(-beta_sq, d)
    # hidden 2: sum of per-coordinate squares, then profile knot units
    sum_row = np.tile(alpha_sq, d)
    weights2 = np.repeat(sum_row[None, :], w3, axis=0)
    biases2 = (d * a_sq) - beta_f
    readout = Layer(alpha_f[None, :], np.array([a_f]), "linear")
    net = Network([
        Layer(weights1, biases1, "relu"),
        Layer(weights2, biases2, "relu"),
        readout,
    ])
    width_bound = (6.0 * d * d * R * R + 3.0 * R * L) / delta
    if w1 * d + w3 > width_bound:
        raise AssertionError(
            f"width budget exceeded: {w1 * d + w3} > (6d^2R^2+3RL)/delta={width_bound}")
    net.build_info = {
        "builder": "3layer",
        "profile": profile,
        "d": d,
        "R": R,
        "L": L,
        "delta": delta,
        "square_width": w1,
        "profile_width": w3,
        "layers_built": 2,
        "layers_bound": 2,
        "neurons_built": w1 * d + w3,
        "neurons_bound": width_bound,
        # weights counted as in the weight-sharing corollary: one square
        # block plus the profile stage
        "weights_built": w1 + w3,
        "weights_bound": (6.0 * d * R * R + 3.0 * R * L) / delta,
        "distinct_weights_built": w1 + w3,
        "distinct_weights_bound": (6.0 * d * R * R + 3.0 * R * L) / delta,
        "error_bound": delta + L * math.sqrt(delta),
        "derivation": (
            "per-coordinate squares to delta/d (2R-Lipschitz), profile of the "
            "summed squares via knots at squared radii with spacing delta/L"
        ),
    }
    return net


def radial_count_bounds(profile, d, delta):
    """Size bounds of build_radial_net evaluated without constructing it."""
    R, L = profile.support_R, profile.lipschitz_L
    delta_norm = math.sqrt(delta)
    d_pad, m, delta1, stage_layers = _norm_tree_plan(d, R, delta_norm)
    f_max = max(stage_layers)
    w_bound = 3.0 * R * L / delta
    return {
        "layers_bound": m * f_max + 1,
        "neurons_bound": 4 * (d_pad - 1) * f_max + w_bound,
        "weights_bound": 8 * (d_pad - 1) * f_max + w_bound,
        "error_bound": L * delta_norm + delta,
        "delta1": delta1,
        "stage_layers": stage_layers,
    }


def three_layer_width_bound(profile, d, delta):
    """Width budget of the 3-layer construction: (6 d^2 R^2 + 3 R L)/delta."""
    R, L = profile.support_R, profile.lipschitz_L
    return (6.0 * d * d * R * R + 3.0 * R * L) / delta


# -- audits ------------------------------------------------------------


@dataclass
class BoundReport:
    """Built counts vs contracted bounds plus a measured sup error."""

    builder: str
    d: int
    R: float
    delta: float
    layers_built: int
    layers_bound: float
    neurons_built: int
    neurons_bound: float
    weights_built: int
    weights_bound: float
    measured_sup_error: float
    delta_target: float
    distinct_weights_built: int = 0
    distinct_weights_bound: float = 0.0
    amplification_factor: float = 1.0
    derivation: str = ""

    CSV_HEADER = ("d,R,delta,layers_built,layers_bound,neurons_built,"
                  "neurons_bound,weights_built,weights_bound,sup_error")

    @property
    def ok(self):
        return (self.layers_built <= self.layers_bound
                and self.neurons_built <= self.neurons_bound
                and self.weights_built <= self.weights_bound
                and self.measured_sup_error <= self.delta_target)

    def to_csv_row(self):
        return (f"{self.d},{self.R!r},{self.delta!r},{self.layers_built},"
                f"{self.layers_bound},{self.neurons_built},{self.neurons_bound},"
                f"{self.weights_built},{self.weights_bound},"
                f"{self.measured_sup_error!r}")


def sample_ball(d, R, n_samples, rng, include_boundary=0):
    """Uniform samples from the d-ball plus optional boundary points."""
    points = rng.standard_normal((n_samples + include_boundary, d))
    norms = np.linalg.norm(points, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    directions = points / norms
    radii = R * rng.random(n_samples) ** (1.0 / d)
    interior = directions[:n_samples] * radii[:, None]
    boundary = directions[n_samples:] * R
    return np.vstack([interior, boundary])


def _audit_points(d, R, n_samples, seed):
    rng = np.random.default_rng(seed)
    pts = sample_ball(d, R, n_samples, rng, include_boundary=max(1000, n_samples // 10))
    axes = np.vstack([np.eye(d) * R, -np.eye(d) * R, np.zeros((1, d))])
    return np.vstack([pts, axes])


def audit_bounds(net, target_delta=None, n_samples=10000, seed=0):
    """Monte-Carlo sup-error and size audit of a builder's network.

    Samples at least n_samples ball points plus boundary and axis points
    (deterministic per seed), evaluates the network against the exact
    norm or profile oracle, and reports built counts next to the bounds
    recorded at build time.
    """
    info = net.build_info
    if not info or "builder" not in info:
        raise ValueError("network carries no build metadata; audit_bounds only "
                         "accepts networks from this module's builders")
    builder = info["builder"]
    if builder in ("norm2", "normd"):
        d, R = info["d"], info["R"]
        oracle = lambda X: np.linalg.norm(X, axis=1)
    elif builder == "radial":
        d, R = info["d"], info["R"]
        profile = info["profile"]
        oracle = lambda X: profile.value(np.linalg.norm(X, axis=1))
    elif builder == "3layer":
        d, R = info["d"], info["R"]
        profile = info["profile"]
        oracle = lambda X: profile.value(np.linalg.norm(X, axis=1))
    elif builder == "lipschitz1d":
        d, R = 1, info["R"]
        profile = info["profile"]
        oracle = lambda X: profile.value(np.abs(X[:, 0]))
    else:
        raise ValueError(f"unknown builder tag {builder!r}")
    if builder == "lipschitz1d":
        rng = np.random.default_rng(seed)
        X = np.concatenate([rng.random(n_samples) * R, [0.0, R]])[:, None]
    else:
        X = _audit_points(d, R, n_samples, seed)
    predicted = net.forward_batch(X)[:, 0]
    sup_error = float(np.max(np.abs(predicted - oracle(X))))
    return BoundReport(
        builder=builder,
        d=d,
        R=R,
        delta=info["delta"],
        layers_built=info["layers_built"],
        layers_bound=info["layers_bound"],
        neurons_built=info["neurons_built"],
        neurons_bound=info["neurons_bound"],
        weights_built=info["weights_built"],
        weights_bound=info["weights_bound"],
        measured_sup_error=sup_error,
        delta_target=target_delta if target_delta is not None else info["error_bound"],
        distinct_weights_built=info.get("distinct_weights_built", 0),
        distinct_weights_bound=info.get("distinct_weights_bound", 0.0),
        amplification_factor=info.get("amplification_factor", 1.0),
        derivation=info.get("derivation", ""),
    )


def bound_reports_to_csv(reports):
    out = io.StringIO()
    out.write("builder," + BoundReport.CSV_HEADER + "\n")
    for rep in reports:
        out.write(f"{rep.builder},{rep.to_csv_row()}\n")
    return out.getvalue()
