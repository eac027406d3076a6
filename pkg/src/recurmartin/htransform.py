"""Conditioning a recurrent chain to drift toward one boundary point.

A recurrent chain returns to its base state forever, so its trajectories
cannot converge to a boundary point. Damping every departure from the base
by a factor r in (0,1) and tilting each step by the boundary visit-ratio
kernel produces a genuine transient probability chain whose trajectories do
converge to the chosen point. The tilt is

    psi(x) = (1/beta(x0)) * (r/(1-r) + L_{x0}(x, alpha) * 1_{x != x0}),

with beta the stationary measure and L the boundary kernel, and the
transformed rows are q_{x,y} = (psi(y)/psi(x)) p_{x,y}, additionally scaled
by r on the row at the base. Rows sum to exactly 1: off the base this is
harmonicity of the kernel, at the base it is the balance
E_{x0}[L(X_1, alpha)] = 1.

The module provides the weight and the transformed chain in exact rational
arithmetic, a pathwise check of the change-of-measure identity, the ratio
kernel of the transformed chain both in closed form and through the
damped-visit linear system, the correspondence between harmonic profiles of
the killed parent and harmonic functions of the transform, and vectorized
ensemble witnesses of boundary convergence and transience.

The planar walk is special: its single boundary point has kernel equal to
the potential kernel a(x), which is not rational, so no exact-Fraction
transformed chain exists. Its row-sum identity is still verified exactly in
pi-rational arithmetic (``verify_row_sums``) and its convergence witness
runs in floating point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .chains import ChainSpec, StateId, enumerate_paths
from .errors import PreconditionViolationError, RowSumViolationError
from .examplechains import (
    ROOT,
    BangBangWalk,
    HalfLineEnd,
    KaryTree,
    LineEnd,
    TreeRay,
    Z2Walk,
    ZWalk,
    exact_martin_boundary,
)
from .green import (
    Truncation,
    default_radius,
    green_solve_discounted,
    martin_kernel,
    state_norm,
)
from .rng import trajectory_generator

_BOUNDARY_TYPES = (LineEnd, HalfLineEnd, TreeRay)

#: Simulation ratio tables are exact below this index and constant above it
#: (the ratios converge geometrically, far past float resolution by then).
_TABLE_CUTOFF = 64

#: Stream tags separating the random draws of the two ensemble witnesses.
_CONVERGENCE_TAG = 0
_TRANSIENCE_TAG = 1


# ---------------------------------------------------------------------------
# Parameters and weight


@dataclass(frozen=True)
class TransformParams:
    """Conditioning data: base state, target boundary point, damping.

    ``r`` scales every departure from the base state, so smaller values
    make the conditioned chain abandon the base region sooner. ``alpha``
    is one of the parent chain's boundary points; the planar walk's single
    boundary point is anonymous, encoded as ``None``.
    """

    x0: StateId
    alpha: object
    r: Fraction = Fraction(1, 2)

    def __post_init__(self):
        r = Fraction(self.r)
        object.__setattr__(self, "r", r)
        if not (0 < r < 1):
            raise ValueError("damping must satisfy 0 < r < 1")

    @property
    def odds(self) -> Fraction:
        """r/(1-r), the weight of the damping term inside psi."""
        return self.r / (1 - self.r)


def psi_weight(chain: ChainSpec, params: TransformParams, x: StateId) -> Fraction:
    """Tilting weight psi(x); positive, and r/((1-r) beta(x0)) at the base."""
    beta0 = chain.stationary(params.x0)
    if x == params.x0:
        return params.odds / beta0
    ell = exact_martin_boundary(chain, params.x0, x, params.alpha)
    return (params.odds + ell) / beta0


# ---------------------------------------------------------------------------
# The transformed chain


class TransformedChain(ChainSpec):
    """A recurrent chain tilted toward a boundary point, made transient.

    Rows are q_{x,y} = (psi(y)/psi(x)) p_{x,y}, with the whole row at the
    base state scaled by r. Structural hooks (ordering, formatting,
    parsing, windows, separation) delegate to the parent, so solvers,
    enumeration, and simulation accept the transformed chain unchanged.
    Every produced row is validated to sum to exactly 1; a violation would
    mean the boundary kernel is not harmonic off the base or its one-step
    balance at the base is not 1.
    """

    #: Outside excursions of the conditioned chain need not re-enter where
    #: they left (they may escape for good), so frontier loops are not exact.
    loop_truncation_exact = False

    def __init__(self, parent: ChainSpec, params: TransformParams):
        self.parent = parent
        self.params = params
        self.name = f"{parent.name}-to-{params.alpha}:r={params.r}"
        self._psi: dict = {}

    def weight(self, x: StateId) -> Fraction:
        """Cached psi(x) of the parent chain."""
        w = self._psi.get(x)
        if w is None:
            w = psi_weight(self.parent, self.params, x)
            self._psi[x] = w
        return w

    @property
    def base_point(self) -> StateId:
        return self.params.x0

    def _row_scale(self, x: StateId) -> Fraction:
        return self.params.r if x == self.params.x0 else Fraction(1)

    def successors(self, x: StateId):
        scale = self._row_scale(x) / self.weight(x)
        moves = [
            (y, scale * p * self.weight(y)) for y, p in self.parent.successors(x)
        ]
        total = sum((p for _, p in moves), Fraction(0))
        if total != 1:
            raise RowSumViolationError(
                f"transformed row at {self.parent.format_state(x)} sums to {total}"
            )
        return moves

    def predecessors(self, y: StateId):
        preds = self.parent.predecessors(y)
        if preds is None:
            return None
        wy = self.weight(y)
        return [
            (x, self._row_scale(x) * p * wy / self.weight(x)) for x, p in preds
        ]

    def state_key(self, x: StateId):
        return self.parent.state_key(x)

    def format_state(self, x: StateId) -> str:
        return self.parent.format_state(x)

    def parse_state(self, text: str) -> StateId:
        return self.parent.parse_state(text)

    def window(self, radius: int):
        return self.parent.window(radius)

    def separating(self, y, x, x0) -> bool:
        # the tilt never creates or removes transitions
        return self.parent.separating(y, x, x0)


def transformed_chain(chain: ChainSpec, params: TransformParams) -> TransformedChain:
    """Build the conditioned chain with exact rational rows."""
    if isinstance(chain, Z2Walk):
        raise NotImplementedError(
            "the planar walk's tilting weight r/(1-r) + a(x) is not rational, "
            "so its conditioned rows cannot be exact fractions; use "
            "verify_row_sums for the exact row identity and convergence_stats "
            "for the floating-point witness"
        )
    return TransformedChain(chain, params)


# ---------------------------------------------------------------------------
# Row-sum identity


@dataclass
class RowSumReport:
    """Outcome of the exact row-sum identity over a window."""

    chain: str
    r: Fraction
    radius: int
    checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return not self.violations


def verify_row_sums(
    chain: ChainSpec, params: TransformParams, radius: int
) -> RowSumReport:
    """Check r^{1_{x=x0}} * sum_y p_{x,y} psi(y) == psi(x) on a window.

    Exact Fraction arithmetic on chains with rational boundary kernels;
    exact pi-rational arithmetic on the planar walk, whose weight is
    r/(1-r) + a(x) with a the potential kernel. The computation here never
    goes through ``TransformedChain`` rows, so it cross-checks their
    construction-time validation.
    """
    if isinstance(chain, Z2Walk):
        return _plane_row_sums(chain, params, radius)
    report = RowSumReport(chain.name, params.r, radius)
    cache: dict = {}

    def psi(s):
        w = cache.get(s)
        if w is None:
            w = psi_weight(chain, params, s)
            cache[s] = w
        return w

    for x in chain.window(radius):
        scale = params.r if x == params.x0 else Fraction(1)
        total = scale * sum(
            (p * psi(y) for y, p in chain.successors(x)), Fraction(0)
        )
        report.checked += 1
        if total != psi(x):
            report.violations.append(
                (chain.format_state(x), f"{total} != {psi(x)}")
            )
    return report


def _plane_row_sums(chain, params, radius):
    from .potential import potential_table

    table = potential_table(radius + 1)
    odds = params.odds
    report = RowSumReport(chain.name, params.r, radius)
    base = chain.base_point
    for x in chain.window(radius):
        acc = None
        for y, p in chain.successors(x):
            term = (odds + table.value(y)) * p
            acc = term if acc is None else acc + term
        if x == base:
            acc = acc * params.r
        report.checked += 1
        if acc != odds + table.value(x):
            report.violations.append(
                (chain.format_state(x), "row identity failed")
            )
    return report


# ---------------------------------------------------------------------------
# Change-of-measure identity, checked pathwise


@dataclass
class RnIdentityReport:
    """Pathwise comparison of the two ways to weight a finite path.

    For every positive-probability length-n path w from x, the product of
    transformed rows must equal the parent path probability times
    (psi(w_n)/psi(x)) r^{#visits of w_0..w_{n-1} to the base}, exactly.
    """

    chain: str
    start: str
    n: int
    r: Fraction
    paths_checked: int = 0
    mismatches: int = 0
    max_discrepancy: Fraction = Fraction(0)

    @property
    def exact(self) -> bool:
        return self.paths_checked > 0 and self.mismatches == 0


def rn_identity_check(
    chain: ChainSpec,
    params: TransformParams,
    x: StateId,
    n: int,
    budget: int = 200_000,
) -> RnIdentityReport:
    """Compare transformed path probabilities against reweighted parent ones.

    The left side multiplies row entries of the constructed transformed
    chain step by step; the right side reweights the parent probability
    directly and never touches the constructed rows.
    """
    transformed = transformed_chain(chain, params)
    report = RnIdentityReport(chain.name, chain.format_state(x), n, params.r)
    px = transformed.weight(x)
    for pw in enumerate_paths(chain, x, n, budget=budget):
        states = pw.states
        lhs = Fraction(1)
        for a, b in zip(states, states[1:]):
            lhs *= _row_probability(transformed, a, b)
        visits = sum(1 for s in states[:-1] if s == params.x0)
        rhs = (
            pw.probability
            * transformed.weight(states[-1])
            / px
            * params.r**visits
        )
        report.paths_checked += 1
        gap = abs(lhs - rhs)
        if gap:
            report.mismatches += 1
            if gap > report.max_discrepancy:
                report.max_discrepancy = gap
    return report


def _row_probability(chain: ChainSpec, a: StateId, b: StateId) -> Fraction:
    for y, p in chain.successors(a):
        if y == b:
            return p
    return Fraction(0)


# ---------------------------------------------------------------------------
# Ratio kernel of the transformed chain


def k_kernel(
    chain: ChainSpec,
    params: TransformParams,
    x: StateId,
    target,
    radius: Optional[int] = None,
) -> Fraction:
    """Ratio kernel of the transformed chain, in closed form.

    K(x, y) = (psi(x0)/psi(x)) (1 + ((1-r)/r) L_{x0}(x, y) 1_{x != x0});
    a boundary target uses the kernel's closed-form extension. At the
    conditioning point itself the value is identically 1 — the constant
    function is the transform's minimal harmonic function.
    """
    x0 = params.x0
    if x == x0:
        return Fraction(1)
    ratio = psi_weight(chain, params, x0) / psi_weight(chain, params, x)
    if isinstance(target, _BOUNDARY_TYPES):
        ell = exact_martin_boundary(chain, x0, x, target)
    elif target == x0:
        # the killed chain never reaches the base from elsewhere
        ell = Fraction(0)
    else:
        if radius is None:
            radius = _solve_radius(chain, [x0, x, target])
        ell = martin_kernel(
            chain, x0, x, target, method="exact", radius=radius, exact=True
        ).value
    return ratio * (1 + ell / params.odds)


def transformed_green(
    chain: ChainSpec,
    params: TransformParams,
    x: StateId,
    y: StateId,
    radius: Optional[int] = None,
    exact: bool = True,
):
    """Green function of the transformed chain, sum over all path lengths.

    Evaluated through the parent chain: a length-n path from x to y carries
    transformed probability (psi(y)/psi(x)) r^{base visits before n} times
    its parent probability, so the transient Green function equals
    (psi(y)/psi(x)) W_r(x, y) with W_r the damped-visit kernel of
    ``green_solve_discounted``. Exact on chains with loop-exact windows.
    """
    if radius is None:
        radius = _solve_radius(chain, [params.x0, x, y])
    w = green_solve_discounted(
        chain, params.x0, params.r, [(x, y)], Truncation(radius), exact=exact
    )[0]
    scale = psi_weight(chain, params, y) / psi_weight(chain, params, x)
    return w * scale if exact else w * float(scale)


def k_kernel_numeric(
    chain: ChainSpec,
    params: TransformParams,
    x: StateId,
    y: StateId,
    radius: Optional[int] = None,
    exact: bool = True,
):
    """Ratio of transformed Green values, via the damped-visit linear system.

    Computes G(x,y)/G(x0,y) of the transformed chain without the ratio
    kernel's closed form: only the tilting weight and the linear solve of
    the damped-visit system enter, giving an independent route to compare
    ``k_kernel`` against.
    """
    if radius is None:
        radius = _solve_radius(chain, [params.x0, x, y])
    wx, w0 = green_solve_discounted(
        chain,
        params.x0,
        params.r,
        [(x, y), (params.x0, y)],
        Truncation(radius),
        exact=exact,
    )
    ratio = psi_weight(chain, params, params.x0) / psi_weight(chain, params, x)
    return ratio * wx / w0 if exact else float(ratio) * wx / w0


def _solve_radius(chain: ChainSpec, states: Sequence[StateId]) -> int:
    top = max(state_norm(chain, s) for s in states)
    if isinstance(chain, KaryTree):
        # tree windows grow exponentially with depth; any containing
        # radius is already exact under frontier loops
        return top + 2
    return default_radius(chain, states)


# ---------------------------------------------------------------------------
# Correspondence between parent profiles and transformed harmonic functions


def r_map(
    chain: ChainSpec,
    params: TransformParams,
    phi,
    radius: Optional[int] = None,
) -> Callable:
    """Carry a harmonic profile of the killed parent to a function that is
    harmonic for the transformed chain at every state:

        (phi(x) + (r/(1-r)) E_{x0}[phi(X_1)]) / psi(x).

    ``phi`` must vanish at the base and be harmonic off it; both are
    validated on ``window(radius)`` and failures raise
    ``PreconditionViolationError`` listing the offending states.
    """
    get = phi.evaluate if hasattr(phi, "evaluate") else phi
    radius = _check_radius(chain, radius)
    transformed = transformed_chain(chain, params)
    x0 = params.x0
    violations = []
    base_value = get(x0)
    if base_value != 0:
        violations.append(
            (chain.format_state(x0), f"value {base_value} at the base, expected 0")
        )
    for x in chain.window(radius):
        if x == x0:
            continue
        avg = sum((p * get(y) for y, p in chain.successors(x)), Fraction(0))
        if avg != get(x):
            violations.append(
                (chain.format_state(x), f"one-step average {avg} != {get(x)}")
            )
    if violations:
        raise PreconditionViolationError("profile precondition failed", violations)
    balance = sum((p * get(y) for y, p in chain.successors(x0)), Fraction(0))
    shift = params.odds * balance

    def mapped(x):
        return (get(x) + shift) / transformed.weight(x)

    return mapped


def r_map_inverse(
    chain: ChainSpec,
    params: TransformParams,
    h,
    radius: Optional[int] = None,
) -> Callable:
    """Inverse correspondence, from transformed-harmonic functions back to
    profiles of the killed parent:

        psi(x) h(x) - r E_{x0}[psi(X_1) h(X_1)].

    ``h`` must be harmonic for the transformed chain at every window state
    (the base row included); failures raise ``PreconditionViolationError``.
    The output vanishes at the base and is harmonic off it.
    """
    get = h.evaluate if hasattr(h, "evaluate") else h
    radius = _check_radius(chain, radius)
    transformed = transformed_chain(chain, params)
    violations = []
    for x in chain.window(radius):
        avg = sum((q * get(y) for y, q in transformed.successors(x)), Fraction(0))
        if avg != get(x):
            violations.append(
                (chain.format_state(x), f"one-step average {avg} != {get(x)}")
            )
    if violations:
        raise PreconditionViolationError(
            "transformed-harmonicity precondition failed", violations
        )
    x0 = params.x0
    drop = params.r * sum(
        (p * transformed.weight(y) * get(y) for y, p in chain.successors(x0)),
        Fraction(0),
    )

    def mapped(x):
        return transformed.weight(x) * get(x) - drop

    return mapped


def _check_radius(chain: ChainSpec, radius: Optional[int]) -> int:
    if radius is not None:
        return radius
    return 7 if isinstance(chain, KaryTree) else 25


# ---------------------------------------------------------------------------
# Ensemble witnesses


@dataclass
class ConvergenceReport:
    """Ensemble statistics of a boundary-convergence witness.

    ``snapshots`` maps a time to the quartiles of the witness statistic and
    the fraction of trajectories whose statistic exceeds the threshold at
    that time.
    """

    chain: str
    alpha: str
    r: Fraction
    trajectories: int
    steps: int
    seed: int
    witness: str
    threshold: float
    fraction_above: float
    final_median: float
    snapshots: dict

    def as_dict(self) -> dict:
        return {
            "chain": self.chain,
            "alpha": self.alpha,
            "r": str(self.r),
            "trajectories": self.trajectories,
            "steps": self.steps,
            "seed": self.seed,
            "witness": self.witness,
            "threshold": self.threshold,
            "fraction_above": self.fraction_above,
            "final_median": self.final_median,
            "snapshots": {str(k): v for k, v in sorted(self.snapshots.items())},
        }


@dataclass
class TransienceReport:
    """Base-return statistics of the transformed chain (soft evidence of
    transience: returns stop early relative to the horizon)."""

    chain: str
    alpha: str
    r: Fraction
    trajectories: int
    steps: int
    seed: int
    mean_returns: float
    max_returns: int
    max_last_return: int
    fraction_settled_by_half: float

    def as_dict(self) -> dict:
        return {
            "chain": self.chain,
            "alpha": self.alpha,
            "r": str(self.r),
            "trajectories": self.trajectories,
            "steps": self.steps,
            "seed": self.seed,
            "mean_returns": self.mean_returns,
            "max_returns": self.max_returns,
            "max_last_return": self.max_last_return,
            "fraction_settled_by_half": self.fraction_settled_by_half,
        }


_DEFAULT_THRESHOLDS = {"line": 50.0, "halfline": 100.0, "tree": 10.0, "plane": 10.0}


def convergence_stats(
    chain: ChainSpec,
    params: TransformParams,
    trajectories: int,
    steps: int,
    seed: int,
    threshold: Optional[float] = None,
    snapshots: Sequence[int] = (100, 1000, 10000),
) -> ConvergenceReport:
    """Ensemble witness that transformed trajectories approach the target.

    The witness statistic is chain-specific: signed position toward the
    chosen end on the line, position on the half line, agreement length
    with the target ray on the tree, Euclidean norm on the plane. All
    trajectories start at the base state. Snapshots record quartiles and
    threshold exceedance at intermediate times; draws come from one
    counter-based stream per call, so results are reproducible for a seed.
    """
    if trajectories < 1 or steps < 1:
        raise ValueError("trajectories and steps must be positive")
    marks = sorted({int(s) for s in snapshots if 0 < int(s) < steps} | {steps})
    lane, witness, kind = _witness_lane(chain, params)
    stats = lane(chain, params, trajectories, steps, seed, marks, None)
    thr = float(_DEFAULT_THRESHOLDS[kind] if threshold is None else threshold)
    snaps = {}
    for m in marks:
        arr = stats[m]
        q25, q50, q75 = np.percentile(arr, [25.0, 50.0, 75.0])
        snaps[m] = {
            "q25": float(q25),
            "median": float(q50),
            "q75": float(q75),
            "fraction_above": float(np.mean(arr > thr)),
        }
    final = stats[steps]
    return ConvergenceReport(
        chain=chain.name,
        alpha=_alpha_label(params),
        r=params.r,
        trajectories=trajectories,
        steps=steps,
        seed=seed,
        witness=witness,
        threshold=thr,
        fraction_above=float(np.mean(final > thr)),
        final_median=float(np.median(final)),
        snapshots=snaps,
    )


def transience_witness(
    chain: ChainSpec,
    params: TransformParams,
    trajectories: int = 10**4,
    steps: int = 10**4,
    seed: int = 0,
) -> TransienceReport:
    """Track returns to the base state under the transformed chain.

    Reports the sample mean and maximum of the return counts, the latest
    return time seen, and the fraction of trajectories whose last base
    visit happened in the first half of the horizon. Soft evidence only:
    a recurrent chain would keep returning all the way to the horizon.
    """
    if trajectories < 1 or steps < 1:
        raise ValueError("trajectories and steps must be positive")
    lane, _, _ = _witness_lane(chain, params)
    track: dict = {}
    lane(chain, params, trajectories, steps, seed, [steps], track)
    counts = track["counts"]
    last = track["last"]
    return TransienceReport(
        chain=chain.name,
        alpha=_alpha_label(params),
        r=params.r,
        trajectories=trajectories,
        steps=steps,
        seed=seed,
        mean_returns=float(counts.mean()),
        max_returns=int(counts.max()),
        max_last_return=int(last.max()),
        fraction_settled_by_half=float(np.mean(last <= steps // 2)),
    )


def _alpha_label(params: TransformParams) -> str:
    return "point" if params.alpha is None else str(params.alpha)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def _witness_lane(chain: ChainSpec, params: TransformParams):
    if isinstance(chain, ZWalk):
        _require(params.x0 == 0, "the line witness is anchored at base 0")
        _require(
            isinstance(params.alpha, LineEnd),
            "the line witness needs a line-end target",
        )
        return _line_lane, "signed position toward the target end", "line"
    if isinstance(chain, BangBangWalk):
        _require(params.x0 == 0, "the half-line witness is anchored at base 0")
        _require(
            isinstance(params.alpha, HalfLineEnd),
            "the half-line witness needs the half-line end",
        )
        return _halfline_lane, "position on the half line", "halfline"
    if isinstance(chain, KaryTree):
        _require(params.x0 == ROOT, "the tree witness is anchored at the root")
        _require(
            isinstance(params.alpha, TreeRay),
            "the tree witness needs a ray target",
        )
        return _tree_lane, "agreement length with the target ray", "tree"
    if isinstance(chain, Z2Walk):
        _require(params.x0 == (0, 0), "the plane witness is anchored at the origin")
        _require(
            params.alpha is None,
            "the plane has a single anonymous boundary point; pass alpha=None",
        )
        return _plane_lane, "euclidean norm of the position", "plane"
    raise NotImplementedError(f"no witness lane for chain {chain.name!r}")


def _track_hits(track, at_base, step):
    if track is not None:
        track["counts"] += at_base
        track["last"][at_base] = step


def _init_track(track, n):
    if track is not None:
        track["counts"] = np.zeros(n, dtype=np.int64)
        track["last"] = np.zeros(n, dtype=np.int64)


def _line_lane(chain, params, n, steps, seed, marks, track):
    """Conditioned line walk, in coordinates pointing at the target end.

    Up-probability (c + 2v + 2) / (2(c + 2v)) above the base, (2 - r)/2 at
    it, and 1/2 on the far side, with c = r/(1-r); these are the exact row
    entries of the transformed chain, evaluated in floating point.
    """
    c = float(params.odds)
    r = float(params.r)
    at_base = (2.0 - r) / 2.0
    tag = _CONVERGENCE_TAG if track is None else _TRANSIENCE_TAG
    gen = trajectory_generator(seed, tag)
    v = np.zeros(n, dtype=np.int64)
    _init_track(track, n)
    markset = set(marks)
    out = {}
    for step in range(1, steps + 1):
        u = gen.random(n)
        up = np.full(n, 0.5)
        up[v == 0] = at_base
        pos = v >= 1
        if pos.any():
            vp = v[pos].astype(np.float64)
            up[pos] = (c + 2.0 * vp + 2.0) / (2.0 * (c + 2.0 * vp))
        v += np.where(u < up, 1, -1).astype(np.int64)
        _track_hits(track, v == 0, step)
        if step in markset:
            out[step] = v.astype(np.float64)
    return out


def _halfline_lane(chain, params, n, steps, seed, marks, track):
    """Conditioned half-line walk; the reflecting base forces an up-step."""
    cut = _TABLE_CUTOFF
    psi = [psi_weight(chain, params, x) for x in range(cut + 2)]
    table = np.empty(cut + 1)
    table[0] = 1.0
    for x in range(1, cut + 1):
        table[x] = float(chain.q * psi[x + 1] / psi[x])
    tail = float(1 - chain.q)
    tag = _CONVERGENCE_TAG if track is None else _TRANSIENCE_TAG
    gen = trajectory_generator(seed, tag)
    pos = np.zeros(n, dtype=np.int64)
    _init_track(track, n)
    markset = set(marks)
    out = {}
    for step in range(1, steps + 1):
        u = gen.random(n)
        up = np.where(pos <= cut, table[np.minimum(pos, cut)], tail)
        pos += np.where(u < up, 1, -1).astype(np.int64)
        _track_hits(track, pos == 0, step)
        if step in markset:
            out[step] = pos.astype(np.float64)
    return out


def _tree_lane(chain, params, n, steps, seed, marks, track):
    """Conditioned tree walk, projected to (agreement j, overhang m).

    The weight depends only on the agreement length with the target ray,
    so the pair (j, m) — m the depth below the last ray node — is itself a
    Markov chain: on the ray, step to the father with probability
    psi_{j-1}/(2 psi_j), to the next ray node with psi_{j+1}/(2k psi_j),
    and off the ray with (k-1)/(2k); off the ray all weight ratios are 1,
    leaving the symmetric up/down move of the parent.
    """
    k = chain.k
    gamma = params.odds * Fraction(k - 1, k)
    cut = _TABLE_CUTOFF
    psi = [gamma + k**j - 1 for j in range(cut + 2)]
    up_t = np.zeros(cut + 1)
    adv_t = np.zeros(cut + 1)
    for j in range(1, cut + 1):
        up_t[j] = float(Fraction(1, 2) * psi[j - 1] / psi[j])
        adv_t[j] = float(Fraction(1, 2 * k) * psi[j + 1] / psi[j])
    up_deep = 1.0 / (2 * k)
    adv_deep = 0.5
    root_adv = float(params.r / k + (1 - params.r))
    tag = _CONVERGENCE_TAG if track is None else _TRANSIENCE_TAG
    gen = trajectory_generator(seed, tag)
    agreement = np.zeros(n, dtype=np.int64)
    overhang = np.zeros(n, dtype=np.int64)
    _init_track(track, n)
    markset = set(marks)
    out = {}
    for step in range(1, steps + 1):
        u = gen.random(n)
        on_ray = overhang == 0
        off = np.nonzero(~on_ray)[0]
        root = np.nonzero(on_ray & (agreement == 0))[0]
        deep = np.nonzero(on_ray & (agreement >= 1))[0]
        if off.size:
            step_up = u[off] < 0.5
            overhang[off[step_up]] -= 1
            overhang[off[~step_up]] += 1
        if root.size:
            onto_ray = u[root] < root_adv
            agreement[root[onto_ray]] = 1
            overhang[root[~onto_ray]] = 1
        if deep.size:
            jj = agreement[deep]
            clamped = np.minimum(jj, cut)
            upj = np.where(jj <= cut, up_t[clamped], up_deep)
            advj = np.where(jj <= cut, adv_t[clamped], adv_deep)
            uu = u[deep]
            go_up = uu < upj
            go_adv = ~go_up & (uu < upj + advj)
            go_off = ~(go_up | go_adv)
            agreement[deep[go_up]] -= 1
            agreement[deep[go_adv]] += 1
            overhang[deep[go_off]] = 1
        _track_hits(track, (agreement == 0) & (overhang == 0), step)
        if step in markset:
            out[step] = agreement.astype(np.float64)
    return out


def _plane_lane(chain, params, n, steps, seed, marks, track):
    """Conditioned planar walk; neighbor weights are c + a(neighbor).

    Values of the potential kernel come from the exact table inside its
    radius and from the logarithmic asymptote outside (relative error below
    1e-4 there); each row is renormalized, which also absorbs the damping
    factor at the origin.
    """
    from .potential import potential_float_array

    cut = _TABLE_CUTOFF
    tbl = potential_float_array(cut)
    kappa = (2.0 * np.euler_gamma + np.log(8.0)) / np.pi
    c = float(params.odds)

    def weights(ix, iy):
        ax = np.abs(ix)
        ay = np.abs(iy)
        vals = np.empty(ax.shape)
        inside = (ax <= cut) & (ay <= cut)
        vals[inside] = tbl[ax[inside], ay[inside]]
        far = ~inside
        if far.any():
            norm2 = (ax[far] ** 2 + ay[far] ** 2).astype(np.float64)
            vals[far] = np.log(norm2) / np.pi + kappa
        return c + vals

    tag = _CONVERGENCE_TAG if track is None else _TRANSIENCE_TAG
    gen = trajectory_generator(seed, tag)
    px = np.zeros(n, dtype=np.int64)
    py = np.zeros(n, dtype=np.int64)
    _init_track(track, n)
    markset = set(marks)
    out = {}
    for step in range(1, steps + 1):
        w_e = weights(px + 1, py)
        w_w = weights(px - 1, py)
        w_n = weights(px, py + 1)
        w_s = weights(px, py - 1)
        u = gen.random(n) * (w_e + w_w + w_n + w_s)
        east = u < w_e
        west = ~east & (u < w_e + w_w)
        north = ~east & ~west & (u < w_e + w_w + w_n)
        south = ~(east | west | north)
        px += east.astype(np.int64) - west.astype(np.int64)
        py += north.astype(np.int64) - south.astype(np.int64)
        _track_hits(track, (px == 0) & (py == 0), step)
        if step in markset:
            out[step] = np.sqrt(
                px.astype(np.float64) ** 2 + py.astype(np.float64) ** 2
            )
    return out
