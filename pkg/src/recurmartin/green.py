"""Killed Green functions and visit-ratio (Martin) kernels.

The central object is G_{x0}(x, y): the expected number of visits to y,
counting time 0, strictly before the first return to the base state x0.
Three routes are provided:

* ``green_solve`` — linear solve of the killed one-step system on a finite
  window, in exact rational or floating arithmetic;
* ``green_mc`` / ``green_mc_grid`` — direct simulation until the return to
  the base state, with vectorized fast lanes for the built-in chains;
* ``martin_kernel`` — the ratio G_{x0}(x,y) / G_{x0}(x0,y).

Window truncation policies:

``kill``
    Transitions exiting the window are dropped. Values are certified lower
    bounds of the infinite-space quantity and are monotone nondecreasing
    under window enlargement.
``loop``
    Exiting transitions are redirected into a self-loop at the frontier
    state. For chains where every outside excursion re-enters at the state
    it left through (the line, the half line, trees — flagged by
    ``ChainSpec.loop_truncation_exact``), every excursion is reproduced
    step-for-step at the frontier, so windowed values equal the
    infinite-space values exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .chains import ChainSpec, StateId
from .errors import (
    RunawayRunError,
    SingularSystemError,
    ZeroDenominatorError,
)
from .examplechains import ROOT, BangBangWalk, KaryTree, Z2Walk, ZWalk
from .rng import trajectory_generator

#: Exact solves above this window size are refused (cubic Fraction cost).
EXACT_SOLVE_LIMIT = 1200
#: Dense float factorization below this size, sparse LU above.
DENSE_LIMIT = 2000

DEFAULT_STEP_CAP = 10_000_000


@dataclass(frozen=True)
class Truncation:
    """Finite-window policy for solving on an infinite state space."""

    radius: int
    policy: str = "loop"
    margin: int = 0

    def __post_init__(self):
        if self.policy not in ("loop", "kill"):
            raise ValueError("policy must be 'loop' or 'kill'")
        if self.radius < 1 or self.margin < 0:
            raise ValueError("radius must be >= 1 and margin >= 0")


@dataclass
class GreenResult:
    """A Green-function (or kernel-ratio) value with its provenance."""

    value: object  # float, or Fraction from the exact lane
    method: str  # "exact-solve" | "monte-carlo" | "closed-form"
    stderr: float = 0.0
    radius: Optional[int] = None
    policy: Optional[str] = None
    delta: Optional[float] = None  # window-enlargement diagnostic
    runs: Optional[int] = None
    truncated_runs: int = 0
    note: Optional[str] = None

    def __float__(self) -> float:
        return float(self.value)


# ---------------------------------------------------------------------------
# Window linear systems


def window_rows(
    chain: ChainSpec,
    window: Sequence[StateId],
    *,
    kill_into: Optional[StateId] = None,
    row_scale: Optional[dict] = None,
    policy: str = "loop",
) -> tuple[dict, list]:
    """Substochastic transition rows restricted to a window.

    Transitions into ``kill_into`` are deleted; transitions leaving the
    window are deleted (``kill``) or folded into a self-loop (``loop``).
    ``row_scale`` multiplies the entire outgoing row of selected states.
    Returns (state index map, rows as lists of (column, probability)).
    """
    index = {s: i for i, s in enumerate(window)}
    rows = []
    for s in window:
        scale = Fraction(1) if row_scale is None else row_scale.get(s, Fraction(1))
        entries: dict = {}
        escaped = Fraction(0)
        for t, p in chain.successors(s):
            if kill_into is not None and t == kill_into:
                continue
            j = index.get(t)
            if j is None:
                escaped += p
            else:
                entries[j] = entries.get(j, Fraction(0)) + p
        if policy == "loop" and escaped:
            i = index[s]
            entries[i] = entries.get(i, Fraction(0)) + escaped
        if scale != 1:
            entries = {j: scale * p for j, p in entries.items()}
        rows.append(sorted(entries.items()))
    return index, rows


def _solve_columns_fraction(rows: list, columns: list[int]) -> list[list[Fraction]]:
    """Solve (I - M) g = e_c for each column c, exactly."""
    n = len(rows)
    if n > EXACT_SOLVE_LIMIT:
        raise ValueError(
            f"window of {n} states is too large for the exact lane "
            f"(limit {EXACT_SOLVE_LIMIT}); use the floating solver"
        )
    a = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        a[i][i] = Fraction(1)
        for j, p in rows[i]:
            a[i][j] -= p
    b = [[Fraction(0)] * len(columns) for _ in range(n)]
    for c_ix, c in enumerate(columns):
        b[c][c_ix] = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            raise SingularSystemError("window system has no pivot; window unusable")
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            b[col], b[pivot] = b[pivot], b[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        b[col] = [v * inv for v in b[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                arow, acol = a[r], a[col]
                a[r] = [arow[j] - f * acol[j] for j in range(n)]
                brow, bcol = b[r], b[col]
                b[r] = [brow[j] - f * bcol[j] for j in range(len(columns))]
    return [[b[r][c_ix] for r in range(n)] for c_ix in range(len(columns))]


def _solve_columns_float(rows: list, columns: list[int]) -> list[np.ndarray]:
    """Float counterpart of the exact column solve (dense or sparse LU)."""
    n = len(rows)
    rhs = np.zeros((n, len(columns)))
    for c_ix, c in enumerate(columns):
        rhs[c, c_ix] = 1.0
    if n < DENSE_LIMIT:
        a = np.eye(n)
        for i in range(n):
            for j, p in rows[i]:
                a[i, j] -= float(p)
        try:
            sol = np.linalg.solve(a, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(str(exc)) from exc
    else:
        from scipy.sparse import csc_matrix
        from scipy.sparse.linalg import splu

        data, ri, ci = [], [], []
        for i in range(n):
            data.append(1.0)
            ri.append(i)
            ci.append(i)
            for j, p in rows[i]:
                data.append(-float(p))
                ri.append(i)
                ci.append(j)
        a = csc_matrix((data, (ri, ci)), shape=(n, n))
        try:
            sol = splu(a.tocsc()).solve(rhs)
        except RuntimeError as exc:
            raise SingularSystemError(str(exc)) from exc
    return [sol[:, c_ix] for c_ix in range(len(columns))]


def _killed_column_values(chain, x0, window, ys, policy, exact):
    """g_y vectors over the window for each y, with transitions into x0 killed."""
    index, rows = window_rows(chain, window, kill_into=x0, policy=policy)
    cols = [index[y] for y in ys]
    if exact:
        vecs = _solve_columns_fraction(rows, cols)
    else:
        vecs = _solve_columns_float(rows, cols)
    return index, {y: vec for y, vec in zip(ys, vecs)}


def green_solve(
    chain: ChainSpec,
    x0: StateId,
    queries: Sequence[tuple],
    trunc: Truncation,
    exact: bool = False,
) -> list[GreenResult]:
    """Windowed linear solve of G_{x0}(x, y) for each (x, y) query.

    With the ``loop`` policy the result is exact (up to float roundoff in
    the floating lane) on chains flagged ``loop_truncation_exact``; with
    ``kill`` it is a certified lower bound, nondecreasing in the radius.
    A positive ``trunc.margin`` re-solves on an enlarged window and reports
    the difference as ``delta``.
    """
    window = chain.window(trunc.radius)
    present = set(window)
    missing = [s for s in {x0} | {s for q in queries for s in q} if s not in present]
    if missing:
        names = ", ".join(chain.format_state(s) for s in missing)
        raise ValueError(f"states outside the radius-{trunc.radius} window: {names}")
    ys = sorted({y for _, y in queries}, key=chain.state_key)
    index, col = _killed_column_values(chain, x0, window, ys, trunc.policy, exact)
    deltas = None
    if trunc.margin > 0:
        big = chain.window(trunc.radius + trunc.margin)
        bindex, bcol = _killed_column_values(chain, x0, big, ys, trunc.policy, exact)
        deltas = {
            (x, y): float(bcol[y][bindex[x]] - col[y][index[x]]) for x, y in queries
        }
    results = []
    for x, y in queries:
        v = col[y][index[x]]
        if not exact:
            v = max(float(v), 0.0)
        results.append(
            GreenResult(
                value=v,
                method="exact-solve",
                stderr=0.0,
                radius=trunc.radius,
                policy=trunc.policy,
                delta=None if deltas is None else deltas[(x, y)],
            )
        )
    return results


def green_value(
    chain: ChainSpec,
    x0: StateId,
    x: StateId,
    y: StateId,
    radius: Optional[int] = None,
    policy: str = "loop",
    exact: bool = False,
    margin: int = 0,
) -> GreenResult:
    """Single-query convenience wrapper around green_solve."""
    if radius is None:
        radius = default_radius(chain, [x0, x, y])
    trunc = Truncation(radius=radius, policy=policy, margin=margin)
    return green_solve(chain, x0, [(x, y)], trunc, exact=exact)[0]


def green_solve_discounted(
    chain: ChainSpec,
    x0: StateId,
    r: Fraction,
    queries: Sequence[tuple],
    trunc: Truncation,
    exact: bool = True,
) -> list:
    """Visit counts with every departure from x0 discounted by r.

    Solves (I - M) w = e_y where M is the one-step kernel with the row at
    x0 scaled by r. The value w_y(x) is the expected total number of visits
    to y weighted by r^(number of departures from x0 so far); it is finite
    for 0 < r < 1 because each return to x0 geometrically damps the mass.
    Used to evaluate transient-chain Green functions through their
    recurrent parent (the weight transfers by a change of measure).
    """
    if not (0 < r < 1):
        raise ValueError("discount must satisfy 0 < r < 1")
    window = chain.window(trunc.radius)
    present = set(window)
    missing = [s for s in {x0} | {s for q in queries for s in q} if s not in present]
    if missing:
        raise ValueError("query states outside window")
    index, rows = window_rows(
        chain, window, row_scale={x0: Fraction(r)}, policy=trunc.policy
    )
    ys = sorted({y for _, y in queries}, key=chain.state_key)
    cols = [index[y] for y in ys]
    vecs = (
        _solve_columns_fraction(rows, cols)
        if exact
        else _solve_columns_float(rows, cols)
    )
    col = {y: vec for y, vec in zip(ys, vecs)}
    return [col[y][index[x]] for x, y in queries]


def state_norm(chain: ChainSpec, s: StateId) -> int:
    """Distance scale of a state: |x| on lines, depth on trees, sup norm on grids."""
    if isinstance(s, tuple):
        if s and all(isinstance(c, int) for c in s) and isinstance(chain, Z2Walk):
            return max(abs(c) for c in s)
        return len(s)
    return abs(int(s))


def default_radius(chain: ChainSpec, states: Sequence[StateId]) -> int:
    """A window radius comfortably containing the given states."""
    base = max((state_norm(chain, s) for s in states), default=0)
    return base + 20


# ---------------------------------------------------------------------------
# Martin kernel


def martin_kernel(
    chain: ChainSpec,
    x0: StateId,
    x: StateId,
    y: StateId,
    method: str = "exact",
    radius: Optional[int] = None,
    policy: str = "loop",
    exact: bool = True,
    trajectories: int = 10**4,
    seed: Optional[int] = None,
    step_cap: int = DEFAULT_STEP_CAP,
    on_cap: str = "error",
) -> GreenResult:
    """Visit ratio L_{x0}(x, y) = G_{x0}(x, y) / G_{x0}(x0, y)."""
    if method == "exact":
        if radius is None:
            radius = default_radius(chain, [x0, x, y])
        trunc = Truncation(radius=radius, policy=policy)
        window = chain.window(trunc.radius)
        present = set(window)
        for s in (x0, x, y):
            if s not in present:
                raise ValueError(
                    f"state {chain.format_state(s)} outside the radius-{radius} window"
                )
        index, col = _killed_column_values(
            chain, x0, window, [y], trunc.policy, exact
        )
        num = col[y][index[x]]
        den = col[y][index[x0]]
        if (den == 0) if exact else (abs(float(den)) <= 1e-12):
            raise ZeroDenominatorError(
                f"G(x0, y) vanished for y={chain.format_state(y)}; ratio undefined"
            )
        value = num / den if exact else float(num) / float(den)
        return GreenResult(value=value, method="exact-solve", radius=radius, policy=policy)
    if method == "mc":
        if seed is None:
            raise ValueError("Monte Carlo kernel needs a seed")
        num = green_mc(
            chain, x0, x, y, trajectories, seed,
            step_cap=step_cap, on_cap=on_cap, index_offset=0,
        )
        den = green_mc(
            chain, x0, x0, y, trajectories, seed,
            step_cap=step_cap, on_cap=on_cap, index_offset=trajectories,
        )
        d = float(den.value)
        if abs(d) <= 1e-12:
            raise ZeroDenominatorError("Monte Carlo denominator below tolerance")
        v = float(num.value) / d
        rel = 0.0
        if float(num.value) != 0:
            rel += (num.stderr / float(num.value)) ** 2
        rel += (den.stderr / d) ** 2
        return GreenResult(
            value=v,
            method="monte-carlo",
            stderr=abs(v) * math.sqrt(rel),
            runs=trajectories,
            truncated_runs=num.truncated_runs + den.truncated_runs,
        )
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Monte Carlo estimators


def green_mc(
    chain: ChainSpec,
    x0: StateId,
    x: StateId,
    y: StateId,
    trajectories: int,
    seed: int,
    step_cap: int = DEFAULT_STEP_CAP,
    on_cap: str = "error",
    index_offset: int = 0,
    escape_radius: Optional[int] = 64,
) -> GreenResult:
    """Sample mean of the visits to y before the first return to x0.

    Each run starts at x, counts a visit at time 0, and stops on arrival
    at x0 at time >= 1 (arrival not counted). A run exceeding ``step_cap``
    raises RunawayRunError when ``on_cap='error'`` or is kept as-is when
    ``on_cap='truncate'`` (the reported value is then a lower-biased
    estimate; the number of truncated runs is reported).

    On the planar walk, runs that leave the ``escape_radius`` box are
    completed analytically through the potential kernel instead of being
    simulated to the (log-tailed) return time; pass ``escape_radius=None``
    to force plain truncation.
    """
    if trajectories < 1:
        raise ValueError("need at least one trajectory")
    if on_cap not in ("error", "truncate"):
        raise ValueError("on_cap must be 'error' or 'truncate'")
    grid = _fast_grid_lane(
        chain, x0, [x], [y], trajectories, seed, step_cap, on_cap,
        index_offset, escape_radius,
    )
    if grid is not None:
        return grid[(x, y)]
    totals = np.empty(trajectories)
    cdf_cache: dict = {}
    truncated = 0
    for i in range(trajectories):
        gen = trajectory_generator(seed, index_offset + i)
        state = x
        visits = 1 if state == y else 0
        steps = 0
        while True:
            state = _cached_step(chain, state, gen.random(), cdf_cache)
            steps += 1
            if state == x0:
                break
            if state == y:
                visits += 1
            if steps >= step_cap:
                if on_cap == "error":
                    raise RunawayRunError(step_cap, i)
                truncated += 1
                break
        totals[i] = visits
    return _mc_result(totals, trajectories, truncated)


def green_mc_grid(
    chain: ChainSpec,
    x0: StateId,
    starts: Sequence[StateId],
    targets: Sequence[StateId],
    trajectories: int,
    seed: int,
    step_cap: int = DEFAULT_STEP_CAP,
    on_cap: str = "truncate",
    escape_radius: Optional[int] = 64,
) -> dict:
    """green_mc over a starts x targets grid, sharing runs per start.

    One trajectory ensemble per start serves every target simultaneously,
    so a runs-per-pair budget costs len(starts) ensembles instead of
    len(starts) * len(targets). Estimates sharing a start are correlated
    across targets but each is individually the green_mc estimator.
    """
    out = {}
    for k, x in enumerate(starts):
        lane = _fast_grid_lane(
            chain, x0, [x], list(targets), trajectories, seed, step_cap,
            on_cap, k * (trajectories + 1), escape_radius,
        )
        if lane is None:
            for t in targets:
                out[(x, t)] = green_mc(
                    chain, x0, x, t, trajectories, seed,
                    step_cap=step_cap, on_cap=on_cap,
                    index_offset=k * (trajectories + 1),
                    escape_radius=escape_radius,
                )
        else:
            out.update(lane)
    return out


def _mc_result(totals, runs, truncated, note=None):
    stderr = float(totals.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    return GreenResult(
        value=float(totals.mean()),
        method="monte-carlo",
        stderr=stderr,
        runs=runs,
        truncated_runs=truncated,
        note=note,
    )


def _cached_step(chain, state, u, cache):
    entry = cache.get(state)
    if entry is None:
        moves = sorted(chain.successors(state), key=lambda sp: chain.state_key(sp[0]))
        cdf = np.cumsum([float(p) for _, p in moves])
        entry = ([t for t, _ in moves], cdf)
        cache[state] = entry
    targets, cdf = entry
    return targets[min(int(np.searchsorted(cdf, u, side="right")), len(targets) - 1)]


def _fast_grid_lane(
    chain, x0, starts, targets, runs, seed, cap, on_cap, tag, escape_radius
):
    """Dispatch to a vectorized ensemble when the chain shape allows it."""
    if runs < 512:
        return None
    if isinstance(chain, ZWalk):
        out = {}
        for k, x in enumerate(starts):
            shifted_targets = [t - x0 for t in targets]
            box, plus, minus = _line_tails(
                chain, x0, x - x0, shifted_targets, targets, escape_radius
            )
            res = _line_ensemble(
                0.5, x - x0, shifted_targets, runs, seed, tag + k, cap, on_cap,
                box, plus, minus,
            )
            for t, r in zip(targets, res):
                out[(x, t)] = r
        return out
    if isinstance(chain, BangBangWalk) and x0 == 0:
        out = {}
        for k, x in enumerate(starts):
            box, plus, minus = _line_tails(
                chain, 0, x, list(targets), list(targets), escape_radius
            )
            res = _line_ensemble(
                float(chain.q), x, list(targets), runs, seed, tag + k, cap, on_cap,
                box, plus, minus,
            )
            for t, r in zip(targets, res):
                out[(x, t)] = r
        return out
    if isinstance(chain, Z2Walk) and x0 == (0, 0):
        out = {}
        for k, x in enumerate(starts):
            res = _plane_ensemble(
                x, list(targets), runs, seed, tag + k, cap, on_cap, escape_radius
            )
            for t, r in zip(targets, res):
                out[(x, t)] = r
        return out
    if isinstance(chain, KaryTree) and x0 == ROOT:
        spine = max(targets, key=len, default=ROOT)
        if any(t != spine[: len(t)] for t in targets):
            return None  # targets must sit on one spine
        out = {}
        for k, x in enumerate(starts):
            res = _tree_ensemble(
                chain, x, spine, [len(t) for t in targets], runs, seed,
                tag + k, cap, on_cap,
            )
            for t, r in zip(targets, res):
                out[(x, t)] = r
        return out
    return None


_SLAB = 10_000
_BLOCK = 512


def _line_tails(chain, x0, start, shifted_targets, targets, escape_radius):
    """Escape box and per-target analytic remainders for line walks.

    Beyond every target (same side), the expected future visits before the
    return to the base no longer depend on the position, so a run exiting
    the box at +-R is finished in expectation by the closed-form Green
    value at the exit point. Nearest-neighbour steps land exactly on +-R.
    """
    if escape_radius is None:
        return None, None, None
    r = max(escape_radius, max(abs(int(start)), max(abs(int(t)) for t in shifted_targets)) + 2)
    plus = np.asarray(
        [float(chain.exact_green(x0 + r, t, base=x0)) for t in targets]
    )
    if isinstance(chain, BangBangWalk):
        minus = np.zeros(len(targets))  # the minus side is unreachable
    else:
        minus = np.asarray(
            [float(chain.exact_green(x0 - r, t, base=x0)) for t in targets]
        )
    return r, plus, minus


def _line_ensemble(
    p_up, start, targets, runs, seed, tag, cap, on_cap,
    escape_radius=None, tail_plus=None, tail_minus=None,
):
    """Nearest-neighbour walk on the integers, absorbed at 0.

    Valid whenever the up-probability is constant away from the absorbing
    state (the forced kick at 0 never fires because arrival at 0 ends the
    run), so both the symmetric and the half-line walks qualify. With an
    escape box, runs leaving it are completed analytically through the
    tail values (removing the heavy-tail truncation bias of null-recurrent
    returns); the half-line walk never reaches the minus side, continuity
    forcing absorption at 0 first.
    """
    gen = trajectory_generator(seed, tag)
    visits = np.zeros((runs, len(targets)))
    truncated = 0
    tarr = np.asarray(targets, dtype=np.int64)
    note = None
    if escape_radius is not None:
        note = f"analytic tail beyond radius {escape_radius}"
    for lo in range(0, runs, _SLAB):
        size = min(_SLAB, runs - lo)
        pos = np.full(size, start, dtype=np.int64)
        vis = np.zeros((size, len(targets)))
        vis[:, :] = (start == tarr)[None, :]
        alive = np.ones(size, dtype=bool)
        steps = 0
        while steps < cap:
            idx = np.nonzero(alive)[0]
            if idx.size == 0:
                break
            b = min(_BLOCK, cap - steps)
            u = gen.random((idx.size, b))
            inc = np.where(u < p_up, 1, -1).astype(np.int64)
            paths = pos[idx, None] + np.cumsum(inc, axis=1)
            hit = paths == 0
            if escape_radius is not None:
                dead = hit | (np.abs(paths) >= escape_radius)
            else:
                dead = hit
            dead_any = dead.any(axis=1)
            first = np.where(dead_any, dead.argmax(axis=1), b)
            live_mask = np.arange(b)[None, :] < first[:, None]
            for ti in range(len(targets)):
                vis[idx, ti] += ((paths == tarr[ti]) & live_mask).sum(axis=1)
            if escape_radius is not None and dead_any.any():
                rows = np.nonzero(dead_any)[0]
                end = paths[rows, first[rows]]
                esc_plus = end >= escape_radius
                esc_minus = end <= -escape_radius
                if esc_plus.any():
                    vis[idx[rows[esc_plus]]] += tail_plus[None, :]
                if esc_minus.any():
                    vis[idx[rows[esc_minus]]] += tail_minus[None, :]
            survivors = ~dead_any
            pos[idx[survivors]] = paths[survivors, -1]
            alive[idx[dead_any]] = False
            steps += b
        n_alive = int(alive.sum())
        if n_alive:
            if on_cap == "error":
                raise RunawayRunError(cap, runs - n_alive)
            truncated += n_alive
        visits[lo : lo + size] = vis
    return [
        _mc_result(visits[:, ti], runs, truncated, note=note)
        for ti in range(len(targets))
    ]


def _plane_ensemble(start, targets, runs, seed, tag, cap, on_cap, escape_radius):
    """Planar walk absorbed at the origin, with optional analytic tails.

    When ``escape_radius`` is set, a run leaving the box is finished in
    expectation: the remaining visits to y before hitting the origin from
    the exit state v equal a(v) + a(y) - a(v - y) by the potential-kernel
    balance (both sides kill the same one-step defect; see the potential
    module). This removes the logarithmic-tail truncation bias.
    """
    from .potential import potential_float_array

    gen = trajectory_generator(seed, tag)
    note = None
    afloat = None
    if escape_radius is not None:
        # targets may lie outside the escape box: direct visits then never
        # occur and the whole estimate rides on the analytic closure
        tmax = max((max(abs(t[0]), abs(t[1])) for t in targets), default=0)
        afloat = potential_float_array(escape_radius + tmax + 2)
        note = f"analytic tail beyond radius {escape_radius}"

    tx = np.asarray([t[0] for t in targets], dtype=np.int64)
    ty = np.asarray([t[1] for t in targets], dtype=np.int64)
    visits = np.zeros((runs, len(targets)))
    truncated = 0
    for lo in range(0, runs, _SLAB):
        size = min(_SLAB, runs - lo)
        px = np.full(size, start[0], dtype=np.int64)
        py = np.full(size, start[1], dtype=np.int64)
        vis = np.zeros((size, len(targets)))
        vis[:, :] = ((start[0] == tx) & (start[1] == ty))[None, :]
        alive = np.ones(size, dtype=bool)
        exit_x = np.zeros(size, dtype=np.int64)
        exit_y = np.zeros(size, dtype=np.int64)
        escaped = np.zeros(size, dtype=bool)
        steps = 0
        while steps < cap:
            idx = np.nonzero(alive)[0]
            if idx.size == 0:
                break
            b = min(_BLOCK, cap - steps)
            u = gen.random((idx.size, b))
            dx = np.where(u < 0.25, -1, 0) + np.where((u >= 0.25) & (u < 0.5), 1, 0)
            dy = np.where((u >= 0.5) & (u < 0.75), -1, 0) + np.where(u >= 0.75, 1, 0)
            cx = px[idx, None] + np.cumsum(dx, axis=1)
            cy = py[idx, None] + np.cumsum(dy, axis=1)
            absorbed = (cx == 0) & (cy == 0)
            if escape_radius is not None:
                out = np.maximum(np.abs(cx), np.abs(cy)) >= escape_radius
            else:
                out = np.zeros_like(absorbed)
            dead = absorbed | out
            dead_any = dead.any(axis=1)
            first = np.where(dead_any, dead.argmax(axis=1), b)
            live_mask = np.arange(b)[None, :] < first[:, None]
            for ti in range(len(targets)):
                vis[idx, ti] += ((cx == tx[ti]) & (cy == ty[ti]) & live_mask).sum(
                    axis=1
                )
            rows = np.arange(idx.size)
            stop_at = np.minimum(first, b - 1)
            end_x = cx[rows, stop_at]
            end_y = cy[rows, stop_at]
            esc_now = dead_any & out[rows, np.minimum(first, b - 1)]
            exit_x[idx[esc_now]] = end_x[esc_now]
            exit_y[idx[esc_now]] = end_y[esc_now]
            escaped[idx[esc_now]] = True
            survivors = ~dead_any
            px[idx[survivors]] = end_x[survivors]
            py[idx[survivors]] = end_y[survivors]
            alive[idx[dead_any]] = False
            steps += b
        n_alive = int(alive.sum())
        if n_alive:
            if on_cap == "error":
                raise RunawayRunError(cap, runs - n_alive)
            truncated += n_alive
        if escape_radius is not None and escaped.any():
            ex = exit_x[escaped]
            ey = exit_y[escaped]
            for ti in range(len(targets)):
                a_v = _a_lookup(afloat, ex, ey)
                a_y = _a_lookup(
                    afloat, np.full_like(ex, tx[ti]), np.full_like(ey, ty[ti])
                )
                a_vy = _a_lookup(afloat, ex - tx[ti], ey - ty[ti])
                vis[escaped, ti] += a_v + a_y - a_vy
        visits[lo : lo + size] = vis
    return [
        _mc_result(visits[:, ti], runs, truncated, note=note)
        for ti in range(len(targets))
    ]


def _a_lookup(afloat, vx, vy):
    i = np.abs(vx)
    j = np.abs(vy)
    return afloat[np.maximum(i, j), np.minimum(i, j)]


def _tree_ensemble(tree, start, spine, target_depths, runs, seed, tag, cap, on_cap):
    """Tree walk reduced to its embedded spine-visit chain.

    Spine = ancestor path of the deepest target; visits to any target are
    visits to a spine node. Off-spine excursions never meet the spine or
    the root and return to the node they left through with probability one
    (the depth below the spine is an unbiased +-1 walk), so for visit
    counting each excursion collapses to a self-loop. The embedded walk on
    spine depths 0..p has a strict downward drift, hence geometric run
    lengths: the lane is fast and carries no truncation bias.

    Embedded rows (k = branching factor, p = spine length):
      0 < j < p : j-1 w.p. 1/2, j+1 w.p. 1/(2k), j (excursion) else;
      j = p     : j-1 w.p. 1/2, j (excursion) w.p. 1/2;
      j = 0     : only at embedded time 0 (start at the root): depth 1
                  w.p. 1/k if p >= 1, otherwise return/absorb at the root.
    A start off the spine first walks its excursion back to its meet point
    (certain arrival, one visit there) unless the meet is the root, in
    which case it is absorbed without any visit.
    """
    k = tree.k
    p_len = len(spine)
    j0 = tree.meet_depth(start, spine)
    h0 = len(start) - j0
    gen = trajectory_generator(seed, tag)
    tdep = np.asarray(target_depths, dtype=np.int64)

    if j0 == 0 and h0 > 0:
        # excursion from below the root ends at the root: no spine visits
        zero = np.zeros(runs)
        return [_mc_result(zero.copy(), runs, 0) for _ in target_depths]

    visits = np.zeros((runs, len(target_depths)))
    truncated = 0
    inv2k = 0.5 / k
    for lo in range(0, runs, _SLAB):
        size = min(_SLAB, runs - lo)
        j = np.full(size, j0, dtype=np.int64)
        vis = np.zeros((size, len(target_depths)))
        vis[:, :] = (j0 == tdep)[None, :]
        alive = np.ones(size, dtype=bool)
        if j0 == 0:
            u = gen.random(size)
            if p_len >= 1:
                up = u < 1.0 / k
                j[up] = 1
                alive[~up] = False
                vis[up] += (j[up][:, None] == tdep[None, :])
            else:
                alive[:] = False
        steps = 0
        while steps < cap:
            idx = np.nonzero(alive)[0]
            if idx.size == 0:
                break
            u = gen.random(idx.size)
            jj = j[idx]
            down = u < 0.5
            up = (u >= 0.5) & (u < 0.5 + inv2k) & (jj < p_len)
            jj = np.where(down, jj - 1, np.where(up, jj + 1, jj))
            j[idx] = jj
            dead = jj == 0
            alive[idx[dead]] = False
            live_rows = idx[~dead]
            if live_rows.size:
                vis[live_rows] += (j[live_rows][:, None] == tdep[None, :])
            steps += 1
        n_alive = int(alive.sum())
        if n_alive:
            if on_cap == "error":
                raise RunawayRunError(cap, runs - n_alive)
            truncated += n_alive
        visits[lo : lo + size] = vis
    return [
        _mc_result(visits[:, ti], runs, truncated)
        for ti in range(len(target_depths))
    ]
