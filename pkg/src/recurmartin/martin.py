"""Harmonic profiles attached to boundary points and their mixtures.

A profile is a nonnegative function vanishing at its base state and
harmonic everywhere else. Each boundary point alpha induces one through
the visit-ratio kernel, scaled by the reciprocal stationary weight of the
base state; finite nonnegative mixtures of kernels sweep out the cone of
such profiles, and on the integer line the cone is exactly
two-dimensional, so profiles there decompose into the two end weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .chains import ChainSpec, StateId, step_distribution
from .errors import NotInConeError, UnsupportedBasePointError
from .examplechains import LineEnd, ZWalk

PROVENANCES = ("closed-form", "boundary-point", "mixture", "user")


@dataclass(frozen=True)
class HarmonicProfile:
    """A function vanishing at ``base_point`` and harmonic off it."""

    base_point: StateId
    fn: Callable[[StateId], object]
    provenance: str = "user"
    description: str = ""

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def evaluate(self, x: StateId):
        if x == self.base_point:
            return Fraction(0)
        return self.fn(x)

    __call__ = evaluate


@dataclass(frozen=True)
class BoundaryMixture:
    """Finite atomic measure on boundary points."""

    atoms: tuple

    def __init__(self, atoms: Sequence[tuple]):
        cleaned = []
        for alpha, w in atoms:
            w = Fraction(w)
            if w < 0:
                raise ValueError("mixture weights must be nonnegative")
            cleaned.append((alpha, w))
        object.__setattr__(self, "atoms", tuple(cleaned))

    @property
    def total_mass(self) -> Fraction:
        return sum((w for _, w in self.atoms), Fraction(0))


def _boundary_kernel(chain: ChainSpec, x0: StateId, x: StateId, alpha) -> Fraction:
    """Visit-ratio kernel against a boundary point, any supported base.

    The integer-line walk is translation invariant, so an arbitrary base
    reduces to the canonical one by shifting; other chains publish closed
    forms at their canonical base only.
    """
    if isinstance(chain, ZWalk):
        return chain.exact_boundary_kernel(x - x0, alpha, base=0)
    method = getattr(chain, "exact_boundary_kernel", None)
    if method is None:
        raise UnsupportedBasePointError(
            f"chain {chain.name!r} has no boundary kernel closed form"
        )
    return method(x, alpha, base=x0)


def profile_from_boundary(chain: ChainSpec, x0: StateId, alpha) -> HarmonicProfile:
    """The profile of a single boundary point: kernel over base weight.

    phi(x) = L(x, alpha) / beta(x0) away from the base state, zero there.
    Its one-step balance at the base is exactly 1/beta(x0).
    """
    beta0 = chain.stationary(x0)

    def fn(x):
        return _boundary_kernel(chain, x0, x, alpha) / beta0

    return HarmonicProfile(
        base_point=x0,
        fn=fn,
        provenance="boundary-point",
        description=f"boundary point {alpha} over base {chain.format_state(x0)}",
    )


def mixture_profile(chain: ChainSpec, x0: StateId, mixture: BoundaryMixture) -> HarmonicProfile:
    """Kernel mixture: phi(x) = sum of w_i * L(x, alpha_i), zero at the base.

    The one-step balance at the base equals the mixture's total mass
    exactly, because each kernel contributes balance 1.
    """

    def fn(x):
        return sum(
            (w * _boundary_kernel(chain, x0, x, alpha) for alpha, w in mixture.atoms),
            Fraction(0),
        )

    return HarmonicProfile(
        base_point=x0,
        fn=fn,
        provenance="mixture",
        description=f"{len(mixture.atoms)}-atom mixture over base {chain.format_state(x0)}",
    )


def decompose_profile_z(
    phi: HarmonicProfile, radius: int = 50, chain: Optional[ZWalk] = None
) -> BoundaryMixture:
    """Recover the two end weights of a base-0 profile on the integer line.

    The candidate weights are read off one step from the base,
    (a, b) = (phi(1)/2, phi(-1)/2), then the reconstruction
    phi(x) = 2a*max(x,0) + 2b*max(-x,0) is verified across the window.
    Failure at any point means the input is not in the nonnegative cone
    spanned by the two end profiles.
    """
    chain = chain or ZWalk()
    if phi.base_point != 0:
        raise NotInConeError("decomposition requires base point 0")
    a = Fraction(phi(1)) / 2
    b = Fraction(phi(-1)) / 2
    if a < 0 or b < 0:
        raise NotInConeError("negative end weight; profile not in the cone")
    for x in chain.window(radius):
        expected = 2 * a * max(x, 0) + 2 * b * max(-x, 0)
        if Fraction(phi(x)) != expected:
            raise NotInConeError(
                f"profile deviates from the end-point cone at x={x}"
            )
    return BoundaryMixture([(LineEnd(1), a), (LineEnd(-1), b)])


@dataclass
class HarmonicityCheck:
    base_point: StateId
    checked: int
    violations: list = field(default_factory=list)
    balance_at_base: object = None

    @property
    def all_ok(self) -> bool:
        return not self.violations


def check_harmonic_except(
    chain: ChainSpec, phi, x0: StateId, window: Sequence[StateId]
) -> HarmonicityCheck:
    """One-step residuals of phi off x0, plus the balance value at x0.

    The residual at x is the one-step average minus the value; it must
    vanish at every window state except the base, where the balance (not
    constrained to vanish) is reported instead.
    """
    report = HarmonicityCheck(base_point=x0, checked=0)
    get = phi.evaluate if hasattr(phi, "evaluate") else phi
    for x in window:
        avg = sum((p * get(t) for t, p in step_distribution(chain, x)), Fraction(0))
        if x == x0:
            report.balance_at_base = avg
            continue
        report.checked += 1
        residual = avg - get(x)
        if residual != 0:
            report.violations.append((x, residual))
    return report
