"""Bijection between triangle interior angles and a six-parameter form.

A triangle with angles ``theta_i, theta_j, theta_k`` is encoded by six
scalars ``w_ik, w_ki, w_ij, w_ji, w_jk, w_kj`` that make three bilinear
constraints on the side lengths vanish.  Only the ratio within each pair
matters, so parameter sets equal up to a nonzero scale are equivalent.
The inverse direction classifies the parameter set (a zero parameter forces
a right angle; a ratio-sum equal to one forces colinearity) and recovers the
angles in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InconsistentParametersError, ValidationError

#: Relative tolerance for the colinearity ratio-sum test and for treating a
#: parameter as zero.  Noiseless synthetic data is exact to machine
#: precision; noisy data may need a looser value.
RATIO_SUM_TOL = 1e-9

PARAM_NAMES = ("w_ik", "w_ki", "w_ij", "w_ji", "w_jk", "w_kj")

ANGLE_SUM_TOL = 1e-9


@dataclass(frozen=True)
class TriangleAngles:
    """Interior angles of a (possibly degenerate) triangle, in radians."""

    theta_i: float
    theta_j: float
    theta_k: float

    def __post_init__(self):
        for t in self.as_tuple():
            if not (-1e-12 <= t <= math.pi + 1e-12):
                raise ValidationError(f"angle {t} outside [0, pi]")
        if abs(sum(self.as_tuple()) - math.pi) > ANGLE_SUM_TOL:
            raise ValidationError(
                f"angles must sum to pi, got {sum(self.as_tuple())}"
            )

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.theta_i, self.theta_j, self.theta_k)


@dataclass(frozen=True)
class AngleParameterSet:
    """The six scalars of the bilinear angle-constraint form."""

    w_ik: float
    w_ki: float
    w_ij: float
    w_ji: float
    w_jk: float
    w_kj: float

    def __post_init__(self):
        a = self.as_array()
        if not np.all(np.isfinite(a)):
            raise ValidationError("parameters must be finite")
        for p, q, name in (
            (self.w_ik, self.w_ki, "w_ik/w_ki"),
            (self.w_ij, self.w_ji, "w_ij/w_ji"),
            (self.w_jk, self.w_kj, "w_jk/w_kj"),
        ):
            if p == 0.0 and q == 0.0:
                raise ValidationError(f"parameter pair {name} must not both be zero")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.w_ik, self.w_ki, self.w_ij, self.w_ji, self.w_jk, self.w_kj]
        )

    def scaled(self, c: float) -> "AngleParameterSet":
        if c == 0.0:
            raise ValidationError("scale must be nonzero")
        return AngleParameterSet(*(c * self.as_array()))


@dataclass(frozen=True)
class CaseLabel:
    """Classification of a parameter set.

    ``tag`` is one of ``"zero_param"`` (some parameter vanishes, forcing a
    right angle), ``"colinear"`` (a ratio-sum equals one), or ``"generic"``.
    ``detail`` names the vanishing parameter, the vertex whose angle is pi,
    or the obtuse vertex (``None`` when all angles are acute).
    """

    tag: str
    detail: Optional[str] = None


def _zero_mask(params: AngleParameterSet, eps: float) -> np.ndarray:
    a = params.as_array()
    return np.abs(a) <= eps * np.max(np.abs(a))


def equation_residuals(
    params: AngleParameterSet,
    angles: TriangleAngles,
    distances: Sequence[float],
) -> np.ndarray:
    """Residuals of the three bilinear constraints for given angles/sides.

    ``distances`` is ``(d_ij, d_ik, d_jk)``.
    """
    d_ij, d_ik, d_jk = distances
    ci, cj, ck = (math.cos(t) for t in angles.as_tuple())
    return np.array(
        [
            params.w_ik * d_ik * d_ij * ci + params.w_ki * d_ik * d_jk * ck,
            params.w_ij * d_ik * d_ij * ci + params.w_ji * d_ij * d_jk * cj,
            params.w_jk * d_jk * d_ij * cj + params.w_kj * d_ik * d_jk * ck,
        ]
    )


def params_from_angles(
    angles: TriangleAngles,
    colinear_side_lengths: Optional[Sequence[float]] = None,
    eps: float = RATIO_SUM_TOL,
) -> AngleParameterSet:
    """Encode triangle angles as a canonical parameter set.

    Non-degenerate triangles use the sine-rule normalization
    ``w_ik = sin(theta_i) cos(theta_k)``, ``w_ki = -sin(theta_k) cos(theta_i)``
    and cyclic analogues, which satisfies the constraints identically.
    Colinear triangles (all sines vanish) instead need explicit side lengths
    ``(d_ij, d_ik, d_jk)`` consistent with the colinearity pattern.
    """
    ti, tj, tk = angles.as_tuple()
    degenerate = [t <= eps or t >= math.pi - eps for t in (ti, tj, tk)]
    if any(degenerate):
        flat = [t >= math.pi - eps for t in (ti, tj, tk)]
        if sum(flat) != 1 or not all(degenerate):
            raise ValidationError(
                "degenerate angles must be one pi and two zeros"
            )
        if colinear_side_lengths is None:
            raise ValidationError(
                "colinear angles require explicit side lengths"
            )
        d_ij, d_ik, d_jk = (float(d) for d in colinear_side_lengths)
        if min(d_ij, d_ik, d_jk) <= 0:
            raise ValidationError("side lengths must be positive")
        scale = max(d_ij, d_ik, d_jk)
        if flat[0]:
            gap = d_ij + d_ik - d_jk
        elif flat[1]:
            gap = d_ij + d_jk - d_ik
        else:
            gap = d_ik + d_jk - d_ij
        if abs(gap) > 1e-9 * scale:
            raise ValidationError(
                f"side lengths inconsistent with colinearity (gap {gap})"
            )
        ci, cj, ck = math.cos(ti), math.cos(tj), math.cos(tk)
        return AngleParameterSet(
            w_ik=d_jk * ck,
            w_ki=-d_ij * ci,
            w_ij=d_jk * cj,
            w_ji=-d_ik * ci,
            w_jk=d_ik * ck,
            w_kj=-d_ij * cj,
        )
    si, sj, sk = math.sin(ti), math.sin(tj), math.sin(tk)
    ci, cj, ck = math.cos(ti), math.cos(tj), math.cos(tk)
    return AngleParameterSet(
        w_ik=si * ck,
        w_ki=-sk * ci,
        w_ij=si * cj,
        w_ji=-sj * ci,
        w_jk=sj * ck,
        w_kj=-sk * cj,
    )


def is_colinear(
    params: AngleParameterSet, eps: float = RATIO_SUM_TOL
) -> Tuple[bool, Optional[str]]:
    """Colinearity test via the ratio sums plus sign tests.

    For colinear geometry every ratio sum equals one, so the sum test only
    detects degeneracy; the middle node (the one whose angle is pi) is
    identified by which pair product is negative.  Returns
    ``(True, vertex)`` or ``(False, None)``.  Parameter sets with a zero
    entry are never colinear.
    """
    if np.any(_zero_mask(params, eps)):
        return (False, None)
    sums = (
        params.w_ki / params.w_ik + params.w_ji / params.w_ij,
        params.w_ij / params.w_ji + params.w_kj / params.w_jk,
        params.w_ik / params.w_ki + params.w_jk / params.w_kj,
    )
    fired = any(abs(s - 1.0) <= eps * max(1.0, abs(s)) for s in sums)
    if not fired:
        return (False, None)
    if params.w_kj * params.w_jk < 0:
        return (True, "i")
    if params.w_ki * params.w_ik < 0:
        return (True, "j")
    if params.w_ji * params.w_ij < 0:
        return (True, "k")
    raise InconsistentParametersError(
        "ratio sum fired but no pair product is negative"
    )


def classify(params: AngleParameterSet, eps: float = RATIO_SUM_TOL) -> CaseLabel:
    """Classify a parameter set into zero-parameter / colinear / generic."""
    mask = _zero_mask(params, eps)
    if np.any(mask):
        name = PARAM_NAMES[int(np.argmax(mask))]
        return CaseLabel(tag="zero_param", detail=name)
    colinear, vertex = is_colinear(params, eps)
    if colinear:
        return CaseLabel(tag="colinear", detail=vertex)
    p_ik = params.w_ki * params.w_ik
    p_ij = params.w_ji * params.w_ij
    p_jk = params.w_kj * params.w_jk
    neg = (p_ik < 0, p_ij < 0, p_jk < 0)
    if all(neg):
        return CaseLabel(tag="generic", detail=None)
    if neg == (False, False, True):
        return CaseLabel(tag="generic", detail="i")
    if neg == (True, False, False):
        return CaseLabel(tag="generic", detail="j")
    if neg == (False, True, False):
        return CaseLabel(tag="generic", detail="k")
    raise InconsistentParametersError(
        f"product sign pattern {neg} admits no triangle"
    )


def _acute_from_ratio(num: float, den: float) -> float:
    """arctan(sqrt(-num/den)) with a radicand sanity check."""
    if den == 0.0 or -(num / den) < 0:
        raise InconsistentParametersError(
            f"negative radicand for ratio {num}/{den}"
        )
    return math.atan(math.sqrt(-(num / den)))


def _into_0_pi(tan_value: float) -> float:
    t = math.atan(tan_value)
    return t if t >= 0 else t + math.pi


def recover_angles(
    params: AngleParameterSet, eps: float = RATIO_SUM_TOL
) -> TriangleAngles:
    """Recover the unique triangle angles encoded by a parameter set.

    Works purely with parameter ratios, so the result is invariant to any
    nonzero rescaling of the parameters.
    """
    label = classify(params, eps)
    if label.tag == "zero_param":
        w = dict(zip(PARAM_NAMES, params.as_array()))
        name = label.detail
        if name in ("w_ik", "w_jk"):
            ti = _acute_from_ratio(w["w_ij"], w["w_ji"])
            return TriangleAngles(ti, math.pi / 2 - ti, math.pi / 2)
        if name in ("w_ki", "w_ji"):
            tj = _acute_from_ratio(w["w_jk"], w["w_kj"])
            return TriangleAngles(math.pi / 2, tj, math.pi / 2 - tj)
        # w_ij or w_kj vanishes: the angle at j is the right one.
        ti = _acute_from_ratio(w["w_ik"], w["w_ki"])
        return TriangleAngles(ti, math.pi / 2, math.pi / 2 - ti)
    if label.tag == "colinear":
        flat = {"i": (math.pi, 0.0, 0.0), "j": (0.0, math.pi, 0.0), "k": (0.0, 0.0, math.pi)}
        return TriangleAngles(*flat[label.detail])
    # Generic triangle: tan(theta_k) = r_k tan(theta_i), tan(theta_j) = r_j tan(theta_i),
    # and the angle-sum identity fixes tan(theta_i) up to sign.
    r_k = -params.w_ki / params.w_ik
    r_j = -params.w_ji / params.w_ij
    denom = r_j * r_k
    if denom == 0.0:
        raise InconsistentParametersError("vanishing tangent ratio product")
    t_sq = (1.0 + r_j + r_k) / denom
    if t_sq <= 0:
        raise InconsistentParametersError(
            f"no real solution (squared tangent {t_sq})"
        )
    t = math.sqrt(t_sq)
    if label.detail == "i":
        t = -t
    ti = _into_0_pi(t)
    tj = _into_0_pi(r_j * t)
    tk = _into_0_pi(r_k * t)
    try:
        return TriangleAngles(ti, tj, tk)
    except ValidationError as exc:
        raise InconsistentParametersError(str(exc)) from exc
