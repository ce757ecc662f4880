"""Residual checks for the optimality system of a solve.

A pair (u, z) with boundary flux v0 is optimal exactly when

  * per-cell block-1 dual norm of z at most 1,
  * the block-1 pairing saturates: <z1, grad1 u> equals the total
    variation,
  * constitutive law on each power block: z_i = |grad_i u|^{p_i-2}
    grad_i u,
  * divergence condition: div z + rhs = 0 (rhs = f for the elliptic
    problem, the backward difference quotient for a flow step),
  * boundary sign condition on the penalized faces: v0 * u_face =
    -|u_face| with |v0| <= 1.

``check_weak_solution`` measures all five and never raises on large
values; it is a reporting tool.  The same function records the exact
nonnegative bookkeeping terms (pairing slack, per-block Young slack,
boundary slack) whose sum is bounded by the duality gap of a certified
solve, so large residuals always point at a genuine violation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .energy import tv_block1
from .errors import InvalidInputError
from .grid import (
    GridSpec,
    boundary_restriction,
    boundary_weights,
    check_scalar_field,
    check_vector_field,
    div_blocks,
    grad_block,
    gradient,
    inner,
    sampled_normal_trace,
)

MODES = ("elliptic", "parabolic")


@dataclass(frozen=True)
class Certificate:
    """Residuals of the five optimality conditions plus gap bookkeeping.

    All residual fields are nonnegative and finite.  The last three
    fields are the exact gap-decomposition contributions: for a
    certified solve, pairing_gap + sum(young_terms) + boundary_sign_total
    is at most the gap plus roundoff.
    """

    mode: str
    boundary_mode: str
    gap: float
    sup_norm_z1: float
    pairing_residual: float
    constitutive_residuals: tuple[float, ...]
    divergence_residual: float
    boundary_sign_residual: float
    trace_sup: float
    pairing_gap: float
    young_terms: tuple[float, ...]
    boundary_sign_total: float


def _block1_sup(z1: np.ndarray, tv_norm: str) -> float:
    if z1.size == 0:
        return 0.0
    if tv_norm == "euclidean":
        return float(np.sqrt(np.max(np.sum(z1 * z1, axis=0))))
    return float(np.max(np.abs(z1)))


def weak_normal_trace(z, spec: GridSpec):
    """Boundary flux of z on the penalized faces, sampled from z1.

    Low faces carry -z1 of the adjacent cell, high faces the far
    component; zeros under neumann_block1.  Its sup never exceeds the
    per-cell sup of ||z1||.
    """
    z = check_vector_field(z, spec)
    return sampled_normal_trace(z, spec)


def pairing_measure(z1, u, spec: GridSpec) -> np.ndarray:
    """Per-cell mass of the pairing between z1 and the block-1 gradient.

    Accepts either the block-1 components or a full vector field (the
    block-1 components are then sliced off).  The total over any cell
    subset is bounded by sup||z1|| times the subset's variation mass.
    """
    u = check_scalar_field(u, spec)
    z1 = np.asarray(z1, dtype=float)
    n1 = spec.blocks[0]
    if z1.shape == (spec.ndim,) + spec.dims:
        z1 = z1[:n1]
    if z1.shape != (n1,) + spec.dims:
        raise InvalidInputError(
            f"z1 must have shape {(n1,) + spec.dims}, got {z1.shape}"
        )
    g1 = grad_block(u, spec, 1)
    return np.sum(z1 * g1, axis=0) * spec.cell_volume


def gauss_green_residual(u, z, spec: GridSpec, boundary_flux=None) -> float:
    """Defect of the integration-by-parts identity; zero by construction.

    Checks <u, div z> + sum_blocks <z, grad u> = boundary pairing of the
    flux with the trace of u.  Exact up to roundoff for every (u, z)
    because the divergence is defined as the negative adjoint of the
    gradient plus explicit boundary bookkeeping.
    """
    u = check_scalar_field(u, spec)
    z = check_vector_field(z, spec)
    if boundary_flux is None:
        boundary_flux = sampled_normal_trace(z, spec)
    lhs = inner(u, div_blocks(z, spec, boundary_flux), spec)
    lhs += float(np.vdot(z, gradient(u, spec))) * spec.cell_volume
    rhs = float(np.sum(boundary_weights(spec) * boundary_flux * boundary_restriction(u, spec)))
    return abs(lhs - rhs)


def _default_floor(g1_mags: np.ndarray, grad_floor) -> float:
    if grad_floor is not None:
        if not grad_floor > 0:
            raise InvalidInputError("grad_floor must be positive")
        return float(grad_floor)
    top = float(np.max(g1_mags)) if g1_mags.size else 0.0
    return 1e-10 * top if top > 0 else 1e-300


def theta_density(z, u, spec: GridSpec, grad_floor: float | None = None) -> np.ndarray:
    """Per-cell density z1 . grad1 u / |grad1 u|, NaN below the floor.

    The default floor is 1e-10 times the largest block-1 gradient
    magnitude; below it the ratio has no meaning.  Defined values are
    bounded by the per-cell norm of z1.
    """
    u = check_scalar_field(u, spec)
    z = check_vector_field(z, spec)
    n1 = spec.blocks[0]
    g1 = grad_block(u, spec, 1)
    mags = np.sqrt(np.sum(g1 * g1, axis=0))
    floor = _default_floor(mags, grad_floor)
    out = np.full(spec.dims, np.nan)
    mask = mags > floor
    num = np.sum(z[:n1] * g1, axis=0)
    out[mask] = num[mask] / mags[mask]
    return out


class TruncationInvariance(NamedTuple):
    """Deviation of the pairing density under clamping, with a count of
    the cells whose difference stencil the clamp actually altered."""

    max_deviation: float
    straddle_count: int


def theta_truncation_invariance(
    z, u, spec: GridSpec, a: float, b: float, grad_floor: float | None = None
) -> TruncationInvariance:
    """Compare the density for u and for u clamped to [a, b].

    The maximum runs over cells where both densities are defined.  It is
    exactly zero when no difference stencil is altered by the clamp
    (straddle_count 0); altered cells are counted and the deviation is
    reported, not asserted small, because forward differences rescale
    across a clamp level.
    """
    if not a < b:
        raise InvalidInputError("truncation interval needs a < b")
    u = check_scalar_field(u, spec)
    tu = np.clip(u, a, b)
    th_u = theta_density(z, u, spec, grad_floor)
    th_t = theta_density(z, tu, spec, grad_floor)
    both = ~np.isnan(th_u) & ~np.isnan(th_t)
    changed = np.any(grad_block(u, spec, 1) != grad_block(tu, spec, 1), axis=0)
    straddles = int(np.count_nonzero(both & changed))
    if not both.any():
        return TruncationInvariance(0.0, straddles)
    dev = float(np.max(np.abs(th_u[both] - th_t[both])))
    return TruncationInvariance(dev, straddles)


def check_weak_solution(
    u,
    z,
    rhs,
    spec: GridSpec,
    mode: str = "elliptic",
    boundary_trace=None,
    gap: float = float("nan"),
    tv_norm: str = "euclidean",
) -> Certificate:
    """Populate every optimality residual for the pair (u, z).

    ``boundary_trace`` is the boundary flux to use for the divergence
    and sign conditions; when omitted it is sampled from z directly.
    ``rhs`` is f in elliptic mode and the backward difference quotient
    (previous state minus current, over the time step) in parabolic
    mode.  Reports only; large residuals never raise.
    """
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}")
    u = check_scalar_field(u, spec)
    z = check_vector_field(z, spec)
    rhs = check_scalar_field(rhs, spec, name="rhs")
    n1 = spec.blocks[0]
    vol = spec.cell_volume

    if boundary_trace is None:
        boundary_trace = sampled_normal_trace(z, spec)
    else:
        boundary_trace = np.asarray(boundary_trace, dtype=float)

    g = gradient(u, spec)
    tv = tv_block1(u, spec, tv_norm)
    pairing = float(np.vdot(z[:n1], g[:n1])) * vol

    young = []
    consti = []
    for blk in range(2, spec.n_blocks + 1):
        axes = spec.block_axes(blk)
        sl = slice(axes[0], axes[-1] + 1)
        p = spec.exponents[blk - 1]
        q = p / (p - 1.0)
        gb = g[sl]
        zb = z[sl]
        gm = np.sqrt(np.sum(gb * gb, axis=0))
        zm = np.sqrt(np.sum(zb * zb, axis=0))
        young.append(
            float(np.sum(gm**p / p + zm**q / q - np.sum(zb * gb, axis=0))) * vol
        )
        law = gm ** (p - 2.0) * gb if p >= 2.0 else np.where(gm > 0, gm, 1.0) ** (p - 2.0) * gb * (gm > 0)
        diff = zb - law
        consti.append(float(np.sqrt(np.sum(diff * diff) * vol)))

    w = div_blocks(z, spec, boundary_trace)
    div_res = float(np.sqrt(np.vdot(w + rhs, w + rhs).real * vol))

    if spec.has_trace_term:
        tr = boundary_restriction(u, spec)
        sign_terms = np.abs(tr) + boundary_trace * tr
        sign_res = float(np.max(np.abs(sign_terms))) if sign_terms.size else 0.0
        sign_total = float(np.sum(boundary_weights(spec) * sign_terms))
        trace_sup = float(np.max(np.abs(boundary_trace))) if boundary_trace.size else 0.0
    else:
        sign_res = 0.0
        sign_total = 0.0
        trace_sup = 0.0

    return Certificate(
        mode=mode,
        boundary_mode=spec.boundary_mode,
        gap=float(gap),
        sup_norm_z1=_block1_sup(z[:n1], tv_norm),
        pairing_residual=abs(tv - pairing),
        constitutive_residuals=tuple(consti),
        divergence_residual=div_res,
        boundary_sign_residual=sign_res,
        trace_sup=trace_sup,
        pairing_gap=tv - pairing,
        young_terms=tuple(young),
        boundary_sign_total=sign_total,
    )
