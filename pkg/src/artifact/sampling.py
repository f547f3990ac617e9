"""Density-proportional point sampling over scalar fields.

Turns a concentration field into a points key data whose spatial density
follows the field: candidates are drawn uniformly over the field's box and
accepted with probability field(x)/max(field). The candidate stream uses a
fixed draw order (x, y, z, accept) from a self-contained xorshift64* PRNG,
so identical inputs give bit-identical point sets on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .data import KeyData, ScalarField, VariableArray

MASK64 = (1 << 64) - 1
_MULTIPLIER = 2685821657736338717
_TWO64 = float(1 << 64)


class SamplingError(ValueError):
    pass


def prng_next(state: int) -> tuple[int, int]:
    """One xorshift64* step: returns (value, next_state). State must be nonzero."""
    if state == 0:
        raise SamplingError("PRNG state must be nonzero")
    s = state & MASK64
    s ^= s >> 12
    s ^= (s << 25) & MASK64
    s ^= s >> 27
    s &= MASK64
    return (s * _MULTIPLIER) & MASK64, s


class Xorshift64Star:
    """Stateful wrapper around prng_next; uniforms are value / 2**64."""

    def __init__(self, seed: int):
        if seed == 0:
            raise SamplingError("seed must be nonzero")
        self.state = seed & MASK64

    def next_uint64(self) -> int:
        value, self.state = prng_next(self.state)
        return value

    def next_float(self) -> float:
        return self.next_uint64() / _TWO64


@dataclass(frozen=True)
class SamplerConfig:
    count: int
    seed: int
    max_attempts: int | None = None  # defaults to 1000 * count

    def __post_init__(self):
        if self.count < 0:
            raise SamplingError(f"count must be >= 0, got {self.count}")
        if self.seed == 0:
            raise SamplingError("seed must be nonzero")

    @property
    def attempt_budget(self) -> int:
        if self.max_attempts is not None:
            return self.max_attempts
        return 1000 * self.count


def trilinear(field: ScalarField, x: float, y: float, z: float) -> float:
    """Trilinear interpolation; positions outside the grid clamp to the boundary."""
    nx, ny, nz = field.dims
    fx = (x - field.origin[0]) / field.spacing[0] if nx > 1 else 0.0
    fy = (y - field.origin[1]) / field.spacing[1] if ny > 1 else 0.0
    fz = (z - field.origin[2]) / field.spacing[2] if nz > 1 else 0.0
    fx = min(max(fx, 0.0), nx - 1.0)
    fy = min(max(fy, 0.0), ny - 1.0)
    fz = min(max(fz, 0.0), nz - 1.0)
    i0 = min(int(fx), nx - 2) if nx > 1 else 0
    j0 = min(int(fy), ny - 2) if ny > 1 else 0
    k0 = min(int(fz), nz - 2) if nz > 1 else 0
    tx = fx - i0
    ty = fy - j0
    tz = fz - k0
    i1 = min(i0 + 1, nx - 1)
    j1 = min(j0 + 1, ny - 1)
    k1 = min(k0 + 1, nz - 1)
    g = field.grid()
    c000 = g[k0, j0, i0]
    c100 = g[k0, j0, i1]
    c010 = g[k0, j1, i0]
    c110 = g[k0, j1, i1]
    c001 = g[k1, j0, i0]
    c101 = g[k1, j0, i1]
    c011 = g[k1, j1, i0]
    c111 = g[k1, j1, i1]
    c00 = c000 * (1.0 - tx) + c100 * tx
    c10 = c010 * (1.0 - tx) + c110 * tx
    c01 = c001 * (1.0 - tx) + c101 * tx
    c11 = c011 * (1.0 - tx) + c111 * tx
    c0 = c00 * (1.0 - ty) + c10 * ty
    c1 = c01 * (1.0 - ty) + c11 * ty
    return float(c0 * (1.0 - tz) + c1 * tz)


@dataclass(frozen=True)
class SampleResult:
    points: KeyData
    complete: bool
    attempts: int
    warnings: tuple[str, ...] = dc_field(default=())


def _check_shared_domain(field: ScalarField, interpolant: ScalarField) -> None:
    if (
        interpolant.dims != field.dims
        or interpolant.origin != field.origin
        or interpolant.spacing != field.spacing
    ):
        raise SamplingError(
            f"interpolant {interpolant.name!r} does not share the domain of {field.name!r}"
        )


def sample_density(
    field: ScalarField,
    cfg: SamplerConfig,
    interpolants: list[ScalarField] | tuple[ScalarField, ...] = (),
    name: str | None = None,
) -> SampleResult:
    """Sample cfg.count points with density proportional to the field.

    Each interpolant becomes a per-vertex scalar variable on the result via
    trilinear interpolation at the accepted positions. Raises on negative
    field values or an all-zero field with count > 0; an exhausted attempt
    budget yields a partial result with complete=False.
    """
    values = field.values
    if values.size and float(values.min()) < 0.0:
        bad = int(np.argmin(values))
        raise SamplingError(
            f"field {field.name!r} has a negative value at index {bad}"
        )
    for extra in interpolants:
        _check_shared_domain(field, extra)

    kd_name = name if name is not None else f"{field.name}-points"
    vmax = float(values.max()) if values.size else 0.0
    if cfg.count == 0:
        empty = np.zeros((0, 3), dtype=np.float64)
        empty.setflags(write=False)
        variables = {
            extra.name: VariableArray(extra.name, "scalar", np.zeros(0))
            for extra in interpolants
        }
        return SampleResult(KeyData(kd_name, "points", empty, (), variables), True, 0)
    if vmax == 0.0:
        raise SamplingError(
            f"field {field.name!r} is all zero; cannot place {cfg.count} points"
        )

    lo, hi = field.bounding_box()
    extent = hi - lo
    rng = Xorshift64Star(cfg.seed)
    budget = cfg.attempt_budget

    accepted = np.empty((cfg.count, 3), dtype=np.float64)
    n = 0
    attempts = 0
    while n < cfg.count and attempts < budget:
        attempts += 1
        ux = rng.next_float()
        uy = rng.next_float()
        uz = rng.next_float()
        ua = rng.next_float()
        x = lo[0] + ux * extent[0]
        y = lo[1] + uy * extent[1]
        z = lo[2] + uz * extent[2]
        if ua < trilinear(field, x, y, z) / vmax:
            accepted[n, 0] = x
            accepted[n, 1] = y
            accepted[n, 2] = z
            n += 1

    positions = accepted[:n].copy()
    positions.setflags(write=False)
    variables: dict[str, VariableArray] = {}
    for extra in interpolants:
        vals = np.array(
            [trilinear(extra, px, py, pz) for px, py, pz in positions],
            dtype=np.float64,
        )
        vals.setflags(write=False)
        variables[extra.name] = VariableArray(extra.name, "scalar", vals)

    points = KeyData(kd_name, "points", positions, (), variables)
    complete = n == cfg.count
    warnings = ()
    if not complete:
        warnings = (
            f"attempt budget {budget} exhausted after {n}/{cfg.count} points",
        )
    return SampleResult(points, complete, attempts, warnings)
