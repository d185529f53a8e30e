"""Study orchestration: JSON-configured eps sweeps, reports, and the CLI.

A study is one named experiment kind swept over a decreasing list of
interface widths.  Each width is solved (or constructed) independently,
measured, and checked against the rules configured for that kind; the
collected rows, cross-width checks, and observed convergence orders form a
report that is a pure function of the configuration.  Wall-clock timings
are written to a sidecar so the canonical report stays byte-identical
across reruns.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .comparison import (
    asymptotic_gap,
    build_subsolution,
    make_schedule,
    solve_cmc_graph,
    verify_subsolution,
)
from .field import Grid, ScalarField, gradient, integrate, sample
from .interface import (
    curvature,
    curvature_balance,
    extract_contours,
    write_contour_csv,
    zero_crossings_1d,
)
from .measure import DiffuseMeasure, bulk_deviation, multiplicity_estimate
from .potential import (
    DoubleWell,
    bulk_roots,
    first_order_correction,
    optimal_profile,
)
from .solve import (
    disk_signed_distance,
    long_range_potential,
    seed_from_signed_distance,
    solve_conserved,
)

SQRT2 = float(np.sqrt(2.0))

KINDS = (
    "profile",
    "ch-disk",
    "ch-planar",
    "ok-disk",
    "ok-lamellar",
    "gt-check",
    "subsolution",
    "multiplicity",
    "gap",
)

# Every emitted metric carries the balance law it probes.
ANCHORS = {
    "profile": {
        "sigma": "sigma = scale * sqrt(2)/3",
        "sigma_error": "sigma = scale * sqrt(2)/3",
        "profile_residual": "phi0'' = W'(phi0)",
        "tanh_gap": "phi0(r) = tanh(scale * r / sqrt(2))",
        "tail_error": "phi1(+-inf) = sqrt(2) / (6 * scale)",
        "equipartition": "phi0'^2 / 2 = W(phi0)",
    },
    "ch-disk": {
        "lambda": "sigma * kappa = lambda",
        "r_eps": "lambda * R / sigma -> 1",
        "ratio": "lambda * R / sigma -> 1",
        "ratio_error": "lambda * R / sigma -> 1",
        "gt_sup": "sigma * kappa = lambda",
        "energy": "energy per layer = 2 * sigma",
    },
    "ch-planar": {
        "lambda": "flat layer: lambda -> 0",
        "energy": "energy per layer = 2 * sigma",
        "energy_error": "energy per layer = 2 * sigma",
    },
    "ok-disk": {
        "lambda": "sigma * kappa + v = lambda",
        "ok_sup": "sigma * kappa + v = lambda",
        "ok_scale": "sigma * kappa + v = lambda",
    },
    "ok-lamellar": {
        "lambda": "flat interface: v = lambda",
        "flat_sup": "flat interface: v = lambda",
        "n_crossings": "flat interface: v = lambda",
    },
    "gt-check": {
        "lambda": "sigma * kappa = lambda",
        "gt_sup": "sigma * kappa = lambda",
        "bulk_dev": "|u - lambda_pm| <= eps^2 off the interface",
        "bulk_bound": "|u - lambda_pm| <= eps^2 off the interface",
    },
    "subsolution": {
        "max_defect": "defect <= (7/9) * force",
        "bound": "defect <= (7/9) * force",
        "defect_excess": "defect -> (2/3) * force",
    },
    "multiplicity": {
        "est_1": "ball mass / (2 sigma omega r) -> sheet count",
        "est_2": "ball mass / (2 sigma omega r) -> sheet count",
        "est_3": "ball mass / (2 sigma omega r) -> sheet count",
    },
    "gap": {
        "upper_gap": "(lambda_plus - beta_plus) / eps -> force/9",
        "lower_gap": "(lambda_minus - beta_minus) / eps -> force/9",
        "upper_gap_error": "(lambda_plus - beta_plus) / eps -> force/9",
        "lower_gap_error": "(lambda_minus - beta_minus) / eps -> force/9",
    },
}

DEFAULT_TOLERANCES = {
    "profile": {
        "sigma": 1e-10,
        "residual": 1e-8,
        "tanh": 1e-7,
        "tail": 1e-6,
        "equipartition": 1e-8,
    },
    "ch-disk": {"ratio_first": 0.15, "ratio_last": 0.05},
    "ch-planar": {"energy": 1e-3},
    "ok-disk": {"balance": 0.1},
    "ok-lamellar": {"flat": 0.05},
    "gt-check": {"balance": 0.1},
    "subsolution": {"slack": 0.05},
    "multiplicity": {"estimate": 0.1},
    "gap": {"window_low": 0.08, "window_high": 0.14},
}

# Metrics whose eps-to-eps error ratios are reported as log2 orders.
ERROR_METRICS = {
    "ch-disk": ("ratio_error",),
    "ch-planar": ("energy_error",),
    "subsolution": ("defect_excess",),
    "gap": ("upper_gap_error", "lower_gap_error"),
}

DEFAULT_CONFIGS = {
    "profile": {"eps": (0.02,), "grid_k": 8},
    "ch-disk": {"eps": (0.08, 0.04, 0.02), "grid_k": 4},
    "ch-planar": {"eps": (0.02,), "grid_k": 8},
    "ok-disk": {"eps": (0.02,), "grid_k": 4},
    "ok-lamellar": {"eps": (0.01,), "grid_k": 8},
    "gt-check": {"eps": (0.02,), "grid_k": 4},
    "subsolution": {"eps": (0.02, 0.01), "grid_k": (24, 48), "radius": 0.6},
    "multiplicity": {"eps": (0.01,), "grid_k": 8},
    "gap": {"eps": (0.01, 0.005, 0.0025), "grid_k": 8},
}


@dataclass(frozen=True)
class StudyConfig:
    """One experiment kind swept over a decreasing list of widths.

    The grid rule is h = eps / grid_k; grid_k may be a single integer or a
    per-eps tuple.  Geometry means the seed disk (radius, center) for the
    2D solves, the wall positions center[0] +- radius for the lamellar
    case, and the graph base radius for the subsolution study.  A mass of
    None keeps the mass of the seed.
    """

    kind: str
    eps: tuple[float, ...]
    grid_k: int | tuple[int, ...] = 8
    well_scale: float = 1.0
    radius: float = 0.25
    center: tuple[float, float] = (0.5, 0.5)
    mass: float | None = None
    force: float = 1.0
    coupling: float = 1.0
    tolerances: dict | None = None
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(
                f"unknown study kind {self.kind!r}; expected one of {', '.join(KINDS)}"
            )
        eps = tuple(float(e) for e in self.eps)
        if not eps:
            raise ValueError("eps list must not be empty")
        if any(e <= 0.0 for e in eps):
            raise ValueError("every eps must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps list must be strictly decreasing")
        object.__setattr__(self, "eps", eps)
        ks = self.grid_k
        ks = (ks,) * len(eps) if np.isscalar(ks) else tuple(ks)
        if len(ks) != len(eps):
            raise ValueError("grid_k list length must match the eps list")
        if any(int(k) != k or k < 4 for k in ks):
            raise ValueError("grid_k entries must be integers >= 4")
        object.__setattr__(
            self, "grid_k", int(ks[0]) if np.isscalar(self.grid_k) else tuple(int(k) for k in ks)
        )
        if not (self.well_scale > 0.0 and np.isfinite(self.well_scale)):
            raise ValueError("well_scale must be positive and finite")
        if not (self.radius > 0.0 and np.isfinite(self.radius)):
            raise ValueError("radius must be positive and finite")
        center = tuple(float(c) for c in self.center)
        if len(center) != 2 or not all(np.isfinite(center)):
            raise ValueError("center must be two finite coordinates")
        object.__setattr__(self, "center", center)
        if self.mass is not None and not np.isfinite(self.mass):
            raise ValueError("mass must be finite (or null to keep the seed mass)")
        if not np.isfinite(self.force) or not np.isfinite(self.coupling):
            raise ValueError("force and coupling must be finite")
        known = set(DEFAULT_TOLERANCES[self.kind])
        given = dict(self.tolerances or {})
        extra = sorted(set(given) - known)
        if extra:
            raise ValueError(
                f"unknown tolerance key(s) for {self.kind}: {', '.join(extra)}"
            )
        merged = {**DEFAULT_TOLERANCES[self.kind], **{k: float(v) for k, v in given.items()}}
        object.__setattr__(self, "tolerances", merged)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "StudyConfig":
        allowed = {f.name for f in fields(cls)}
        extra = sorted(set(mapping) - allowed)
        if extra:
            raise ValueError(f"unknown config key(s): {', '.join(extra)}")
        if "kind" not in mapping:
            raise ValueError("config is missing the required key: kind")
        if "eps" not in mapping:
            raise ValueError("config is missing the required key: eps")
        kwargs = dict(mapping)
        if isinstance(kwargs.get("grid_k"), list):
            kwargs["grid_k"] = tuple(kwargs["grid_k"])
        if isinstance(kwargs.get("eps"), (int, float)):
            kwargs["eps"] = (float(kwargs["eps"]),)
        else:
            kwargs["eps"] = tuple(kwargs["eps"])
        if "center" in kwargs:
            kwargs["center"] = tuple(kwargs["center"])
        return cls(**kwargs)

    def grid_ks(self) -> tuple[int, ...]:
        if np.isscalar(self.grid_k):
            return (int(self.grid_k),) * len(self.eps)
        return tuple(self.grid_k)

    def to_mapping(self) -> dict:
        """Canonical mapping for reports; omits the output location so the
        report content does not depend on where it is written."""
        return {
            "kind": self.kind,
            "eps": list(self.eps),
            "grid_k": list(self.grid_ks()),
            "well_scale": self.well_scale,
            "radius": self.radius,
            "center": list(self.center),
            "mass": self.mass,
            "force": self.force,
            "coupling": self.coupling,
            "tolerances": dict(sorted(self.tolerances.items())),
        }


@dataclass(frozen=True)
class EpsRow:
    eps: float
    metrics: dict
    checks: dict
    error: str | None = None


@dataclass(frozen=True)
class StudyReport:
    config: StudyConfig
    rows: tuple[EpsRow, ...]
    cross_checks: dict
    orders: dict
    passed: bool
    seconds: tuple[float, ...]


def _unit_square(eps: float, k: int) -> Grid:
    n = int(round(k / eps))
    return Grid.rectangle((0.0, 0.0), (1.0, 1.0), (n, n))


def _unit_interval(eps: float, k: int) -> Grid:
    return Grid.interval(0.0, 1.0, int(round(k / eps)))


def _shoelace_radius(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    area = 0.5 * abs(float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))
    return float(np.sqrt(area / np.pi))


def _main_contour(values: np.ndarray, grid: Grid):
    loops = [c for c in extract_contours(values, grid) if c.closed]
    if not loops:
        raise RuntimeError("no closed interface contour found")
    return max(loops, key=lambda c: len(c.points))


def _save_field(out: Path | None, name: str, grid: Grid, values: np.ndarray) -> None:
    if out is not None:
        ScalarField(grid, values).save(out / name)


def _write_crossings(out: Path | None, name: str, crossings: np.ndarray) -> None:
    if out is None:
        return
    with open(out / name, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "x"])
        for i, x in enumerate(crossings):
            writer.writerow([i, "%.17g" % x])


# Profile-study table resolution.  The equipartition defect of the discrete
# profile shrinks like spacing^2 while the achievable interior residual has a
# rounding floor that grows like 1/spacing^2; this spacing meets both bounds
# with margin.
PROFILE_SPACING = 4e-4


def _study_profile(config, tol, well, table, eps, k, out, index):
    table = first_order_correction(
        optimal_profile(well, spacing=PROFILE_SPACING), well
    )
    scale = well.scale
    sigma_exact = scale * SQRT2 / 3.0
    r = np.linspace(-10.0, 10.0, 20001)
    tanh_gap = float(np.max(np.abs(table.phi0_at(r) - np.tanh(scale * r / SQRT2))))
    tail = SQRT2 / (6.0 * scale)
    tail_error = max(
        abs(float(table.phi1[0]) - tail), abs(float(table.phi1[-1]) - tail)
    )
    equi = float(np.max(np.abs(0.5 * table.phi0_prime**2 - well.value(table.phi0))))
    metrics = {
        "sigma": table.sigma,
        "sigma_error": abs(table.sigma - sigma_exact),
        "profile_residual": table.interior_residual(well),
        "tanh_gap": tanh_gap,
        "tail_error": tail_error,
        "equipartition": equi,
    }
    checks = {
        "sigma_within": metrics["sigma_error"] <= tol["sigma"],
        "residual_within": metrics["profile_residual"] <= tol["residual"],
        "tanh_within": tanh_gap <= tol["tanh"],
        "tail_within": tail_error <= tol["tail"],
        "equipartition_within": equi <= tol["equipartition"],
    }
    if out is not None and index == 0:
        table.save(out / "profile-table.dat")
    return metrics, checks


def _solve_disk(config, well, table, eps, k, coupling):
    grid = _unit_square(eps, k)
    dist = disk_signed_distance(grid, config.center, config.radius)
    seed = seed_from_signed_distance(table, dist, eps)
    mass = integrate(seed, grid) if config.mass is None else config.mass
    u, report = solve_conserved(
        well, grid, eps, mass, seed, long_range=coupling
    )
    return grid, u, report


def _study_ch_disk(config, tol, well, table, eps, k, out, index):
    grid, u, rep = _solve_disk(config, well, table, eps, k, 0.0)
    contour = _main_contour(u, grid)
    lam = float(rep.multiplier)
    r_eps = _shoelace_radius(contour.points)
    ratio = lam * r_eps / table.sigma
    kappa = curvature(contour, grid, gradient(u, grid.spacing), window=8.0 * eps)
    balance = curvature_balance(
        contour, kappa, np.full(len(contour.points), lam), table.sigma
    )
    metrics = {
        "lambda": lam,
        "r_eps": r_eps,
        "ratio": ratio,
        "ratio_error": abs(ratio - 1.0),
        "gt_sup": balance.sup,
        "energy": rep.energy,
        "h": grid.spacing,
    }
    checks = {"solver_converged": rep.converged}
    _save_field(out, f"ch-disk-field-{index:02d}.npz", grid, u)
    if out is not None:
        write_contour_csv(
            out / f"ch-disk-interface-{index:02d}.csv",
            contour,
            kappa,
            np.full(len(contour.points), lam),
            table.sigma,
        )
    return metrics, checks


def _study_ch_planar(config, tol, well, table, eps, k, out, index):
    grid = _unit_interval(eps, k)
    x = grid.axis(0)
    seed = table.phi0_at((x - config.center[0]) / eps)
    mass = integrate(seed, grid) if config.mass is None else config.mass
    u, rep = solve_conserved(well, grid, eps, mass, seed)
    energy_error = abs(rep.energy - 2.0 * table.sigma)
    metrics = {
        "lambda": float(rep.multiplier),
        "energy": rep.energy,
        "energy_error": energy_error,
        "h": grid.spacing,
    }
    checks = {
        "solver_converged": rep.converged,
        "energy_within": energy_error <= tol["energy"],
    }
    _save_field(out, f"ch-planar-field-{index:02d}.npz", grid, u)
    _write_crossings(
        out, f"ch-planar-crossings-{index:02d}.csv", zero_crossings_1d(u, grid)
    )
    return metrics, checks


def _study_ok_disk(config, tol, well, table, eps, k, out, index):
    grid, u, rep = _solve_disk(config, well, table, eps, k, config.coupling)
    contour = _main_contour(u, grid)
    lam = float(rep.multiplier)
    w = long_range_potential(u, grid, config.coupling)
    w_at = sample(w, grid, contour.points)
    kappa = curvature(contour, grid, gradient(u, grid.spacing), window=8.0 * eps)
    good = ~np.isnan(kappa)
    residual = table.sigma * kappa[good] + w_at[good] - lam
    scale = float(np.max(np.abs(lam - w_at[good])))
    sup = float(np.max(np.abs(residual)))
    metrics = {
        "lambda": lam,
        "ok_sup": sup,
        "ok_scale": scale,
        "h": grid.spacing,
    }
    checks = {
        "solver_converged": rep.converged,
        "balance_within": sup <= tol["balance"] * scale,
    }
    _save_field(out, f"ok-disk-field-{index:02d}.npz", grid, u)
    if out is not None:
        write_contour_csv(
            out / f"ok-disk-interface-{index:02d}.csv",
            contour,
            kappa,
            lam - w_at,
            table.sigma,
        )
    return metrics, checks


def _study_ok_lamellar(config, tol, well, table, eps, k, out, index):
    grid = _unit_interval(eps, k)
    x = grid.axis(0)
    left = config.center[0] - config.radius
    right = config.center[0] + config.radius
    seed = table.phi0_at((x - left) / eps) - table.phi0_at((x - right) / eps) - 1.0
    mass = integrate(seed, grid) if config.mass is None else config.mass
    u, rep = solve_conserved(
        well, grid, eps, mass, seed, long_range=config.coupling
    )
    lam = float(rep.multiplier)
    w = long_range_potential(u, grid, config.coupling)
    crossings = zero_crossings_1d(u, grid)
    if crossings.size == 0:
        raise RuntimeError("lamellar state lost its interfaces")
    flat_sup = float(np.max(np.abs(lam - np.interp(crossings, x, w))))
    metrics = {
        "lambda": lam,
        "flat_sup": flat_sup,
        "n_crossings": float(crossings.size),
        "h": grid.spacing,
    }
    checks = {
        "solver_converged": rep.converged,
        "flat_within": flat_sup <= tol["flat"],
    }
    _save_field(out, f"ok-lamellar-field-{index:02d}.npz", grid, u)
    _write_crossings(out, f"ok-lamellar-crossings-{index:02d}.csv", crossings)
    return metrics, checks


def _study_gt_check(config, tol, well, table, eps, k, out, index):
    grid, u, rep = _solve_disk(config, well, table, eps, k, 0.0)
    contour = _main_contour(u, grid)
    lam = float(rep.multiplier)
    kappa = curvature(contour, grid, gradient(u, grid.spacing), window=8.0 * eps)
    balance = curvature_balance(
        contour, kappa, np.full(len(contour.points), lam), table.sigma
    )
    # bulk plateaus continue the wells under the constant forcing lam:
    # roots of W'(r) = eps * lam
    lam_minus, lam_plus = bulk_roots(well, eps, lam * 9.0 / 8.0)
    dev = bulk_deviation(u, grid, contour.points, 10.0 * eps, lam_plus, lam_minus)
    metrics = {
        "lambda": lam,
        "gt_sup": balance.sup,
        "bulk_dev": dev,
        "bulk_bound": eps * eps,
        "h": grid.spacing,
    }
    checks = {
        "solver_converged": rep.converged,
        "balance_within": balance.sup <= tol["balance"] * lam,
        "bulk_within": dev <= eps * eps,
    }
    _save_field(out, f"gt-check-field-{index:02d}.npz", grid, u)
    if out is not None:
        write_contour_csv(
            out / f"gt-check-interface-{index:02d}.csv",
            contour,
            kappa,
            np.full(len(contour.points), lam),
            table.sigma,
        )
    return metrics, checks


def _study_subsolution(config, tol, well, table, eps, k, out, index):
    force = config.force
    if not force > 0.0:
        raise ValueError("subsolution studies need positive force")
    curv = 2.0 * force / (3.0 * table.sigma)
    rho = config.radius
    # spherical-cap boundary height; solve_cmc_graph rejects curv*rho >= 1
    cap = (1.0 / curv) - np.sqrt(max((1.0 / curv) ** 2 - rho * rho, 0.0))
    patch = solve_cmc_graph(0.0, rho, (cap, cap), curv, n_cells=4000)
    schedule = make_schedule(eps)
    delta = schedule.saturation
    h = eps / k
    half_cells = int(np.ceil(0.6 * rho / h))
    x_half = half_cells * h
    inside = np.abs(patch.positions) <= x_half
    psi_max = float(np.max(patch.heights[inside]))
    m_lo = int(np.ceil(2.2 * delta / h))
    m_hi = int(np.ceil((psi_max + 2.2 * delta) / h))
    grid = Grid.rectangle(
        (-x_half, -m_lo * h), (x_half, m_hi * h), (2 * half_cells, m_lo + m_hi)
    )
    sub = build_subsolution(patch, schedule, table, force, grid, well)
    cert = verify_subsolution(sub, force, slack=tol["slack"] * force)
    metrics = {
        "max_defect": cert.max_defect,
        "bound": cert.bound,
        "defect_excess": cert.max_defect - (2.0 / 3.0) * force,
        "plateau_minus": sub.plateau_minus,
        "plateau_plus": sub.plateau_plus,
        "h": grid.spacing,
    }
    checks = {"defect_within": cert.passed}
    _save_field(out, f"subsolution-field-{index:02d}.npz", grid, sub.field.values)
    _save_field(out, f"subsolution-defect-{index:02d}.npz", grid, sub.defect.values)
    return metrics, checks


def _study_multiplicity(config, tol, well, table, eps, k, out, index):
    grid = _unit_interval(eps, k)
    x = grid.axis(0)
    center = config.center[0]
    metrics: dict = {"h": grid.spacing}
    exact = True
    within = True
    stack = {}
    for layers in (1, 2, 3):
        offsets = (np.arange(layers) - (layers - 1) / 2.0) * 4.0 * eps
        u = np.zeros_like(x)
        for i, off in enumerate(offsets):
            u += (-1.0) ** i * table.phi0_at((x - center - off) / eps)
        if layers % 2 == 0:
            u -= 1.0
        est = multiplicity_estimate(
            DiffuseMeasure(grid, well, eps, u), table.sigma, center, 8.0 * eps
        )
        metrics[f"est_{layers}"] = est
        exact = exact and round(est) == layers
        within = within and abs(est - layers) <= tol["estimate"]
        stack[f"layers_{layers}"] = u
    checks = {"exact_counts": exact, "estimates_within": within}
    if out is not None:
        np.savez(out / f"multiplicity-fields-{index:02d}.npz", x=x, **stack)
    return metrics, checks


def _study_gap(config, tol, well, table, eps, k, out, index):
    (_, upper, lower), = asymptotic_gap(well, table, config.force, [eps])
    limit = config.force / 9.0
    metrics = {
        "upper_gap": upper,
        "lower_gap": lower,
        "upper_gap_error": abs(upper - limit),
        "lower_gap_error": abs(lower - limit),
    }
    checks = {
        "gaps_positive": upper > 0.0 and lower > 0.0,
        "window_within": (
            tol["window_low"] <= upper <= tol["window_high"]
            and tol["window_low"] <= lower <= tol["window_high"]
        ),
    }
    return metrics, checks


_HANDLERS = {
    "profile": _study_profile,
    "ch-disk": _study_ch_disk,
    "ch-planar": _study_ch_planar,
    "ok-disk": _study_ok_disk,
    "ok-lamellar": _study_ok_lamellar,
    "gt-check": _study_gt_check,
    "subsolution": _study_subsolution,
    "multiplicity": _study_multiplicity,
    "gap": _study_gap,
}


def _cross_checks(config: StudyConfig, rows: list[EpsRow]) -> dict:
    clean = [r for r in rows if r.error is None]
    out: dict = {}
    if config.kind == "ch-disk" and clean:
        errors = [r.metrics["ratio_error"] for r in clean]
        tol = config.tolerances
        out["ratio_first_within"] = errors[0] <= tol["ratio_first"]
        out["ratio_last_within"] = errors[-1] <= tol["ratio_last"]
        out["ratio_strictly_decreasing"] = all(
            b < a for a, b in zip(errors, errors[1:])
        )
    if config.kind == "subsolution" and clean:
        defects = [r.metrics["max_defect"] for r in clean]
        out["defect_non_increasing"] = all(
            b <= a for a, b in zip(defects, defects[1:])
        )
    return out


def _orders(config: StudyConfig, rows: list[EpsRow]) -> dict:
    names = ERROR_METRICS.get(config.kind, ())
    out: dict = {}
    for name in names:
        values = [
            r.metrics.get(name) if r.error is None else None for r in rows
        ]
        ratios = []
        for a, b in zip(values, values[1:]):
            if a is None or b is None or a <= 0.0 or b <= 0.0:
                ratios.append(None)
            else:
                ratios.append(float(np.log2(a / b)))
        if ratios:
            out[name] = ratios
    return out


def run_study(config: StudyConfig) -> StudyReport:
    """Execute every eps entry, collect rows, and write the report files.

    A failure at one eps is recorded in that row and the sweep continues;
    the study passes only if every row completed and every row-level and
    cross-eps check holds.
    """
    well = DoubleWell(scale=config.well_scale)
    table = first_order_correction(optimal_profile(well), well)
    out = None
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
    handler = _HANDLERS[config.kind]
    rows: list[EpsRow] = []
    seconds: list[float] = []
    for index, (eps, k) in enumerate(zip(config.eps, config.grid_ks())):
        start = time.perf_counter()
        try:
            metrics, checks = handler(
                config, config.tolerances, well, table, eps, k, out, index
            )
            rows.append(EpsRow(eps=eps, metrics=_plain(metrics), checks=checks))
        except Exception as exc:
            rows.append(
                EpsRow(
                    eps=eps,
                    metrics={},
                    checks={},
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
        seconds.append(time.perf_counter() - start)
    cross = _cross_checks(config, rows)
    orders = _orders(config, rows)
    passed = (
        all(r.error is None for r in rows)
        and all(all(r.checks.values()) for r in rows)
        and all(cross.values())
    )
    report = StudyReport(
        config=config,
        rows=tuple(rows),
        cross_checks=cross,
        orders=orders,
        passed=passed,
        seconds=tuple(seconds),
    )
    if out is not None:
        write_report(report, out)
    return report


def _plain(metrics: dict) -> dict:
    return {k: float(v) for k, v in metrics.items()}


def report_payload(report: StudyReport) -> dict:
    """Canonical report content: pure function of the configuration."""
    return {
        "config": report.config.to_mapping(),
        "anchors": ANCHORS[report.config.kind],
        "rows": [
            {
                "eps": row.eps,
                "metrics": dict(sorted(row.metrics.items())),
                "checks": dict(sorted(row.checks.items())),
                "error": row.error,
            }
            for row in report.rows
        ],
        "cross_checks": dict(sorted(report.cross_checks.items())),
        "orders": {k: v for k, v in sorted(report.orders.items())},
        "passed": report.passed,
    }


def write_report(report: StudyReport, out: Path) -> None:
    """report.json is canonical (sorted keys, no timings); timings.json is
    the wall-clock sidecar and is allowed to differ between reruns."""
    payload = report_payload(report)
    text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=False)
    (out / "report.json").write_text(text + "\n")
    timing = {
        "seconds_per_eps": list(report.seconds),
        "total_seconds": float(sum(report.seconds)),
    }
    (out / "timings.json").write_text(json.dumps(timing, indent=2) + "\n")


_GEOMETRY_KINDS = {
    ("solve-ch", "disk"): "ch-disk",
    ("solve-ch", "planar"): "ch-planar",
    ("solve-ok", "disk"): "ok-disk",
    ("solve-ok", "lamellar"): "ok-lamellar",
    ("gt-check", "disk"): "gt-check",
    ("subsolution-check", "arc"): "subsolution",
}

_COMMAND_KINDS = {
    "profile": "profile",
    "solve-ch": "ch-disk",
    "solve-ok": "ok-disk",
    "gt-check": "gt-check",
    "subsolution-check": "subsolution",
    "multiplicity": "multiplicity",
    "gap": "gap",
}


def _parse_geometry(command: str, text: str) -> tuple[str, dict]:
    name, _, rest = text.partition(":")
    key = (command, name)
    if key not in _GEOMETRY_KINDS:
        options = sorted(n for c, n in _GEOMETRY_KINDS if c == command)
        raise ValueError(
            f"unknown seed geometry {name!r} for {command}; expected one of "
            f"{', '.join(options) if options else '(none)'}"
        )
    overrides: dict = {}
    if rest:
        parts = [float(p) for p in rest.split(",")]
        if len(parts) not in (1, 3):
            raise ValueError(
                "seed geometry takes NAME, NAME:RADIUS, or NAME:RADIUS,CX,CY"
            )
        overrides["radius"] = parts[0]
        if len(parts) == 3:
            overrides["center"] = (parts[1], parts[2])
    return _GEOMETRY_KINDS[key], overrides


def _parse_eps(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(","))


def _parse_grid_k(text: str):
    parts = [int(p) for p in text.split(",")]
    return parts[0] if len(parts) == 1 else tuple(parts)


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ValueError(f"config file not found: {p}")
    try:
        mapping = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(mapping, dict):
        raise ValueError(f"config file {p} must hold a JSON object")
    return mapping


def _config_from_args(args) -> StudyConfig:
    mapping = _load_config_file(args.config) if args.config else {}
    if args.command == "study":
        if not args.config:
            raise ValueError("the study command requires --config")
        merged = mapping
    else:
        kind = _COMMAND_KINDS[args.command]
        overrides: dict = {}
        if getattr(args, "seed_geometry", None):
            kind, overrides = _parse_geometry(args.command, args.seed_geometry)
        if "kind" in mapping and mapping["kind"] != kind:
            raise ValueError(
                f"config key kind = {mapping['kind']!r} conflicts with the "
                f"{args.command} command (expected {kind!r})"
            )
        merged = {**DEFAULT_CONFIGS[kind], **mapping, **overrides, "kind": kind}
    if args.eps:
        merged["eps"] = _parse_eps(args.eps)
    if args.grid_k:
        merged["grid_k"] = _parse_grid_k(args.grid_k)
    if args.out:
        merged["out_dir"] = args.out
    return StudyConfig.from_mapping(merged)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gtlab",
        description=(
            "curvature-balance studies for diffuse-interface fields: "
            "stationary solves, comparison certificates, and eps sweeps"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "profile": "transition profile table and its closed-form checks",
        "solve-ch": "stationary conserved states (disk or planar seed)",
        "solve-ok": "long-range coupled states (disk or lamellar seed)",
        "gt-check": "curvature balance and bulk plateaus on a solved disk",
        "subsolution-check": "defect certificate of the comparison field",
        "multiplicity": "sheet counts of synthetic layer stacks",
        "gap": "bulk-root versus plateau gap rates",
        "study": "run a study described by a JSON config",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="JSON study configuration file")
        p.add_argument("--out", help="output directory for reports and snapshots")
        p.add_argument("--eps", help="comma-separated decreasing eps list")
        p.add_argument(
            "--grid-k", dest="grid_k", help="cells per eps: one integer or a comma list"
        )
        if name in ("solve-ch", "solve-ok", "gt-check", "subsolution-check"):
            p.add_argument(
                "--seed-geometry",
                dest="seed_geometry",
                help="NAME[:RADIUS[,CX,CY]] (disk, planar, lamellar, or arc)",
            )
    return parser


def _print_summary(report: StudyReport) -> None:
    config = report.config
    print(f"study {config.kind}: eps = {', '.join('%g' % e for e in config.eps)}")
    for row, sec in zip(report.rows, report.seconds):
        if row.error is not None:
            print(f"  eps {row.eps:g}: FAILED ({row.error}) [{sec:.1f}s]")
            continue
        shown = {
            k: v for k, v in row.metrics.items() if k != "h"
        }
        body = ", ".join(f"{k} = {v:.6g}" for k, v in sorted(shown.items()))
        flag = "ok" if all(row.checks.values()) else "CHECK FAILED"
        print(f"  eps {row.eps:g}: {body} [{flag}, {sec:.1f}s]")
    for name, good in sorted(report.cross_checks.items()):
        print(f"  {name}: {'ok' if good else 'FAILED'}")
    print(f"result: {'PASS' if report.passed else 'FAIL'}")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run_study(config)
    _print_summary(report)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
