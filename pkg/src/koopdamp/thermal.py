"""Effective-diffusion temperature field with four VAV packaged AC units.

The field obeys  dtheta/dt = d_eff * laplacian(theta) + p_air / (rho * c_p)
on a rectangular cell grid (explicit Euler in time, centered differences in
space, ghost cells for the boundary). Each PTAC contributes a bulk-convection
heat source at its outlet cell, driven by a first-order lag with delay on the
local temperature and a bang-bang variable-air-volume switch about the
set-point. An ancillary per-unit heat input port is exposed for feedback
control.
"""

import csv
from collections import deque
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (ConfigurationError, IngestionError,
                     InsufficientDataError, NumericalInstabilityError)
from .geometry import DOOR, WINDOW, RoomGeometry


@dataclass(frozen=True)
class ThermalParams:
    """Field parameters. Construction enforces the explicit-Euler stability
    bound d_eff*dt*(1/dx^2 + 1/dy^2) <= 1/2 for the geometry in use."""

    d_eff: float = 0.5        # m^2/s
    rho: float = 1.176        # kg/m^3
    c_p: float = 1.007        # J/(kg K)
    w_window: float = 0.091   # W/(m^2 K)
    dt: float = 1.0           # s

    def __post_init__(self):
        if min(self.d_eff, self.rho, self.c_p, self.w_window, self.dt) <= 0:
            raise ConfigurationError("thermal parameters must be positive")

    def check_cfl(self, geometry: RoomGeometry):
        num = self.d_eff * self.dt * (1.0 / geometry.dx ** 2
                                      + 1.0 / geometry.dy ** 2)
        if num > 0.5:
            raise ConfigurationError(
                f"CFL violation: d_eff*dt*(1/dx^2+1/dy^2) = {num:.4f} > 0.5")
        return num

    def k_conv(self) -> float:
        """Convective boundary coefficient W/(rho*c_p*d_eff), 1/m."""
        return self.w_window / (self.rho * self.c_p * self.d_eff)


@dataclass(frozen=True)
class PtacParams:
    """Per-conditioner constants: lag/delay dynamics, VAV switch levels and
    bulk-convection outlet volume. ``v0`` defaults to the scenario's
    outlet-cell footprint times a 1 m slab."""

    t_s: float = 17.0 * 60.0    # s
    l_delay: float = 6.0 * 60.0  # s
    g_gain: float = 1.0
    theta_ref: float = 27.0     # deg.C
    theta_air: float = 17.0     # deg.C
    v_on: float = 0.25          # m^3/s
    v_off: float = 0.13         # m^3/s
    v0: float = 2.43            # m^3

    def __post_init__(self):
        if not (self.v_on > self.v_off > 0):
            raise ConfigurationError("need v_on > v_off > 0")
        if self.t_s <= 0 or self.l_delay < 0 or self.v0 <= 0:
            raise ConfigurationError("need t_s > 0, l_delay >= 0, v0 > 0")


@dataclass
class TemperatureField:
    """Grid of cell temperatures (deg.C) at one instant."""

    values: np.ndarray
    time: float = 0.0

    @classmethod
    def uniform(cls, geometry: RoomGeometry, temp: float,
                time: float = 0.0) -> "TemperatureField":
        return cls(np.full(geometry.shape, float(temp)), time)

    def copy(self) -> "TemperatureField":
        return TemperatureField(self.values.copy(), self.time)


class ExogenousSignal:
    """Piecewise-linear outside-temperature signal; queries outside the
    sample range clamp to the first/last value."""

    def __init__(self, times, values):
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size == 0:
            raise IngestionError("exogenous signal needs matching 1-d arrays")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise IngestionError("exogenous sample times must be strictly "
                                 "increasing")
        self.times = t
        self.values = v

    def __call__(self, t):
        return float(np.interp(t, self.times, self.values))

    @classmethod
    def constant(cls, value: float) -> "ExogenousSignal":
        return cls([0.0], [value])

    @classmethod
    def ramp(cls, start: float, stop: float, t_end: float,
             t_start: float = 0.0) -> "ExogenousSignal":
        return cls([t_start, t_end], [start, stop])

    @classmethod
    def from_csv(cls, path) -> "ExogenousSignal":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise IngestionError(f"{path}: empty exogenous file")
            if [h.strip() for h in header] != ["t_seconds", "theta_ext_degC"]:
                raise IngestionError(
                    f"{path}: expected header 't_seconds,theta_ext_degC', "
                    f"got {','.join(header)!r}")
            rows = [(float(r[0]), float(r[1])) for r in reader if r]
        if not rows:
            raise IngestionError(f"{path}: no samples")
        t, v = zip(*rows)
        return cls(t, v)


class PtacUnit:
    """State of one packaged AC: lagged temperature, outlet-temperature
    history ring buffer, and the last commanded air volume."""

    def __init__(self, params: PtacParams, dt: float, initial_temp: float,
                 t0: float = 0.0):
        self.params = params
        self.theta_p = params.g_gain * float(initial_temp)
        self.current_v_air = params.v_off
        # Buffer spans at least l_delay + dt so the delayed lookup always
        # has a bracketing pair; primed with the initial outlet temperature.
        n_hist = int(np.ceil(params.l_delay / dt)) + 2
        self.buffer = deque(maxlen=n_hist)
        for k in range(n_hist - 1, 0, -1):
            self.buffer.append((t0 - k * dt, float(initial_temp)))
        self.buffer.append((t0, float(initial_temp)))

    def observe(self, t: float, theta_outlet: float):
        """Append the current outlet-cell temperature to the history."""
        self.buffer.append((float(t), float(theta_outlet)))

    def delayed_temp(self, t: float) -> float:
        """Linear interpolation of the buffered history at time
        t - l_delay; clamps at the oldest primed entry during warm-up."""
        target = t - self.params.l_delay
        buf = self.buffer
        if target <= buf[0][0]:
            return buf[0][1]
        for k in range(len(buf) - 1, -1, -1):
            tk, vk = buf[k]
            if tk <= target:
                tn, vn = buf[k + 1] if k + 1 < len(buf) else (tk, vk)
                if tn == tk:
                    return vk
                w = (target - tk) / (tn - tk)
                return (1.0 - w) * vk + w * vn
        return buf[0][1]

    def lag_update(self, theta_delayed: float, dt: float):
        """Explicit Euler step of the first-order lag
        d(theta_p)/dt = -(theta_p - g*theta_delayed)/t_s."""
        p = self.params
        self.theta_p += dt * (-(self.theta_p
                                - p.g_gain * theta_delayed) / p.t_s)


def vav_switch(theta_delayed: float, params: PtacParams) -> float:
    """Bang-bang air-volume law: V_on above the set-point (strict), V_off
    otherwise (equality included)."""
    return params.v_on if theta_delayed > params.theta_ref else params.v_off


def bulk_convection_heat(unit: PtacUnit, theta_air: float,
                         params: PtacParams,
                         thermal: ThermalParams) -> float:
    """Bulk-convection heat at the outlet cell, W/m^3:
    v_air * (theta_air - theta_p) * rho * c_p / V0."""
    return (unit.current_v_air * (theta_air - unit.theta_p)
            * thermal.rho * thermal.c_p / params.v0)


def ptac_lag_step(unit: PtacUnit, field: TemperatureField,
                  geometry: RoomGeometry, params: PtacParams,
                  dt: float, ptac_index: int = 0) -> PtacUnit:
    """Advance one unit across a field step at time ``field.time``: record
    the outlet temperature, look up the delayed value, refresh the VAV
    volume and Euler-update the lag state. Returns the mutated unit."""
    i, j = geometry.ptac_cells[ptac_index]
    t = field.time
    if unit.buffer[-1][0] < t:
        unit.observe(t, field.values[i, j])
    theta_del = unit.delayed_temp(t)
    unit.current_v_air = vav_switch(theta_del, params)
    unit.lag_update(theta_del, dt)
    return unit


def apply_boundary(field: TemperatureField, geometry: RoomGeometry,
                   params: ThermalParams, theta_ext: float) -> np.ndarray:
    """Return the (nx+2, ny+2) ghost-padded grid.

    Wall segments mirror the boundary cell (zero normal gradient); window
    and door segments impose d(theta)/dn = K_conv*(theta_ext - theta) via a
    one-sided ghost, with K_conv = W/(rho*c_p*d_eff). The tangential
    direction needs no ghost (handled by the interior stencil).
    """
    v = field.values
    nx, ny = geometry.shape
    k_conv = params.k_conv()
    pad = np.empty((nx + 2, ny + 2), dtype=v.dtype)
    pad[1:-1, 1:-1] = v

    def ghost(cells, labels, dn):
        cells = np.asarray(cells, dtype=float)
        open_mask = np.array([lab in (WINDOW, DOOR) for lab in labels])
        out = cells.copy()
        out[open_mask] = (cells[open_mask]
                          + dn * k_conv * (theta_ext - cells[open_mask]))
        return out

    b = geometry.boundary
    pad[0, 1:-1] = ghost(v[0, :], b["left"], geometry.dx)
    pad[-1, 1:-1] = ghost(v[-1, :], b["right"], geometry.dx)
    pad[1:-1, 0] = ghost(v[:, 0], b["bottom"], geometry.dy)
    pad[1:-1, -1] = ghost(v[:, -1], b["top"], geometry.dy)
    # Corners of the padding are never read by the 5-point stencil.
    pad[0, 0] = pad[1, 1]
    pad[0, -1] = pad[1, -2]
    pad[-1, 0] = pad[-2, 1]
    pad[-1, -1] = pad[-2, -2]
    return pad


def step_field(field: TemperatureField, heat: np.ndarray,
               params: ThermalParams, geometry: RoomGeometry,
               theta_ext: float) -> TemperatureField:
    """One explicit Euler step of the diffusion equation with volumetric
    heat sources (W/m^3). Raises NumericalInstabilityError naming the first
    non-finite cell."""
    heat = np.asarray(heat, dtype=float)
    if heat.shape != geometry.shape:
        raise ConfigurationError(
            f"heat array shape {heat.shape} != grid {geometry.shape}")
    pad = apply_boundary(field, geometry, params, theta_ext)
    c = pad[1:-1, 1:-1]
    lap = ((pad[2:, 1:-1] - 2.0 * c + pad[:-2, 1:-1]) / geometry.dx ** 2
           + (pad[1:-1, 2:] - 2.0 * c + pad[1:-1, :-2]) / geometry.dy ** 2)
    new = c + params.dt * (params.d_eff * lap
                           + heat / (params.rho * params.c_p))
    t_new = field.time + params.dt
    if not np.all(np.isfinite(new)):
        bad = np.argwhere(~np.isfinite(new))[0]
        raise NumericalInstabilityError(
            f"non-finite temperature at cell ({bad[0]},{bad[1]}) "
            f"at t={t_new:.1f}s", time=t_new, cell=(int(bad[0]), int(bad[1])))
    return TemperatureField(new, t_new)


@dataclass
class Trajectory:
    """Sampled record of one run: probe state x (deg.C about the set-point),
    ancillary inputs u (W/m^3) and raw probe temperatures."""

    t: np.ndarray          # (N,)
    x: np.ndarray          # (N, 4)
    u: np.ndarray          # (N, 4)
    theta: np.ndarray      # (N, 4)
    sample_period: float = 60.0

    CSV_HEADER = ("t,x1,x2,x3,x4,u1,u2,u3,u4,"
                  "theta15,theta17,theta19,theta21")

    def __len__(self):
        return self.t.size

    def window(self, t0: float, t1: float) -> "Trajectory":
        """Sub-trajectory with t0 <= t <= t1."""
        m = (self.t >= t0) & (self.t <= t1)
        return Trajectory(self.t[m], self.x[m], self.u[m], self.theta[m],
                          self.sample_period)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for k in range(len(self)):
                row = ([self.t[k]] + list(self.x[k]) + list(self.u[k])
                       + list(self.theta[k]))
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            header = fh.readline().strip()
            if header != cls.CSV_HEADER:
                raise IngestionError(
                    f"{path}: unexpected trajectory header {header!r}")
            data = [[float(v) for v in line.split(",")]
                    for line in fh if line.strip()]
        if not data:
            raise IngestionError(f"{path}: empty trajectory")
        arr = np.asarray(data)
        t = arr[:, 0]
        h = float(t[1] - t[0]) if t.size > 1 else 0.0
        return cls(t, arr[:, 1:5], arr[:, 5:9], arr[:, 9:13], h)


def _probe_temps(values: np.ndarray, geometry: RoomGeometry) -> np.ndarray:
    return np.array([values[i, j] for (i, j) in geometry.probe_cells])


def simulate(scenario, controller=None, record_fields: bool = False):
    """Run the coupled field + 4-PTAC system over the scenario horizon.

    ``controller``, when given, is called as controller(t, x) at every
    sampling instant (x is the 4-vector of detrended probe temperatures)
    and must return the 4-vector of ancillary heat inputs in W/m^3, held
    between updates. Returns a Trajectory, or (Trajectory, frames) with
    ``record_fields`` where frames is a list of (t, grid copy) pairs
    decimated per the scenario.

    Raises NumericalInstabilityError (with the failure time) if the field
    leaves the finite range.
    """
    geom = scenario.geometry
    thermal = scenario.thermal
    ptac = scenario.ptac
    thermal.check_cfl(geom)
    dt = thermal.dt
    h = scenario.sample_period
    steps_per_sample = round(h / dt)
    if abs(steps_per_sample * dt - h) > 1e-9 * max(h, 1.0):
        raise ConfigurationError("sample_period must be a multiple of dt")
    n_steps = round(scenario.t_end / dt)
    if n_steps < 1:
        raise ConfigurationError("scenario duration shorter than one step")

    exo = scenario.build_exogenous()
    field = TemperatureField.uniform(geom, scenario.initial_temp)
    units = [PtacUnit(ptac, dt, scenario.initial_temp) for _ in range(4)]
    theta_ref = ptac.theta_ref

    # "moving_average" samples x as the oscillatory component: probe
    # temperature minus a trailing mean over ma_window (primed with the
    # initial temperature). "setpoint" subtracts theta_ref.
    use_ma = scenario.detrend_mode == "moving_average"
    if use_ma:
        ma_len = max(2, round(scenario.ma_window / h))
        ma_buf = deque([np.full(4, float(scenario.initial_temp))] * ma_len,
                       maxlen=ma_len)

    frame_every = 0
    if record_fields and scenario.field_history_every > 0:
        frame_every = round(scenario.field_history_every / dt)
    frames = []

    rec_t, rec_x, rec_u, rec_th = [], [], [], []
    u_hold = np.zeros(4)

    for k in range(n_steps + 1):
        t = k * dt
        theta_probes = _probe_temps(field.values, geom)
        if k % steps_per_sample == 0:
            if use_ma:
                baseline = np.mean(ma_buf, axis=0)
                ma_buf.append(theta_probes)
                x = theta_probes - baseline
            else:
                x = theta_probes - theta_ref
            if controller is not None:
                u_hold = np.asarray(controller(t, x), dtype=float)
                if u_hold.shape != (4,):
                    raise ConfigurationError(
                        "controller must return a 4-vector of W/m^3")
            rec_t.append(t)
            rec_x.append(x)
            rec_u.append(u_hold.copy())
            rec_th.append(theta_probes)
        if frame_every and k % frame_every == 0:
            frames.append((t, field.values.copy()))
        if k == n_steps:
            break

        theta_ext = exo(t)
        heat = np.zeros(geom.shape)
        for idx, unit in enumerate(units):
            i, j = geom.ptac_cells[idx]
            unit.observe(t, field.values[i, j])
            theta_del = unit.delayed_temp(t)
            unit.current_v_air = vav_switch(theta_del, ptac)
            p_air = bulk_convection_heat(unit, ptac.theta_air, ptac, thermal)
            heat[i, j] += p_air + u_hold[idx]
            unit.lag_update(theta_del, dt)
        field = step_field(field, heat, thermal, geom, theta_ext)

    traj = Trajectory(np.asarray(rec_t), np.asarray(rec_x),
                      np.asarray(rec_u), np.asarray(rec_th), h)
    if record_fields:
        return traj, frames
    return traj


def extract_probe_state(trajectory: Trajectory, mode: str = "setpoint",
                        theta_ref: float = 27.0,
                        ma_window: float = 1800.0) -> np.ndarray:
    """Detrended probe state x(t), shape (N, 4).

    "setpoint" subtracts theta_ref; "moving_average" subtracts a centered
    moving average of each channel (window ``ma_window`` seconds).
    """
    if len(trajectory) == 0:
        raise InsufficientDataError("empty trajectory")
    if mode == "setpoint":
        return trajectory.theta - theta_ref
    if mode == "moving_average":
        h = trajectory.sample_period or 1.0
        half = max(1, int(round(ma_window / (2 * h))))
        theta = trajectory.theta
        out = np.empty_like(theta)
        n = theta.shape[0]
        for k in range(n):
            lo, hi = max(0, k - half), min(n, k + half + 1)
            out[k] = theta[k] - theta[lo:hi].mean(axis=0)
        return out
    raise ConfigurationError(f"unknown detrend mode {mode!r}")
