"""Two-body dynamics, analytic ephemerides, and segment linearization.

Everything in this module works in normalized units (see :class:`ScaleSet`);
physical units only appear at the configuration boundary. The state vector is
x = [r; v] (6,) and the control u (3,) is an inertial thrust acceleration held
zero-order over a segment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import NumericalError

AU_KM = 1.495978707e8
MU_SUN_KM3S2 = 1.32712440018e11
DAY_S = 86400.0

#: Below this radius (normalized length units) the point-mass field is treated
#: as singular and evaluation refuses to continue.
SINGULARITY_RADIUS = 1e-6

_KEPLER_TOL = 1e-13
_KEPLER_MAX_ITER = 50


@dataclass(frozen=True)
class ScaleSet:
    """Normalization constants: canonical length and time units.

    Velocities, accelerations and gravitational parameters are derived. With
    :meth:`heliocentric` defaults the Sun's gravitational parameter is exactly
    1 in normalized units.
    """

    length_km: float
    time_s: float

    @property
    def velocity_kms(self) -> float:
        return self.length_km / self.time_s

    @property
    def accel_kms2(self) -> float:
        return self.length_km / self.time_s**2

    @property
    def mu_km3s2(self) -> float:
        return self.length_km**3 / self.time_s**2

    @classmethod
    def heliocentric(cls, length_km: float = AU_KM, mu_km3s2: float = MU_SUN_KM3S2) -> "ScaleSet":
        """Canonical heliocentric scales: 1 AU and the time unit that makes mu_sun = 1."""
        return cls(length_km=length_km, time_s=float(np.sqrt(length_km**3 / mu_km3s2)))

    def state_to_norm(self, r_km: np.ndarray, v_kms: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(r_km) / self.length_km, np.asarray(v_kms) / self.velocity_kms])

    def state_to_phys(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x)
        return x[:3] * self.length_km, x[3:] * self.velocity_kms


@dataclass(frozen=True)
class BodyEphemeris:
    """Keplerian elements of a body around the central mass, normalized units.

    Angles are radians, ``a`` is in normalized length units, ``epoch`` is the
    normalized time at which ``mean_anomaly`` applies, and ``mu`` is the
    central body's normalized gravitational parameter.
    """

    name: str
    a: float
    e: float
    inc: float
    raan: float
    argp: float
    mean_anomaly: float
    epoch: float
    mu: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.e < 1.0):
            raise ValueError(f"ephemeris for {self.name!r} needs 0 <= e < 1, got {self.e}")
        if self.a <= 0.0:
            raise ValueError(f"ephemeris for {self.name!r} needs a > 0, got {self.a}")

    @property
    def mean_motion(self) -> float:
        return float(np.sqrt(self.mu / self.a**3))

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.mean_motion


@dataclass(frozen=True)
class TimeGrid:
    """Node epochs and node kinds for one optimization horizon.

    ``epochs`` has N+1 entries; segment k runs from node k to node k+1.
    ``kinds[k]`` labels node k and its outgoing segment: ``"thrust"`` and
    ``"coast"`` segments have strictly positive duration, a ``"ga"`` node is a
    zero-length gravity-assist segment (t_k == t_{k+1} exactly). The final
    node must not be a GA node.
    """

    epochs: tuple[float, ...]
    kinds: tuple[str, ...]

    def __post_init__(self):
        if len(self.epochs) != len(self.kinds):
            raise ValueError("epochs and kinds must have equal length")
        if len(self.epochs) < 2:
            raise ValueError("a grid needs at least one segment")
        allowed = {"thrust", "coast", "ga"}
        bad = set(self.kinds) - allowed
        if bad:
            raise ValueError(f"unknown node kinds: {sorted(bad)}")
        if self.kinds[-1] == "ga":
            raise ValueError("the final node cannot be a gravity-assist node")
        for k in range(self.n_segments):
            dt = self.epochs[k + 1] - self.epochs[k]
            if self.kinds[k] == "ga":
                if dt != 0.0:
                    raise ValueError(f"GA segment {k} must have exactly zero duration, got {dt}")
            elif dt <= 0.0:
                raise ValueError(f"segment {k} must have positive duration, got {dt}")

    @property
    def n_nodes(self) -> int:
        return len(self.epochs)

    @property
    def n_segments(self) -> int:
        return len(self.epochs) - 1

    def dt(self, k: int) -> float:
        return self.epochs[k + 1] - self.epochs[k]

    @property
    def dts(self) -> np.ndarray:
        return np.diff(np.asarray(self.epochs))

    def is_ga(self, k: int) -> bool:
        return self.kinds[k] == "ga"

    @property
    def ga_segments(self) -> tuple[int, ...]:
        return tuple(k for k in range(self.n_segments) if self.kinds[k] == "ga")


@dataclass(frozen=True)
class LinearSegment:
    """Discrete-time linearization of one segment about a reference point.

    x_{k+1} ~ A x_k + B u_k + c + G_exe w_exe + G_proc w, with w_exe (3,) and
    w (n_w,) independent standard normal vectors. The affine map reproduces
    the nonlinear flow of the reference exactly:
    A @ x_ref + B @ u_ref + c == flow(x_ref, u_ref).
    """

    index: int
    t0: float
    t1: float
    x_ref: np.ndarray
    u_ref: np.ndarray
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    G_exe: np.ndarray
    G_proc: np.ndarray

    @property
    def dt(self) -> float:
        return self.t1 - self.t0


def eval_dynamics(x: np.ndarray, u: np.ndarray, mu: float = 1.0) -> np.ndarray:
    """Right-hand side of the controlled two-body equations of motion.

    Args:
        x: state [r; v], shape (6,), normalized units.
        u: thrust acceleration, shape (3,).
        mu: central body gravitational parameter (0 switches gravity off,
            which is how free double-integrator dynamics are expressed).

    Returns:
        xdot, shape (6,).
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    r = x[:3]
    out = np.empty(6)
    out[:3] = x[3:]
    if mu != 0.0:
        rn = float(np.linalg.norm(r))
        if rn < SINGULARITY_RADIUS:
            raise NumericalError(f"state inside singularity radius: |r| = {rn:.3e}")
        out[3:] = -mu / rn**3 * r + u
    else:
        out[3:] = u
    return out


def dynamics_jacobian(x: np.ndarray, mu: float = 1.0) -> np.ndarray:
    """State Jacobian d(xdot)/dx of :func:`eval_dynamics` (control-free part)."""
    J = np.zeros((6, 6))
    J[:3, 3:] = np.eye(3)
    if mu != 0.0:
        r = np.asarray(x, dtype=float)[:3]
        rn = float(np.linalg.norm(r))
        if rn < SINGULARITY_RADIUS:
            raise NumericalError(f"state inside singularity radius: |r| = {rn:.3e}")
        J[3:, :3] = mu * (3.0 * np.outer(r, r) / rn**5 - np.eye(3) / rn**3)
    return J


def _solve_kepler(M: float, e: float) -> float:
    """Solve E - e sin E = M for elliptic orbits by Newton iteration."""
    M = float(np.mod(M + np.pi, 2.0 * np.pi) - np.pi)
    E = M if e < 0.8 else np.pi * np.sign(M) if M != 0.0 else 0.0
    if E == 0.0 and M == 0.0:
        return 0.0
    for _ in range(_KEPLER_MAX_ITER):
        f = E - e * np.sin(E) - M
        E -= f / (1.0 - e * np.cos(E))
        if abs(f) < _KEPLER_TOL:
            return float(E)
    raise NumericalError(f"Kepler iteration did not converge (M={M}, e={e})")


def planet_state(body: BodyEphemeris, t: float) -> np.ndarray:
    """Cartesian state of a body at normalized time t from its elements.

    Args:
        body: Keplerian elements, normalized units.
        t: normalized epoch.

    Returns:
        [r; v], shape (6,), normalized units.
    """
    M = body.mean_anomaly + body.mean_motion * (t - body.epoch)
    E = _solve_kepler(M, body.e)
    cE, sE = np.cos(E), np.sin(E)
    b_fac = np.sqrt(1.0 - body.e**2)
    r_pf = body.a * np.array([cE - body.e, b_fac * sE, 0.0])
    rn = body.a * (1.0 - body.e * cE)
    v_pf = np.sqrt(body.mu * body.a) / rn * np.array([-sE, b_fac * cE, 0.0])

    co, so = np.cos(body.raan), np.sin(body.raan)
    ci, si = np.cos(body.inc), np.sin(body.inc)
    cw, sw = np.cos(body.argp), np.sin(body.argp)
    rot = np.array(
        [
            [co * cw - so * sw * ci, -co * sw - so * cw * ci, so * si],
            [so * cw + co * sw * ci, -so * sw + co * cw * ci, -co * si],
            [sw * si, cw * si, ci],
        ]
    )
    return np.concatenate([rot @ r_pf, rot @ v_pf])


def _stumpff_c(z: float) -> float:
    """Stumpff C(z) = (1 - cos sqrt(z)) / z, extended by series through z = 0."""
    if z > 1e-7:
        return (1.0 - np.cos(np.sqrt(z))) / z
    if z < -1e-7:
        return (np.cosh(np.sqrt(-z)) - 1.0) / (-z)
    return 0.5 - z / 24.0 + z * z / 720.0


def _stumpff_s(z: float) -> float:
    """Stumpff S(z) = (sqrt(z) - sin sqrt(z)) / z^{3/2}, series through z = 0."""
    if z > 1e-7:
        sz = np.sqrt(z)
        return (sz - np.sin(sz)) / sz**3
    if z < -1e-7:
        sz = np.sqrt(-z)
        return (np.sinh(sz) - sz) / sz**3
    return 1.0 / 6.0 - z / 120.0 + z * z / 5040.0


def lambert(
    r1: np.ndarray,
    r2: np.ndarray,
    tof: float,
    mu: float = 1.0,
    prograde: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Single-revolution two-point boundary value problem of Kepler motion.

    Finds the conic connecting position ``r1`` to ``r2`` in flight time
    ``tof`` via the universal-variable formulation: the transfer time is a
    monotone function of the universal parameter z, solved by bracketed
    root finding between the hyperbolic floor and the single-revolution
    ellipse limit. The transfer plane is taken from r1 x r2; ``prograde``
    picks the branch whose angular momentum has a nonnegative z component.

    Args:
        r1, r2: boundary positions, shape (3,), normalized units.
        tof: flight time, > 0.
        mu: central gravitational parameter.
        prograde: sweep direction selector.

    Returns:
        (v1, v2): velocities at departure and arrival, shape (3,) each.

    Raises:
        NumericalError: collinear geometry (transfer angle 0 or pi, where
            the plane is undefined) or no single-revolution solution.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if tof <= 0.0 or mu <= 0.0:
        raise ValueError("lambert needs tof > 0 and mu > 0")
    r1n = float(np.linalg.norm(r1))
    r2n = float(np.linalg.norm(r2))
    if r1n < SINGULARITY_RADIUS or r2n < SINGULARITY_RADIUS:
        raise NumericalError("lambert endpoints inside the singularity radius")

    cross = np.cross(r1, r2)
    cos_dt = float(np.dot(r1, r2) / (r1n * r2n))
    cos_dt = min(1.0, max(-1.0, cos_dt))
    sin_mag = float(np.linalg.norm(cross) / (r1n * r2n))
    if prograde == (cross[2] >= 0.0):
        sin_dt = sin_mag
    else:
        sin_dt = -sin_mag
    if abs(sin_dt) < 1e-12 or 1.0 - cos_dt < 1e-12:
        raise NumericalError("lambert geometry is collinear; transfer plane undefined")
    A = sin_dt * np.sqrt(r1n * r2n / (1.0 - cos_dt))

    def y_of(z: float) -> float:
        return r1n + r2n + A * (z * _stumpff_s(z) - 1.0) / np.sqrt(_stumpff_c(z))

    def tof_of(z: float) -> float:
        y = y_of(z)
        if y < 0.0:
            return -np.inf
        chi = np.sqrt(y / _stumpff_c(z))
        return float((chi**3 * _stumpff_s(z) + A * np.sqrt(y)) / np.sqrt(mu))

    # stop just short of z = 4 pi^2 where C(z) -> 0 (full-revolution limit);
    # the flight time there is already astronomically large
    z_hi = 4.0 * np.pi**2 * (1.0 - 1e-4)
    z_lo = -40.0 * np.pi**2
    if y_of(z_lo) < 0.0:
        # short-way geometry: walk the lower bracket up to where y turns
        # positive (y is increasing in z)
        lo, hi = z_lo, z_hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if y_of(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        z_lo = hi
    if not tof_of(z_lo) <= tof <= tof_of(z_hi):
        raise NumericalError(
            f"no single-revolution transfer of duration {tof} for this geometry"
        )
    z_star = brentq(lambda z: tof_of(z) - tof, z_lo, z_hi, xtol=1e-13, rtol=1e-15)

    y = y_of(float(z_star))
    f = 1.0 - y / r1n
    g = A * np.sqrt(y / mu)
    gdot = 1.0 - y / r2n
    if g == 0.0 or not np.isfinite(g):
        raise NumericalError(
            f"transfer of duration {tof} is degenerate for this geometry"
        )
    v1 = (r2 - f * r1) / g
    v2 = (gdot * r2 - r1) / g
    if not (np.all(np.isfinite(v1)) and np.all(np.isfinite(v2))):
        raise NumericalError(
            f"transfer of duration {tof} is degenerate for this geometry"
        )
    return v1, v2


def propagate(
    x0: np.ndarray,
    u: np.ndarray,
    t0: float,
    t1: float,
    mu: float = 1.0,
    rtol: float = 1e-12,
    atol: float = 1e-12,
) -> np.ndarray:
    """Propagate the controlled two-body flow with zero-order-hold control.

    Integrates with an adaptive Dormand-Prince scheme (DOP853). Backward
    propagation (t1 < t0) is allowed.

    Returns:
        State at t1, shape (6,).
    """
    x0 = np.asarray(x0, dtype=float)
    if t1 == t0:
        return x0.copy()
    u = np.asarray(u, dtype=float)
    sol = solve_ivp(
        lambda t, x: eval_dynamics(x, u, mu),
        (t0, t1),
        x0,
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=False,
    )
    if not sol.success:
        raise NumericalError(f"propagation failed over [{t0}, {t1}]: {sol.message}")
    return sol.y[:, -1].copy()


#: Control influence matrix lifting an acceleration into the state rate.
F_THRUST = np.vstack([np.zeros((3, 3)), np.eye(3)])


def linearize_segment(
    index: int,
    x_ref: np.ndarray,
    u_ref: np.ndarray,
    t0: float,
    t1: float,
    mu: float = 1.0,
    exe_error_sqrt: np.ndarray | None = None,
    proc_noise_sqrt: np.ndarray | None = None,
    rtol: float = 1e-12,
    atol: float = 1e-12,
) -> LinearSegment:
    """Linearize one thrust/coast segment about a reference point.

    Integrates the variational equations alongside the reference flow:
    the state transition matrix A = Phi(t1, t0), the control convolution
    B = int Phi(t1, s) F ds, and (when process noise is present) the
    Lyapunov companion Q = int Phi(t1, s) G G' Phi(t1, s)' ds whose symmetric
    factor becomes the discrete noise map.

    Args:
        index: segment index within the grid (bookkeeping only).
        x_ref: reference state at t0, shape (6,).
        u_ref: reference control over the segment, shape (3,).
        t0, t1: segment bounds, t1 > t0.
        mu: central gravitational parameter.
        exe_error_sqrt: execution-error square root in acceleration space,
            shape (3, 3) (typically the Gates matrix at u_ref), or None.
        proc_noise_sqrt: continuous process-noise square root, shape (6, n_w)
            (acceleration rows only for the white-acceleration model), or None.

    Returns:
        LinearSegment with A, B, c, and discrete noise maps. The affine part
        satisfies A @ x_ref + B @ u_ref + c == propagate(x_ref, u_ref, t0, t1)
        to integration tolerance.
    """
    if t1 <= t0:
        raise ValueError(f"segment {index}: need t1 > t0, got [{t0}, {t1}]")
    x_ref = np.asarray(x_ref, dtype=float)
    u_ref = np.asarray(u_ref, dtype=float)
    with_q = proc_noise_sqrt is not None
    GGt = None
    if with_q:
        Gc = np.asarray(proc_noise_sqrt, dtype=float)
        GGt = Gc @ Gc.T

    n_q = 36 if with_q else 0

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        x = y[:6]
        Phi = y[6:42].reshape(6, 6)
        Psi = y[42:60].reshape(6, 3)
        J = dynamics_jacobian(x, mu)
        out = np.empty(y.shape)
        out[:6] = eval_dynamics(x, u_ref, mu)
        out[6:42] = (J @ Phi).ravel()
        out[42:60] = (J @ Psi + F_THRUST).ravel()
        if with_q:
            Q = y[60:96].reshape(6, 6)
            out[60:96] = (J @ Q + Q @ J.T + GGt).ravel()
        return out

    y0 = np.zeros(60 + n_q)
    y0[:6] = x_ref
    y0[6:42] = np.eye(6).ravel()
    sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise NumericalError(f"variational integration failed on segment {index}: {sol.message}")
    yf = sol.y[:, -1]
    x1 = yf[:6]
    A = yf[6:42].reshape(6, 6).copy()
    B = yf[42:60].reshape(6, 3).copy()
    c = x1 - A @ x_ref - B @ u_ref

    if exe_error_sqrt is not None:
        G_exe = B @ np.asarray(exe_error_sqrt, dtype=float)
    else:
        G_exe = np.zeros((6, 3))
    if with_q:
        Q = yf[60:96].reshape(6, 6)
        G_proc = psd_sqrt(0.5 * (Q + Q.T))
    else:
        G_proc = np.zeros((6, 0))

    return LinearSegment(
        index=index, t0=t0, t1=t1, x_ref=x_ref.copy(), u_ref=u_ref.copy(),
        A=A, B=B, c=c, G_exe=G_exe, G_proc=G_proc,
    )


def psd_sqrt(M: np.ndarray, rel_reg: float = 1e-14) -> np.ndarray:
    """Lower-triangular Cholesky factor with trace-scaled regularization.

    Adds ``rel_reg * trace(M) / n * I`` before factoring so that nearly
    singular positive-semidefinite matrices (zero-noise or perfectly observed
    directions) still factor; a zero matrix returns zero.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    tr = float(np.trace(M))
    if tr <= 0.0:
        if np.allclose(M, 0.0):
            return np.zeros_like(M)
        raise NumericalError("matrix with non-positive trace is not PSD")
    shift = rel_reg * tr / n
    for bump in (1.0, 1e2, 1e4):
        try:
            return np.linalg.cholesky(M + bump * shift * np.eye(n))
        except np.linalg.LinAlgError:
            continue
    raise NumericalError("matrix is not positive semidefinite within regularization budget")
