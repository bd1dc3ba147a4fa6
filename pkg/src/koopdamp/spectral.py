"""EDMD spectral estimation.

Snapshot matrices are lifted through a dictionary of observables, the
finite-dimensional transition matrix is regressed with an SVD pseudo-inverse,
and its eigen-decomposition yields discrete eigenvalues, continuous
eigenvalues (principal logarithm over the sampling period) and left
eigenvectors. A left eigenvector paired with the dictionary gives an
evaluable eigenfunction with an analytic gradient.
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigurationError, DegenerateDataError, IngestionError,
                     KoopdampError, ModeNotFoundError)

DEFAULT_SVD_TOL = 1e-10


class Dictionary:
    """Basis functions gamma: R^n -> R^q with analytic Jacobian.

    ``eval_fn`` maps an n-vector to a q-vector; ``jacobian_fn`` returns the
    (q, n) matrix of partial derivatives d gamma_j / d x_i.
    """

    def __init__(self, kind: str, n: int, q: int, eval_fn, jacobian_fn):
        self.kind = kind
        self.n = n
        self.q = q
        self._eval = eval_fn
        self._jac = jacobian_fn

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ConfigurationError(
                f"dictionary expects state of dimension {self.n}, "
                f"got shape {x.shape}")
        out = np.asarray(self._eval(x), dtype=float)
        if out.shape != (self.q,):
            raise ConfigurationError("dictionary eval returned wrong shape")
        return out

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.asarray(self._jac(x), dtype=float)
        if out.shape != (self.q, self.n):
            raise ConfigurationError(
                f"dictionary jacobian must have shape {(self.q, self.n)}")
        return out

    @classmethod
    def linear(cls, n: int = 4) -> "Dictionary":
        """[1, x^T]^T, q = 1 + n."""
        def ev(x):
            return np.concatenate(([1.0], x))

        def jac(x):
            return np.vstack([np.zeros((1, n)), np.eye(n)])

        return cls("linear", n, 1 + n, ev, jac)

    @classmethod
    def cubic_monomial(cls, n: int = 4) -> "Dictionary":
        """[1, x^T, (x^2)^T, (x^3)^T]^T with elementwise powers,
        q = 1 + 3n."""
        def ev(x):
            return np.concatenate(([1.0], x, x ** 2, x ** 3))

        def jac(x):
            eye = np.eye(n)
            return np.vstack([np.zeros((1, n)), eye,
                              np.diag(2.0 * x), np.diag(3.0 * x ** 2)])

        return cls("cubic", n, 1 + 3 * n, ev, jac)

    @classmethod
    def custom(cls, n: int, q: int, eval_fn, jacobian_fn) -> "Dictionary":
        return cls("custom", n, q, eval_fn, jacobian_fn)

    @classmethod
    def by_kind(cls, kind: str, n: int = 4) -> "Dictionary":
        if kind == "linear":
            return cls.linear(n)
        if kind == "cubic":
            return cls.cubic_monomial(n)
        raise ConfigurationError(f"unknown dictionary kind {kind!r}")

    def check_jacobian(self, points, rtol: float = 1e-6,
                       step: float = 1e-6) -> float:
        """Max relative deviation between the analytic Jacobian and central
        differences over the given points; raises if above rtol."""
        worst = 0.0
        for x in points:
            x = np.asarray(x, dtype=float)
            jac = self.jacobian(x)
            fd = np.empty_like(jac)
            for i in range(self.n):
                e = np.zeros(self.n)
                e[i] = step
                fd[:, i] = (self(x + e) - self(x - e)) / (2 * step)
            scale = max(np.abs(jac).max(), 1.0)
            worst = max(worst, np.abs(jac - fd).max() / scale)
        if worst > rtol:
            raise ConfigurationError(
                f"dictionary jacobian mismatch: {worst:.2e} > {rtol:.0e}")
        return worst


@dataclass
class SnapshotPair:
    """Aligned state snapshots X = [x_0..x_{m-1}], Xp = [x_1..x_m],
    both (n, m), sampled every h seconds."""

    X: np.ndarray
    Xp: np.ndarray
    h: float

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def n(self) -> int:
        return self.X.shape[0]


def build_snapshots(series, h: float, times=None) -> SnapshotPair:
    """Snapshot matrices from a time-ordered (N, n) sample array.

    When ``times`` is given, spacing uniformity is checked to 1e-6 relative
    against h.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    if series.shape[0] < 2:
        raise IngestionError("need at least 2 samples to build snapshots")
    if times is not None:
        times = np.asarray(times, dtype=float)
        gaps = np.diff(times)
        if np.any(np.abs(gaps - h) > 1e-6 * max(abs(h), 1.0)):
            k = int(np.argmax(np.abs(gaps - h)))
            raise IngestionError(
                f"non-uniform sampling at index {k}: gap {gaps[k]!r} "
                f"vs h={h!r}")
    states = series.T  # (n, N)
    return SnapshotPair(states[:, :-1].copy(), states[:, 1:].copy(), h)


def lift(snapshots: SnapshotPair, dictionary: Dictionary):
    """Columnwise dictionary application: (Gamma_X, Gamma_Xp), each (q, m)."""
    if dictionary.n != snapshots.n:
        raise ConfigurationError(
            f"dictionary dimension {dictionary.n} != state dimension "
            f"{snapshots.n}")
    gx = np.column_stack([dictionary(snapshots.X[:, k])
                          for k in range(snapshots.m)])
    gxp = np.column_stack([dictionary(snapshots.Xp[:, k])
                           for k in range(snapshots.m)])
    return gx, gxp


def svd_pinv(a: np.ndarray, tol: float = DEFAULT_SVD_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse truncating singular values below
    tol * sigma_max."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise DegenerateDataError("pseudo-inverse of an all-zero matrix")
    keep = s >= tol * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T


def estimate_koopman_matrix(gamma_x: np.ndarray, gamma_xp: np.ndarray,
                            svd_tolerance: float = DEFAULT_SVD_TOL
                            ) -> np.ndarray:
    """Least-squares transition matrix U = Gamma_Xp pinv(Gamma_X)."""
    if gamma_x.shape != gamma_xp.shape:
        raise ConfigurationError("lifted matrices must have equal shapes")
    q, m = gamma_x.shape
    if m < q:
        warnings.warn(f"fewer snapshots ({m}) than basis functions ({q}); "
                      "the regression is underdetermined", stacklevel=2)
    if not np.any(gamma_x):
        raise DegenerateDataError("all-zero lifted snapshot matrix")
    return gamma_xp @ svd_pinv(gamma_x, svd_tolerance)


@dataclass
class KoopmanSpectrum:
    """Eigen-structure of the estimated transition matrix.

    ``eigenvalues`` are the discrete-time lambda_j, ``continuous`` the
    nu_j = ln(lambda_j)/h, and ``left_vectors[j]`` satisfies
    xi_j^T U = lambda_j xi_j^T.
    """

    U: np.ndarray
    eigenvalues: np.ndarray
    continuous: np.ndarray
    left_vectors: np.ndarray   # (q, q): row j is xi_j^T
    h: float
    dictionary: Dictionary
    svd_tolerance: float = DEFAULT_SVD_TOL

    @property
    def q(self) -> int:
        return self.U.shape[0]

    def periods(self) -> np.ndarray:
        """Oscillation period (s) per mode; inf for real modes."""
        with np.errstate(divide="ignore"):
            return 2.0 * np.pi / np.abs(self.continuous.imag)

    def eigenfunction(self, j: int) -> "Eigenfunction":
        return Eigenfunction(self.left_vectors[j].copy(),
                             complex(self.continuous[j]), self.dictionary)

    def export_csv(self, path):
        """Modes sorted by |Re nu|: index, discrete and continuous
        eigenvalue, period in minutes, damping rate."""
        order = np.argsort(np.abs(self.continuous.real), kind="stable")
        per = self.periods()
        with open(path, "w", newline="") as fh:
            fh.write("j,re_lambda,im_lambda,re_nu,im_nu,"
                     "period_minutes,damping_per_s\n")
            for j in order:
                lam, nu = self.eigenvalues[j], self.continuous[j]
                pm = per[j] / 60.0 if np.isfinite(per[j]) else float("inf")
                fh.write(",".join(repr(float(v)) for v in
                                  (j, lam.real, lam.imag, nu.real, nu.imag,
                                   pm, nu.real)) + "\n")


def eigendecompose(U: np.ndarray, h: float, dictionary: Dictionary,
                   svd_tolerance: float = DEFAULT_SVD_TOL,
                   nyquist_warn: float = 0.05) -> KoopmanSpectrum:
    """Full eigen-decomposition of U with left eigenvectors and continuous
    eigenvalues via the principal logarithm.

    Left eigenvectors are the right eigenvectors of U^T. A warning is
    emitted when |Im ln(lambda)| comes within ``nyquist_warn`` of pi (the
    principal branch is then unreliable).
    """
    U = np.asarray(U, dtype=float)
    if not np.all(np.isfinite(U)):
        raise ConfigurationError("transition matrix contains non-finite "
                                 "entries")
    if h <= 0:
        raise ConfigurationError("sampling period must be positive")
    try:
        lams, vecs = np.linalg.eig(U.T)
    except np.linalg.LinAlgError as exc:
        raise KoopdampError(f"eigensolver failed: {exc}") from exc
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(lams.astype(complex))
    nu = logs / h
    close = np.abs(np.abs(logs.imag) - np.pi) < nyquist_warn * np.pi
    if np.any(close & (np.abs(lams) > 0)):
        warnings.warn("eigenvalue phase within 5% of the Nyquist limit; "
                      "continuous eigenvalues may alias", stacklevel=2)
    return KoopmanSpectrum(U, lams, nu, vecs.T, h, dictionary,
                           svd_tolerance)


@dataclass
class Eigenfunction:
    """Evaluable Koopman eigenfunction phi(x) = xi^T gamma(x) with analytic
    gradient (jacobian of gamma)^T xi."""

    xi: np.ndarray
    nu: complex
    dictionary: Dictionary
    normalization: str = "raw"

    def __call__(self, x) -> complex:
        return complex(self.xi @ self.dictionary(x))

    def gradient(self, x) -> np.ndarray:
        return self.dictionary.jacobian(x).T @ self.xi

    def conjugate(self) -> "Eigenfunction":
        return Eigenfunction(self.xi.conj(), np.conj(self.nu),
                             self.dictionary, self.normalization)

    def normalized(self, states) -> "Eigenfunction":
        """Rescale xi so max |phi| over the given states equals 1."""
        peak = max(abs(self(x)) for x in states)
        if peak == 0.0:
            raise DegenerateDataError("eigenfunction vanishes on the data")
        return Eigenfunction(self.xi / peak, self.nu, self.dictionary,
                             "unit-peak")

    @property
    def period(self) -> float:
        im = abs(self.nu.imag)
        return 2.0 * np.pi / im if im > 0 else float("inf")

    # -- persistence -------------------------------------------------------

    def save(self, path):
        if self.dictionary.kind == "custom":
            raise ConfigurationError(
                "custom dictionaries cannot be serialized")
        rec = {
            "dictionary": self.dictionary.kind,
            "n": self.dictionary.n,
            "q": self.dictionary.q,
            "re_xi": [float(v) for v in self.xi.real],
            "im_xi": [float(v) for v in self.xi.imag],
            "re_nu": float(self.nu.real),
            "im_nu": float(self.nu.imag),
            "normalization": self.normalization,
        }
        with open(path, "w") as fh:
            json.dump(rec, fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Eigenfunction":
        with open(path) as fh:
            rec = json.load(fh)
        dic = Dictionary.by_kind(rec["dictionary"], int(rec["n"]))
        if dic.q != int(rec["q"]):
            raise IngestionError(f"{path}: inconsistent dictionary size")
        xi = np.asarray(rec["re_xi"], dtype=float) \
            + 1j * np.asarray(rec["im_xi"], dtype=float)
        nu = complex(rec["re_nu"], rec["im_nu"])
        return cls(xi, nu, dic, rec.get("normalization", "raw"))


def eval_eigenfunction(ef: Eigenfunction, x) -> complex:
    return ef(x)


def grad_eigenfunction(ef: Eigenfunction, x) -> np.ndarray:
    return ef.gradient(x)


def select_oscillatory_mode(spectrum: KoopmanSpectrum,
                            period_band=(600.0, 1200.0),
                            max_damping: float = 2e-3) -> Eigenfunction:
    """Least-damped mode whose period falls inside ``period_band`` (s) and
    whose |Re nu| is at most ``max_damping`` (1/s); the Im nu > 0 member of
    the conjugate pair is returned.

    Raises ModeNotFoundError listing the five nearest candidates when the
    band is empty.
    """
    nu = spectrum.continuous
    per = spectrum.periods()
    lo, hi = period_band
    ok = (np.abs(nu.real) <= max_damping) & (per >= lo) & (per <= hi) \
        & (nu.imag != 0)
    if not np.any(ok):
        # rank oscillatory candidates by distance to the band center
        center = 0.5 * (lo + hi)
        cand = sorted((abs(per[j] - center), per[j], nu[j].real)
                      for j in range(spectrum.q) if nu[j].imag > 0)
        nearest = [(p, d) for _, p, d in cand[:5]]
        raise ModeNotFoundError(
            f"no mode with period in [{lo:.0f}, {hi:.0f}] s and "
            f"|Re nu| <= {max_damping:g}; nearest (period_s, damping): "
            f"{[(round(p, 1), float(d)) for p, d in nearest]}",
            candidates=nearest)
    idx = np.flatnonzero(ok)
    j = idx[np.argmin(np.abs(nu.real[idx]))]
    ef = spectrum.eigenfunction(j)
    if ef.nu.imag < 0:
        # real U: the conjugate eigenvalue carries the conjugate eigenvector
        ef = ef.conjugate()
    return ef


def fit_edmd(series, h: float, dictionary: Dictionary,
             svd_tolerance: float = DEFAULT_SVD_TOL,
             times=None) -> KoopmanSpectrum:
    """Convenience: snapshots -> lift -> regression -> eigendecomposition."""
    snaps = build_snapshots(series, h, times=times)
    gx, gxp = lift(snaps, dictionary)
    U = estimate_koopman_matrix(gx, gxp, svd_tolerance)
    return eigendecompose(U, h, dictionary, svd_tolerance)
