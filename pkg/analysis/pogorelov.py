"""
Minimizador singular de tipo Pogorelov en dimensión n ≥ 3.

u(x) = |x′|^{2−2/n} h(x_n) resuelve det D²u = 1 y es degenerado sobre la
recta x′ = 0. El campo v(x) = |x′|^{2−2/n} q(x_n) con q = γh − h′t es la
diferencia infinitesimal de la familia de reescalados de u. Tras truncar
con ψ se obtiene un dominio acotado Ω₀ = {v − ψ > 0} sobre el que u
minimiza L. Todas las cantidades son axisimétricas en x′, de modo que las
integrales se reducen al plano meridiano (r, t).

Autor: MongeFlux Team
Versión: 1.0.0
"""

from dataclasses import dataclass, replace
from math import gamma as gamma_function
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import bisect, brentq

from utils.config_utils import PogorelovConfig
from utils.validation_utils import SolverDivergenceError

MAX_STEP = 1e-4
BLOWUP_VALUE = 1e12
CALIBRATION_POINT = (0.5, 0.5, 0.1)
CALIBRATION_TOL = 1e-8
MAX_CALIBRATIONS = 6
FD_STEP = 1e-3
CALIBRATION_STEP = 1e-3
SIGMA_RADII = (0.5, 1.0, 2.0)
TUBE_RADII = (0.02, 0.01, 0.005)
GAUSS_NODES = 96

Quadratic = Tuple[np.ndarray, np.ndarray, float]


def rk4_step(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, dt: float) -> np.ndarray:
    """Paso clásico de Runge-Kutta de orden 4 para un sistema autónomo."""
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def ansatz_exponent(n: int) -> float:
    return 2.0 - 2.0 / n


def closed_form_constant(n: int) -> float:
    """c = (2 − 2/n)^{−(n−1)}, constante con la que det D²u = 1."""
    return ansatz_exponent(n) ** (-(n - 1))


def _second_derivative(n: int, c: float, h: np.ndarray, dh: np.ndarray) -> np.ndarray:
    alpha = ansatz_exponent(n)
    return (c * h ** (2 - n) + alpha * dh ** 2) / ((1.0 - 2.0 / n) * h)


def _third_derivative(n: int, c: float, h: np.ndarray, dh: np.ndarray) -> np.ndarray:
    alpha = ansatz_exponent(n)
    d2h = _second_derivative(n, c, h, dh)
    numerator = c * h ** (2 - n) + alpha * dh ** 2
    d_numerator = c * (2 - n) * h ** (1 - n) * dh + 2.0 * alpha * dh * d2h
    denominator = (1.0 - 2.0 / n) * h
    return (d_numerator * denominator - numerator * (1.0 - 2.0 / n) * dh) / denominator ** 2


def _reduced_exponent(n: int) -> float:
    return n / (n - 2.0)


def _reduced_constant(n: int, c: float) -> float:
    """K tal que w = h^{−n/(n−2)} cumple w″ = −K w^{n−1}."""
    return _reduced_exponent(n) ** 2 * c


def integrate_profile(n: int, c: float, t_end: float,
                      max_step: float = MAX_STEP) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Integra h con h(0) = 1, h′(0) = 0 hasta t_end (puede ser negativo).

    RK4 avanza sobre w = h^{−n/(n−2)}, que satisface w″ = −K w^{n−1} y es
    suave hasta la explosión de h (w → 0). Se detiene antes si h supera
    BLOWUP_VALUE o deja de ser finita.

    Returns:
        Tuple: (t, h, h′) en los pasos aceptados
    """
    k = _reduced_exponent(n)
    K = _reduced_constant(n, c)
    floor = BLOWUP_VALUE ** (-k)
    steps = int(np.ceil(abs(t_end) / max_step))
    dt = t_end / steps

    def rhs(y: np.ndarray) -> np.ndarray:
        return np.array([y[1], -K * y[0] ** (n - 1)])

    states = np.empty((steps + 1, 2))
    states[0] = (1.0, 0.0)
    last = steps
    for step in range(steps):
        nxt = rk4_step(rhs, states[step], dt)
        if not np.all(np.isfinite(nxt)) or nxt[0] <= floor:
            last = step
            break
        states[step + 1] = nxt
    t = dt * np.arange(last + 1)
    w, dw = states[: last + 1, 0], states[: last + 1, 1]
    h = w ** (-1.0 / k)
    return t, h, -h * dw / (k * w)


@dataclass
class PogorelovProfile:
    """
    Perfil unidimensional h y, con γ fijado, q y su primer cero a.

    Attributes:
        n: Dimensión
        c: Constante de la EDO
        t: Rejilla simétrica de t
        h: Valores de h
        dh: Valores de h′
        t_valid: Extremo del intervalo de validez detectado
        gamma: Exponente de v (None hasta ``build_fields``)
        q: Valores de q en la rejilla
        a: Primer cero positivo de q
        sigma0: Constante de borde σ₀
        ode_residual: Deriva relativa máxima de la integral primera
        calibration_residual: |det − 1| del hessiano por diferencias tras calibrar
    """
    n: int
    c: float
    t: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    t_valid: float
    gamma: Optional[float] = None
    q: Optional[np.ndarray] = None
    a: Optional[float] = None
    sigma0: Optional[float] = None
    ode_residual: float = 0.0
    calibration_residual: float = 0.0

    def __post_init__(self) -> None:
        d2h = _second_derivative(self.n, self.c, self.h, self.dh)
        self._h_spline = CubicHermiteSpline(self.t, self.h, self.dh)
        self._dh_spline = CubicHermiteSpline(self.t, self.dh, d2h)

    @property
    def alpha(self) -> float:
        return ansatz_exponent(self.n)

    def derivatives(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        h, h′, h″, h‴ en t; h″ y h‴ salen de la propia EDO.

        Raises:
            ValueError: Si algún t cae fuera del intervalo de validez
        """
        t = np.asarray(t, dtype=float)
        if np.any(np.abs(t) > self.t_valid):
            raise ValueError(f"t fuera del intervalo de validez [−{self.t_valid:.4f}, {self.t_valid:.4f}]")
        h = self._h_spline(t)
        dh = self._dh_spline(t)
        return h, dh, _second_derivative(self.n, self.c, h, dh), _third_derivative(self.n, self.c, h, dh)

    def q_derivatives(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """q, q′, q″ en t."""
        if self.gamma is None:
            raise ValueError("El perfil no tiene γ asignado")
        t = np.asarray(t, dtype=float)
        h, dh, d2h, d3h = self.derivatives(t)
        g = self.gamma
        return g * h - dh * t, (g - 1.0) * dh - d2h * t, (g - 2.0) * d2h - d3h * t

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"t": self.t, "h": self.h, "dh": self.dh})
        if self.q is not None:
            frame["q"] = self.q
        return frame


def first_integral_residual(n: int, c: float, h: np.ndarray, dh: np.ndarray) -> float:
    """
    Deriva relativa de la integral primera w′²/2 + K wⁿ/n = K/n a lo largo
    de la trayectoria, con w = h^{−n/(n−2)}.

    Es cero para la solución exacta, así que mide solo el error del
    integrador.
    """
    k = _reduced_exponent(n)
    K = _reduced_constant(n, c)
    w = h ** (-k)
    dw = -k * w * dh / h
    drift = 0.5 * dw ** 2 + K * (w ** n - 1.0) / n
    return float(np.abs(drift).max() / (K / n))


def _richardson_hessian(func: Callable[[np.ndarray], np.ndarray], points: np.ndarray,
                        step: float) -> np.ndarray:
    """Hessiano por diferencias con extrapolación de Richardson (orden 4)."""
    return (4.0 * _fd_hessian(func, points, step) - _fd_hessian(func, points, 2.0 * step)) / 3.0


def solve_profile_ode(n: int, t_max: float, max_step: float = MAX_STEP) -> PogorelovProfile:
    """
    Integra ((1−2/n)hh″ − (2−2/n)h′²)h^{n−2} = c con h(0) = 1, h′(0) = 0.

    La constante parte de la forma cerrada y se recalibra hasta que el
    determinante de un hessiano por diferencias (Richardson) de r^α h(t) en
    un punto de referencia vale 1. Como det D²u es lineal en c, basta
    dividir c por el determinante medido.

    Args:
        n: Dimensión (≥ 3)
        t_max: Extremo de integración
        max_step: Paso máximo de RK4

    Returns:
        PogorelovProfile: Perfil sin partes dependientes de γ

    Raises:
        ValueError: Si n < 3
        SolverDivergenceError: Si la calibración no converge
    """
    if n < 3:
        raise ValueError(f"n debe ser mayor o igual a 3, recibido: {n}")

    c = closed_form_constant(n)
    reference = np.zeros((1, n))
    reference[0, 0] = CALIBRATION_POINT[0]
    reference[0, 1] = CALIBRATION_POINT[1]
    reference[0, -1] = CALIBRATION_POINT[2]
    history = []
    profile = None
    for _ in range(MAX_CALIBRATIONS):
        profile = _build_profile(n, c, t_max, max_step)
        det = calibration_determinant(profile, reference)
        history.append(det - 1.0)
        if abs(det - 1.0) <= CALIBRATION_TOL:
            break
        c /= det
    else:
        raise SolverDivergenceError(f"Calibración de c sin convergencia, residuo {history[-1]:.3e}", history)

    profile.calibration_residual = abs(history[-1])
    logger.info(f"Perfil n={n}: c={c:.12f}, validez |t| ≤ {profile.t_valid:.4f}, "
                f"residuo EDO {profile.ode_residual:.2e}, calibración {profile.calibration_residual:.2e}")
    return profile


def calibration_determinant(profile: PogorelovProfile, points: np.ndarray) -> float:
    """det del hessiano por diferencias de r^α h(t) en el primer punto."""
    def u(x: np.ndarray) -> np.ndarray:
        _, r, t = _split(x)
        return r ** profile.alpha * profile.derivatives(t)[0]

    return float(np.linalg.det(_richardson_hessian(u, points[:1], CALIBRATION_STEP)[0]))


def _build_profile(n: int, c: float, t_max: float, max_step: float) -> PogorelovProfile:
    t, h, dh = integrate_profile(n, c, t_max, max_step)
    if t[-1] < t_max:
        logger.warning(f"El perfil deja de ser válido en t = {t[-1]:.4f} < {t_max}")
    residual = first_integral_residual(n, c, h, dh)
    full_t = np.concatenate([-t[:0:-1], t])
    full_h = np.concatenate([h[:0:-1], h])
    full_dh = np.concatenate([-dh[:0:-1], dh])
    return PogorelovProfile(n=n, c=c, t=full_t, h=full_h, dh=full_dh, t_valid=float(t[-1]),
                            ode_residual=residual)


def _split(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    xp = points[:, :-1]
    r = np.linalg.norm(xp, axis=1)
    if np.any(r <= 0):
        raise ValueError("Evaluación sobre la recta singular |x′| = 0")
    return xp / r[:, None], r, points[:, -1]


def _hessian(profile: PogorelovProfile, points: np.ndarray, derivatives: Callable) -> np.ndarray:
    """Hessiano de r^α p(t) con (p, p′, p″) dados por ``derivatives``."""
    omega, r, t = _split(points)
    n = profile.n
    alpha = profile.alpha
    p, dp, d2p = derivatives(t)[:3]
    lam_t = alpha * r ** (alpha - 2) * p
    lam_r = alpha * (alpha - 1) * r ** (alpha - 2) * p
    mixed = alpha * r ** (alpha - 1) * dp

    H = np.zeros((len(r), n, n))
    outer = omega[:, :, None] * omega[:, None, :]
    H[:, :-1, :-1] = lam_t[:, None, None] * np.eye(n - 1) + (lam_r - lam_t)[:, None, None] * outer
    H[:, :-1, -1] = mixed[:, None] * omega
    H[:, -1, :-1] = mixed[:, None] * omega
    H[:, -1, -1] = r ** alpha * d2p
    return H


def _cofactor_blocks(profile: PogorelovProfile, r: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, ...]:
    """
    Coeficientes (a₁, a₂, b, d) de U = cof D²u.

    U = a₁(I − ωωᵀ) + a₂ωωᵀ en el bloque x′, bω en la columna mixta y d en (n, n).
    """
    n = profile.n
    alpha = profile.alpha
    h, dh, d2h, _ = profile.derivatives(t)
    lam_t = alpha * r ** (alpha - 2) * h
    lam_r = alpha * (alpha - 1) * r ** (alpha - 2) * h
    mixed = alpha * r ** (alpha - 1) * dh
    tt = r ** alpha * d2h
    a1 = lam_t ** (n - 3) * (lam_r * tt - mixed ** 2)
    scale = lam_t ** (n - 2)
    return a1, scale * tt, -scale * mixed, scale * lam_r


@dataclass
class PogorelovFields:
    """Evaluadores de u, v y sus derivadas para un perfil con γ asignado."""
    profile: PogorelovProfile

    @property
    def gamma(self) -> float:
        return self.profile.gamma

    @property
    def a(self) -> float:
        return self.profile.a

    def u(self, points: np.ndarray) -> np.ndarray:
        _, r, t = _split(points)
        return r ** self.profile.alpha * self.profile.derivatives(t)[0]

    def v(self, points: np.ndarray) -> np.ndarray:
        _, r, t = _split(points)
        return r ** self.profile.alpha * self.profile.q_derivatives(t)[0]

    def gradient_u(self, points: np.ndarray) -> np.ndarray:
        omega, r, t = _split(points)
        alpha = self.profile.alpha
        h, dh = self.profile.derivatives(t)[:2]
        return np.column_stack([(alpha * r ** (alpha - 1) * h)[:, None] * omega, r ** alpha * dh])

    def hessian_u(self, points: np.ndarray) -> np.ndarray:
        return _hessian(self.profile, points, self.profile.derivatives)

    def hessian_v(self, points: np.ndarray) -> np.ndarray:
        return _hessian(self.profile, points, self.profile.q_derivatives)

    def cofactor_u(self, points: np.ndarray) -> np.ndarray:
        omega, r, t = _split(points)
        n = self.profile.n
        a1, a2, b, d = _cofactor_blocks(self.profile, r, t)
        outer = omega[:, :, None] * omega[:, None, :]
        U = np.zeros((len(r), n, n))
        U[:, :-1, :-1] = a1[:, None, None] * (np.eye(n - 1) - outer) + a2[:, None, None] * outer
        U[:, :-1, -1] = b[:, None] * omega
        U[:, -1, :-1] = b[:, None] * omega
        U[:, -1, -1] = d
        return U

    def v_uniform(self, points: np.ndarray, delta: float) -> np.ndarray:
        """Variante uniformemente convexa v̄ = |x′|^{2−2/n} q(x_n(1 + δ|x′|²))."""
        _, r, t = _split(points)
        return r ** self.profile.alpha * self.profile.q_derivatives(t * (1.0 + delta * r * r))[0]


def _first_zero(profile: PogorelovProfile, gamma: float) -> float:
    positive = profile.t >= 0
    t = profile.t[positive]
    q = gamma * profile.h[positive] - profile.dh[positive] * t
    crossing = np.flatnonzero(q <= 0)
    if len(crossing) == 0:
        raise ValueError(f"q no se anula en [0, {profile.t_valid:.4f}] para γ = {gamma}; aumente t_max")
    k = crossing[0]
    if q[k] == 0:
        return float(t[k])

    def q_at(s: float) -> float:
        h, dh = profile.derivatives(np.array([s]))[:2]
        return float(gamma * h[0] - dh[0] * s)

    return float(bisect(q_at, t[k - 1], t[k], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))


def build_fields(profile: PogorelovProfile, gamma: float) -> PogorelovFields:
    """
    Asigna γ al perfil, localiza a y devuelve los evaluadores.

    Args:
        profile: Perfil integrado
        gamma: Exponente en (0, 2/n)

    Returns:
        PogorelovFields: Evaluadores válidos en {|x′| > 0, |x_n| ≤ a}

    Raises:
        ValueError: Si γ ∉ (0, 2/n) o q no se anula en el intervalo de validez
    """
    n = profile.n
    if not 0.0 < gamma < 2.0 / n:
        raise ValueError(f"gamma debe estar en (0, 2/n), recibido: {gamma}")

    a = _first_zero(profile, gamma)
    q = gamma * profile.h - profile.dh * profile.t
    with_gamma = replace(profile, gamma=gamma, q=q, a=a)
    _, _, _, d = _cofactor_blocks(with_gamma, np.array([1.0]), np.array([a]))
    dq = with_gamma.q_derivatives(np.array([a]))[1]
    with_gamma.sigma0 = float(-d[0] * dq[0])
    logger.debug(f"γ={gamma}: a={a:.10f}, σ₀={with_gamma.sigma0:.8f}")
    return PogorelovFields(with_gamma)


def _fd_hessian(func: Callable[[np.ndarray], np.ndarray], points: np.ndarray, step: float) -> np.ndarray:
    P, n = points.shape
    H = np.zeros((P, n, n))
    center = func(points)
    eye = np.eye(n) * step
    for i in range(n):
        plus = func(points + eye[i])
        minus = func(points - eye[i])
        H[:, i, i] = (plus - 2.0 * center + minus) / step ** 2
        for j in range(i + 1, n):
            value = (func(points + eye[i] + eye[j]) - func(points + eye[i] - eye[j])
                     - func(points - eye[i] + eye[j]) + func(points - eye[i] - eye[j])) / (4.0 * step ** 2)
            H[:, i, j] = H[:, j, i] = value
    return H


def sample_points(fields: PogorelovFields, n_samples: int, seed: int = 42,
                  radii: Tuple[float, float] = (0.5, 2.0)) -> np.ndarray:
    """Puntos aleatorios con |x′| ∈ radii y |x_n| ≤ 0.9a."""
    rng = np.random.default_rng(seed)
    n = fields.profile.n
    directions = rng.normal(size=(n_samples, n - 1))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    r = rng.uniform(*radii, size=n_samples)
    t = rng.uniform(-0.9 * fields.a, 0.9 * fields.a, size=n_samples)
    return np.column_stack([directions * r[:, None], t])


@dataclass
class SystemReport:
    """
    Residuos del sistema en el ansatz.

    Attributes:
        interior: Tabla por punto (r, t, det_residual, trace_residual)
        boundary: Tabla por radio en x_n = ±a (v, flux)
        sigma0: σ₀ ajustado como −media de los flujos
        sigma_spread: Dispersión relativa de los flujos
    """
    interior: pd.DataFrame
    boundary: pd.DataFrame
    sigma0: float
    sigma_spread: float

    def max_residuals(self) -> dict:
        return {
            "det": float(self.interior["det_residual"].abs().max()),
            "trace": float(self.interior["trace_residual"].abs().max()),
            "boundary_v": float(self.boundary["v"].abs().max()),
            "sigma_spread": self.sigma_spread,
        }


def verify_system(fields: PogorelovFields, points: np.ndarray, step: float = FD_STEP,
                  radii: Sequence[float] = SIGMA_RADII) -> SystemReport:
    """
    Residuos por diferencias finitas de det D²u = 1, U^{ij}v_{ij} = nγ − 2 y de la condición de borde.

    Args:
        fields: Evaluadores
        points: Puntos de muestreo fuera de |x′| = 0
        step: Paso de las diferencias centradas
        radii: Radios |x′| donde se ajusta σ₀ en x_n = ±a

    Returns:
        SystemReport: Tablas de residuos
    """
    points = np.atleast_2d(points)
    profile = fields.profile
    n = profile.n
    Hu = _fd_hessian(fields.u, points, step)
    Hv = _fd_hessian(fields.v, points, step)
    det = np.linalg.det(Hu)
    U = det[:, None, None] * np.linalg.inv(Hu)
    trace = np.einsum("pij,pij->p", U, Hv)
    _, r, t = _split(points)
    interior = pd.DataFrame({
        "r": r,
        "t": t,
        "det_residual": det - 1.0,
        "trace_residual": trace - (n * fields.gamma - 2.0),
    })

    rows = []
    for radius in radii:
        for sign in (1.0, -1.0):
            x = np.zeros((1, n))
            x[0, 0] = radius
            x[0, -1] = sign * fields.a
            above, below = x.copy(), x.copy()
            above[0, -1] += step
            below[0, -1] -= step
            v_n = (fields.v(above)[0] - fields.v(below)[0]) / (2.0 * step)
            U_nn = np.linalg.det(_fd_hessian(fields.u, x, step)[0, :-1, :-1])
            rows.append({"r": radius, "t": x[0, -1], "v": float(fields.v(x)[0]), "flux": float(U_nn * v_n * sign)})
    boundary = pd.DataFrame(rows)
    sigma0 = float(-boundary["flux"].mean())
    spread = float((boundary["flux"].max() - boundary["flux"].min()) / abs(sigma0))
    logger.info(f"Sistema Pogorelov: max|det−1|={interior['det_residual'].abs().max():.2e}, "
                f"max|Uv+{2 - n * fields.gamma:.3f}|={interior['trace_residual'].abs().max():.2e}, "
                f"σ₀={sigma0:.6f} (dispersión {spread:.2e})")
    return SystemReport(interior, boundary, sigma0, spread)


@dataclass
class TruncatedDomain:
    """
    Dominio Ω₀ = {ṽ > 0} con ṽ = v − ψ y ψ = K·max(0, |x′| − 1)⁴.

    Axisimétrico: Ω₀ = {|x_n| < a, |x′| < R(x_n)}.
    """
    fields: PogorelovFields
    K: float
    r_box: float

    def psi(self, points: np.ndarray) -> np.ndarray:
        _, r, _ = _split(points)
        return self.K * np.maximum(r - 1.0, 0.0) ** 4

    def v_tilde(self, points: np.ndarray) -> np.ndarray:
        return self.fields.v(points) - self.psi(points)

    def contains(self, points: np.ndarray) -> np.ndarray:
        return self.v_tilde(points) > 0

    def _meridian(self, r: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """ṽ, ṽ_r, ṽ_t en coordenadas (r, t)."""
        alpha = self.fields.profile.alpha
        q, dq, _ = self.fields.profile.q_derivatives(t)
        excess = np.maximum(r - 1.0, 0.0)
        value = r ** alpha * q - self.K * excess ** 4
        d_r = alpha * r ** (alpha - 1) * q - 4.0 * self.K * excess ** 3
        d_t = r ** alpha * dq
        return value, d_r, d_t

    def radius(self, t: float) -> float:
        """R(t) para |t| < a."""
        q = float(self.fields.profile.q_derivatives(np.array([t]))[0][0])
        if q <= 0:
            return 1.0
        alpha = self.fields.profile.alpha

        def g(r: float) -> float:
            return r ** alpha * q - self.K * (r - 1.0) ** 4

        return float(brentq(g, 1.0, self.r_box, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def truncate_domain(fields: PogorelovFields, K: float, r_box: float = 4.0, n_scan: int = 201) -> TruncatedDomain:
    """
    Trunca el dominio con ψ = K·max(0, |x′| − 1)⁴.

    Args:
        fields: Evaluadores
        K: Constante de ψ
        r_box: Radio de la caja de exploración
        n_scan: Puntos de la exploración en x_n

    Returns:
        TruncatedDomain: Descripción implícita de Ω₀

    Raises:
        ValueError: Si ṽ > 0 en el borde lateral de la caja (Ω₀ no acotado)
    """
    domain = TruncatedDomain(fields, K, r_box)
    t = np.linspace(-fields.a, fields.a, n_scan)
    value, _, _ = domain._meridian(np.full_like(t, r_box), t)
    if np.any(value > 0):
        raise ValueError(f"Ω₀ no acotado en |x′| ≤ {r_box} con K = {K}; aumente K")
    logger.debug(f"Ω₀ acotado: R(0) = {domain.radius(0.0):.6f}")
    return domain


def _sphere_area(n: int) -> float:
    """Área de S^{n−2}."""
    k = 0.5 * (n - 1)
    return 2.0 * np.pi ** k / gamma_function(k)


def random_quadratics(n: int, count: int, seed: int = 42) -> List[Quadratic]:
    """
    Formas de prueba φ = ½xᵀQx + b·x + c.

    La primera es lineal, la segunda |x|²/2 y el resto convexas aleatorias
    con perturbaciones lineales.
    """
    rng = np.random.default_rng(seed)
    forms: List[Quadratic] = [(np.zeros((n, n)), rng.normal(size=n), float(rng.normal())),
                              (np.eye(n), np.zeros(n), 0.0)]
    while len(forms) < count:
        M = rng.normal(size=(n, n))
        forms.append((M @ M.T / n + 0.1 * np.eye(n), rng.normal(size=n), float(rng.normal())))
    return forms[:count]


def _even_average(form: Quadratic, n: int, r: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Parte par en t de la media esférica de φ sobre {|x′| = r, x_n = t}."""
    Q, _, c = form
    return 0.5 * (np.trace(Q[:-1, :-1]) * r * r / (n - 1) + Q[-1, -1] * t * t) + c


def _richardson(values: Sequence[float]) -> Tuple[float, bool]:
    I1, I2, I3 = values
    d1, d2 = I1 - I2, I2 - I3
    if abs(d2) <= 1e-14 * max(abs(I3), 1.0):
        return I3, True
    ratio = d1 / d2
    if not np.isfinite(ratio) or ratio <= 1.0:
        return I3, False
    return I3 + d2 / (ratio - 1.0), True


def _identity_sides(domain: TruncatedDomain, form: Quadratic, eps: float) -> Tuple[float, float]:
    fields = domain.fields
    profile = fields.profile
    n = profile.n
    a = fields.a
    K = domain.K
    Q = form[0]
    area = _sphere_area(n)
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_NODES)

    # t = a(1 − s⁴) regulariza el borde lateral en t = a
    s = 0.5 * (nodes + 1.0)
    ws = 0.5 * weights
    t = a * (1.0 - s ** 4)
    dt = 4.0 * a * s ** 3 * ws
    R = np.array([domain.radius(value) for value in t])

    lhs_volume = 0.0
    rhs_volume = 0.0
    for lower, upper in ((np.full_like(t, eps), np.ones_like(t)), (np.ones_like(t), R)):
        r = lower[:, None] + (upper - lower)[:, None] * s[None, :]
        wr = (upper - lower)[:, None] * ws[None, :]
        tt = np.broadcast_to(t[:, None], r.shape)
        shape = r.shape
        a1, a2, b, d = (x.reshape(shape) for x in _cofactor_blocks(profile, r.ravel(), tt.ravel()))
        excess = np.maximum(r - 1.0, 0.0)
        psi_r = 4.0 * K * excess ** 3
        psi_rr = 12.0 * K * excess ** 2
        A = (2.0 - n * fields.gamma) + a1 * (n - 2) * psi_r / r + a2 * psi_rr
        v_tilde = domain._meridian(r.ravel(), tt.ravel())[0].reshape(shape)
        measure = area * r ** (n - 2) * wr * dt[:, None]
        phi = _even_average(form, n, r, tt)
        lhs_volume -= float(np.sum(phi * A * measure))
        trace = (a1 * (n - 2) + a2) / (n - 1) * np.trace(Q[:-1, :-1]) + d * Q[-1, -1]
        rhs_volume += float(np.sum(trace * v_tilde * measure))

    # tapas {|x′| ≤ 1, x_n = ±a}
    r_cap = eps + (1.0 - eps) * s
    w_cap = (1.0 - eps) * ws
    cap = float(np.sum(_even_average(form, n, r_cap, np.full_like(r_cap, a)) * fields.profile.sigma0
                       * area * r_cap ** (n - 2) * w_cap))

    # borde lateral r = R(t)
    a1, a2, b, d = _cofactor_blocks(profile, R, t)
    _, v_r, v_t = domain._meridian(R, t)
    quadratic = a2 * v_r ** 2 + 2.0 * b * v_r * v_t + d * v_t ** 2
    flux = -area * R ** (n - 2) * quadratic / v_r
    lateral = float(np.sum(_even_average(form, n, R, t) * flux * dt))

    lhs = 2.0 * (lhs_volume + cap + lateral)
    return lhs, 2.0 * rhs_volume


def stability_identity_check(domain: TruncatedDomain, forms: Sequence[Quadratic],
                             eps_values: Sequence[float] = TUBE_RADII) -> pd.DataFrame:
    """
    Compara L(φ) = ∮φσ − ∫φA con ∫U^{ij}φ_{ij}ṽ sobre Ω₀.

    Ambos lados se integran en Ω₀ sin el tubo {|x′| ≤ ε} y se extrapolan en
    ε → 0. σ = −U^{νν}ṽ_ν y A = −U^{ij}ṽ_{ij} son los datos inducidos.

    Args:
        domain: Dominio truncado
        forms: Formas cuadráticas de prueba
        eps_values: Radios del tubo (tres, decrecientes)

    Returns:
        pd.DataFrame: (form, L_phi, rhs, gap, relative_gap, converged)
    """
    rows = []
    for index, form in enumerate(forms):
        sides = [_identity_sides(domain, form, eps) for eps in eps_values]
        L_phi, ok_l = _richardson([side[0] for side in sides])
        rhs, ok_r = _richardson([side[1] for side in sides])
        gap = abs(L_phi - rhs)
        rows.append({
            "form": index,
            "L_phi": L_phi,
            "rhs": rhs,
            "gap": gap,
            "relative_gap": gap / max(abs(rhs), abs(L_phi), 1e-300),
            "converged": bool(ok_l and ok_r),
        })
    table = pd.DataFrame(rows)
    if not table["converged"].all():
        logger.warning(f"Extrapolación en ε sin convergencia en {int((~table['converged']).sum())} formas")
    return table


def check_uniform_variant(fields: PogorelovFields, delta: float,
                          radii: Sequence[float] = (0.25, 0.5, 1.0, 1.5)) -> pd.DataFrame:
    """
    Signo y borde de v̄: se anula en |x_n|(1 + δ|x′|²) = a y es positiva dentro.

    Returns:
        pd.DataFrame: (r, t_zero, v_at_zero, min_inside)
    """
    n = fields.profile.n
    rows = []
    for radius in radii:
        t_zero = fields.a / (1.0 + delta * radius * radius)
        inside = np.linspace(-0.95 * t_zero, 0.95 * t_zero, 41)
        x = np.zeros((len(inside), n))
        x[:, 0] = radius
        x[:, -1] = inside
        edge = np.zeros((2, n))
        edge[:, 0] = radius
        edge[:, -1] = (t_zero, -t_zero)
        rows.append({
            "r": radius,
            "t_zero": t_zero,
            "v_at_zero": float(np.abs(fields.v_uniform(edge, delta)).max()),
            "min_inside": float(fields.v_uniform(x, delta).min()),
        })
    return pd.DataFrame(rows)


def run_pogorelov(config: PogorelovConfig, seed: int = 42) -> dict:
    """
    Ejecuta la construcción completa con la configuración dada.

    Returns:
        dict: profile, fields, system, domain, identity, uniform
    """
    profile = solve_profile_ode(config.n, config.t_max)
    fields = build_fields(profile, config.gamma)
    system = verify_system(fields, sample_points(fields, config.n_samples, seed))
    domain = truncate_domain(fields, config.K)
    identity = stability_identity_check(domain, random_quadratics(config.n, config.n_quadratics, seed))
    uniform = check_uniform_variant(fields, config.delta)
    return {
        "profile": fields.profile,
        "fields": fields,
        "system": system,
        "domain": domain,
        "identity": identity,
        "uniform": uniform,
    }
