"""Coupling matrices (J, K) that make the pairwise distance deterministic.

Given the current pair of points and the requested instantaneous distance
derivative, these constructors return square ambient-dimension matrices J, K
with J J' + K K' = I.  Driving the second Brownian motion with
dW = J dB + K dC then cancels the martingale part of the distance and
realizes the requested drift exactly:

* Euclidean:  J' fixes Z = X - Y and scales its orthogonal complement by
  lambda = 1 - rho rho' / (n-1); the realized drift is n - tr J = rho rho'.
* Sphere:     J' reflects X -> -Y, Y -> -X on span{X, Y} and scales the
  orthogonal complement by gamma = eta + eta'/(n-1) where eta = cos rho.
  (The drift-consistent gamma; the realized drift -(n-1) eta + (n-1) gamma
  must equal eta', which pins this formula down.)
* Hyperbolic: on the plane spanned by e_1 and the boundary displacement
  Z-tilde, J' acts as the two-plane map A_phi with
  phi = -eta'/(n-1) + (X_1^2 + Y_1^2)/(X_1 Y_1), eta = cosh rho - 1;
  the orthogonal complement is scaled by gamma = 1 + eta - eta'/(n-1).

The ``*_matrices`` functions are batched (arbitrary leading axes, coordinate
axis last) and perform no validation; ``build_*`` are the validating
single-state entry points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, DegenerateStateError, ValidationError
from .model_space import SpaceKind, SpaceSpec

BAND_TOL = 1e-10        # admissible-band slack absorbed before raising
DEGENERATE_ETA = 1e-9   # sphere states with |X.Y| >= 1 - this are rejected


@dataclass(frozen=True)
class CouplingMatrices:
    """The pair (J, K) with J J' + K K' = I driving the second motion."""

    J: np.ndarray
    Kmat: np.ndarray

    def identity_residual(self) -> float:
        JK = self.J @ self.J.T + self.Kmat @ self.Kmat.T
        return float(np.max(np.abs(JK - np.eye(self.J.shape[0]))))

    def op_norm(self) -> float:
        return float(np.linalg.svd(self.J, compute_uv=False)[0])


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _eye_like(template, N):
    return np.broadcast_to(np.eye(N), template.shape[:-1] + (N, N)).copy()


# ---------------------------------------------------------------------------
# batched assembly


def euclidean_matrices(Z, lam):
    """J, K for Euclidean space from the unit direction of Z and lambda."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[-1]
    if n == 1:
        J = np.ones(Z.shape[:-1] + (1, 1))
        return J, np.zeros_like(J)
    lam = np.asarray(lam, dtype=float)[..., None, None]
    xi = Z / np.linalg.norm(Z, axis=-1, keepdims=True)
    P = _outer(xi, xi)
    eye = _eye_like(Z, n)
    J = lam * eye + (1.0 - lam) * P
    K = np.sqrt(np.maximum(0.0, 1.0 - lam**2)) * (eye - P)
    return J, K


def sphere_matrices_from_gamma(X, Y, gamma):
    """J, K on the sphere from an explicit transverse eigenvalue gamma.

    J is the reflection X -> -Y, Y -> -X on span{X, Y} extended by gamma
    times the identity on the orthogonal complement; K vanishes on
    span{X, Y} and is sqrt(1 - gamma^2) times the identity transversally.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    gamma = np.asarray(gamma, dtype=float)[..., None, None]
    N = X.shape[-1]
    c = (X * Y).sum(axis=-1)                      # cos of the actual angle
    w = Y - c[..., None] * X
    s = np.linalg.norm(w, axis=-1)
    xi2 = w / s[..., None]
    P = _outer(X, X) + _outer(xi2, xi2)
    cross = _outer(X, xi2) + _outer(xi2, X)
    R = -c[..., None, None] * (_outer(X, X) - _outer(xi2, xi2)) - s[..., None, None] * cross
    eye = _eye_like(X, N)
    J = R + gamma * (eye - P)
    K = np.sqrt(np.maximum(0.0, 1.0 - gamma**2)) * (eye - P)
    return J, K


def sphere_gamma(eta, eta_prime, n):
    """Drift-consistent transverse eigenvalue eta + eta'/(n-1)."""
    return np.asarray(eta, dtype=float) + np.asarray(eta_prime, dtype=float) / (n - 1)


def sphere_matrices(X, Y, eta, eta_prime):
    """J, K realizing d(eta)/dt = eta_prime at the sphere state (X, Y)."""
    n = np.asarray(X).shape[-1] - 1
    if n == 1:
        gamma = np.zeros(np.shape(eta))   # no transverse subspace
    else:
        gamma = np.clip(sphere_gamma(eta, eta_prime, n), -1.0, 1.0)
    return sphere_matrices_from_gamma(X, Y, gamma)


def two_plane_k_entries(m, l, d, M2):
    """Entries of (I - A'A)^{1/2} on the plane, in the (xi1, xi2) basis.

    A = V diag(1, d) U' with U the rotation sending e1 to (m, l)/|(m, l)|,
    so I - A'A = (1 - d^2) u2 u2' with u2 = (-l, m)/|(m, l)| and the square
    root is exact: no generic matrix square root is needed (whose rounding
    would blur the null direction to sqrt(eps)).
    """
    f = np.sqrt(np.maximum(0.0, 1.0 - d * d)) / M2
    return f * l * l, -f * m * l, f * m * m


def hyperbolic_two_plane_scalars(X, Y):
    """The scalars (m, l, p, q) of the half-space two-plane construction."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    x1, y1 = X[..., 0], Y[..., 0]
    zt = X[..., 1:] - Y[..., 1:]
    u = np.linalg.norm(zt, axis=-1)
    m = u * u + x1 * x1 - y1 * y1
    l = 2.0 * y1 * u
    p = -u * u + x1 * x1 - y1 * y1
    q = 2.0 * x1 * u
    return m, l, p, q, u, zt


def hyperbolic_matrices(X, Y, eta, eta_prime, clip: bool = True):
    """J, K realizing d(eta)/dt = eta_prime at the half-space state (X, Y).

    Returns (J, K, gamma, d).  With ``clip`` the transverse eigenvalue and
    the two-plane determinant are clipped into [-1, 1] (floating-point noise
    at band-saturating profiles); callers that must reject out-of-band input
    should inspect d before clipping via build_hyperbolic.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    eta_prime = np.asarray(eta_prime, dtype=float)
    n = X.shape[-1]
    if n == 1:
        # only the synchronous driver keeps |log(X/Y)| fixed
        shape = np.broadcast_shapes(X.shape[:-1], eta.shape)
        J = np.ones(shape + (1, 1))
        return J, np.zeros_like(J), np.ones(shape), np.ones(shape)

    x1, y1 = X[..., 0], Y[..., 0]
    m, l, p, q, u, zt = hyperbolic_two_plane_scalars(X, Y)
    gamma = 1.0 + eta - eta_prime / (n - 1)
    if clip:
        gamma = np.clip(gamma, -1.0, 1.0)

    small = u <= 1e-13 * (x1 + y1)
    u_safe = np.where(small, 1.0, u)
    xi2 = np.zeros(np.broadcast_shapes(X.shape, Y.shape), dtype=float)
    xi2[..., 1:] = zt / u_safe[..., None]

    M2 = m * m + l * l
    r_ = 1.0 + eta
    phi = -eta_prime / (n - 1) + (x1 * x1 + y1 * y1) / (x1 * y1)
    denom = r_ * l * q + m * p
    denom_safe = np.where(denom == 0, 1.0, denom)
    d = (phi * M2 - (r_ * m * p + l * q)) / denom_safe
    d = np.where(small, gamma, d)
    if clip:
        d = np.clip(d, -1.0, 1.0)

    M2_safe = np.where(small, 1.0, M2)
    b11 = (m * p + d * l * q) / M2_safe
    b12 = (l * p - d * m * q) / M2_safe
    b21 = (m * q - d * l * p) / M2_safe
    b22 = (l * q + d * m * p) / M2_safe
    ra, rb, rc = two_plane_k_entries(m, l, d, M2_safe)

    e1 = np.zeros_like(xi2)
    e1[..., 0] = 1.0
    E11 = _outer(e1, e1)
    E22 = _outer(xi2, xi2)
    E12 = _outer(e1, xi2)
    E21 = _outer(xi2, e1)
    eye = _eye_like(xi2, n)

    def two_plane(t11, t12, t21, t22):
        return (t11[..., None, None] * E11 + t12[..., None, None] * E12
                + t21[..., None, None] * E21 + t22[..., None, None] * E22)

    gq = gamma[..., None, None]
    P_U = E11 + E22
    # J = A_phi' on the plane: the transpose block
    J_gen = two_plane(b11, b21, b12, b22) + gq * (eye - P_U)
    K_gen = two_plane(ra, rb, rb, rc) + np.sqrt(np.maximum(0.0, 1.0 - gq * gq)) * (eye - P_U)

    J_small = E11 + gq * (eye - E11)
    K_small = np.sqrt(np.maximum(0.0, 1.0 - gq * gq)) * (eye - E11)

    mask = small[..., None, None]
    J = np.where(mask, J_small, J_gen)
    K = np.where(mask, K_small, K_gen)
    return J, K, gamma, d


# ---------------------------------------------------------------------------
# two-plane map of the hyperbolic construction


@dataclass(frozen=True)
class TwoPlaneParams:
    """Scalars and orthonormal plane vectors of the two-plane map.

    Requires m^2 + l^2 = p^2 + q^2 > 0 (the map sends m xi1 + l xi2 to
    p xi1 + q xi2 without expansion) and orthonormal xi1, xi2.
    """

    m: float
    l: float
    p: float
    q: float
    rr: float
    ss: float
    xi1: np.ndarray
    xi2: np.ndarray

    def __post_init__(self):
        ml = self.m**2 + self.l**2
        pq = self.p**2 + self.q**2
        if ml <= 0:
            raise ValidationError("two-plane scalars must not vanish")
        if abs(ml - pq) > 1e-10 * ml:
            raise ValidationError(f"norm mismatch: m^2+l^2 = {ml:.6g}, p^2+q^2 = {pq:.6g}")
        for v in (self.xi1, self.xi2):
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValidationError("plane vectors must be unit")
        if abs(float(np.dot(self.xi1, self.xi2))) > 1e-12:
            raise ValidationError("plane vectors must be orthogonal")

    def phi_band(self) -> tuple[float, float]:
        """Interval of realizable rr*A11 + ss*A22 values."""
        ml = self.m**2 + self.l**2
        center = (self.rr * self.m * self.p + self.ss * self.l * self.q) / ml
        half = abs(self.rr * self.l * self.q + self.ss * self.m * self.p) / ml
        return center - half, center + half


def hyperbolic_two_plane(X, Y, eta) -> TwoPlaneParams:
    """TwoPlaneParams of the half-space state (X, Y) with eta = cosh(rho)-1."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    m, l, p, q, u, zt = hyperbolic_two_plane_scalars(X, Y)
    if u <= 0:
        raise DegenerateStateError("two-plane construction requires a nonzero boundary displacement")
    xi1 = np.zeros(X.shape[-1])
    xi1[0] = 1.0
    xi2 = np.zeros(X.shape[-1])
    xi2[1:] = zt / u
    return TwoPlaneParams(float(m), float(l), float(p), float(q), 1.0 + float(eta), 1.0, xi1, xi2)


def build_a_phi(params: TwoPlaneParams, phi: float) -> np.ndarray:
    """2x2 matrix of the two-plane map on (xi1, xi2) realizing the trace value phi.

    Columns are the images of xi1 and xi2.  The determinant of the block is
    d = (phi (m^2+l^2) - (rr m p + ss l q)) / (rr l q + ss m p), which must
    lie in [-1, 1] for the map to be a contraction.
    """
    m, l, p, q = params.m, params.l, params.p, params.q
    M2 = m * m + l * l
    denom = params.rr * l * q + params.ss * m * p
    if denom == 0:
        raise ValidationError("two-plane map undefined: rr*l*q + ss*m*p vanishes")
    d = (phi * M2 - (params.rr * m * p + params.ss * l * q)) / denom
    if abs(d) > 1.0 + 1e-10:
        lo, hi = params.phi_band()
        raise AdmissibilityError(f"phi = {phi:.6g} outside the realizable band [{lo:.6g}, {hi:.6g}]")
    d = float(np.clip(d, -1.0, 1.0))
    return np.array([
        [(m * p + d * l * q) / M2, (l * p - d * m * q) / M2],
        [(m * q - d * l * p) / M2, (l * q + d * m * p) / M2],
    ])


def psd_sqrt_2x2(Msym: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root of a symmetric PSD 2x2 matrix.

    Eigenvalues below -1e-12 are rejected; small negative ones are clamped
    to zero so that near-singular inputs stay PSD.
    """
    M = np.asarray(Msym, dtype=float)
    if M.shape != (2, 2):
        raise ValidationError(f"expected a 2x2 matrix, got shape {M.shape}")
    if abs(M[0, 1] - M[1, 0]) > 1e-12 * max(1.0, np.abs(M).max()):
        raise ValidationError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    if np.any(vals < -1e-12):
        raise ValidationError(f"matrix is not positive semidefinite (eigenvalue {vals.min():.3g})")
    root = vecs @ np.diag(np.sqrt(np.maximum(vals, 0.0))) @ vecs.T
    return 0.5 * (root + root.T)


# ---------------------------------------------------------------------------
# orthonormal frames


def complete_frame(vectors, dim: int) -> np.ndarray:
    """Orthonormal basis of R^dim whose first columns span the given vectors.

    Modified Gram-Schmidt over the inputs followed by the standard basis;
    raises on (near-)dependent inputs.
    """
    cols = []
    for v in vectors:
        v = np.asarray(v, dtype=float).copy()
        norm0 = np.linalg.norm(v)
        if norm0 <= 0:
            raise DegenerateStateError("zero vector cannot start a frame")
        for c in cols:
            v -= np.dot(c, v) * c
        norm = np.linalg.norm(v)
        if norm <= 1e-9 * norm0:
            raise DegenerateStateError("frame vectors are (nearly) linearly dependent")
        cols.append(v / norm)
    for i in range(dim):
        if len(cols) == dim:
            break
        v = np.zeros(dim)
        v[i] = 1.0
        for c in cols:
            v -= np.dot(c, v) * c
        norm = np.linalg.norm(v)
        if norm > 0.5:   # keep only well-conditioned completions
            cols.append(v / norm)
    if len(cols) != dim:
        raise DegenerateStateError("could not complete the frame")
    return np.stack(cols, axis=1)


def frame_from_pair(spec: SpaceSpec, X, Y) -> np.ndarray:
    """Ordered orthonormal ambient basis whose first vectors span the
    distinguished plane of the construction: span{X, Y} on the sphere,
    span{e1, Z-tilde} on hyperbolic space, span{Z} in Euclidean space."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    N = spec.ambient_dim
    if spec.kind is SpaceKind.SPHERE:
        return complete_frame([X, Y], N)
    if spec.kind is SpaceKind.HYPERBOLIC:
        zt = X - Y
        zt[0] = 0.0
        e1 = np.zeros(N)
        e1[0] = 1.0
        return complete_frame([e1, zt], N)
    return complete_frame([X - Y], N)


# ---------------------------------------------------------------------------
# validating single-state constructors


def build_euclidean(n: int, Z, rho: float, rho_prime: float) -> CouplingMatrices:
    """Matrices with J'Z = Z, K'Z = 0 and n - tr J = rho rho'."""
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (n,):
        raise ValidationError(f"Z must have shape ({n},), got {Z.shape}")
    if np.linalg.norm(Z) <= 1e-12:
        raise DegenerateStateError("coincident points: Z = 0")
    drift = rho * rho_prime
    if n == 1:
        if abs(drift) > BAND_TOL:
            raise AdmissibilityError("in dimension 1 only a constant distance is admissible")
        return CouplingMatrices(np.ones((1, 1)), np.zeros((1, 1)))
    lam = 1.0 - drift / (n - 1)
    if not -1.0 - 1e-12 <= lam <= 1.0 + 1e-12:
        raise AdmissibilityError(
            f"rho rho' = {drift:.6g} outside the admissible range [0, {2*(n-1):.6g}]")
    J, K = euclidean_matrices(Z, np.clip(lam, -1.0, 1.0))
    return CouplingMatrices(J, K)


def build_sphere(n: int, X, Y, eta: float, eta_prime: float) -> CouplingMatrices:
    """Matrices realizing d(eta)/dt = eta' on the unit sphere, eta = cos rho.

    The reflection part is built from the actual points; ``eta`` enters only
    the transverse eigenvalue gamma = eta + eta'/(n-1) and the band check
    -(n-1)(eta+1) <= eta' <= -(n-1)(eta-1).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != (n + 1,) or Y.shape != (n + 1,):
        raise ValidationError(f"points must have ambient dimension {n + 1}")
    for v in (X, Y):
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValidationError("sphere points must be unit vectors")
    c = float(np.dot(X, Y))
    if abs(c) >= 1.0 - DEGENERATE_ETA:
        raise DegenerateStateError("coincident or antipodal points on the sphere")
    k = n - 1
    if not -k * (eta + 1.0) - BAND_TOL <= eta_prime <= -k * (eta - 1.0) + BAND_TOL:
        raise AdmissibilityError(
            f"eta' = {eta_prime:.6g} outside the band [{-k*(eta+1):.6g}, {-k*(eta-1):.6g}]")
    J, K = sphere_matrices(X, Y, eta, eta_prime)
    return CouplingMatrices(J, K)


def build_hyperbolic(n: int, X, Y, eta: float, eta_prime: float) -> CouplingMatrices:
    """Matrices realizing d(eta)/dt = eta' on half-space, eta = cosh(rho) - 1."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != (n,) or Y.shape != (n,):
        raise ValidationError(f"points must have ambient dimension {n}")
    if X[0] <= 0 or Y[0] <= 0:
        raise ValidationError("half-space points need a positive first coordinate")
    if np.linalg.norm(X - Y) <= 1e-12 * (X[0] + Y[0]):
        raise DegenerateStateError("coincident points")
    k = n - 1
    if not k * eta - BAND_TOL <= eta_prime <= k * eta + 2.0 * k + BAND_TOL:
        raise AdmissibilityError(
            f"eta' = {eta_prime:.6g} outside the band [{k*eta:.6g}, {k*eta + 2*k:.6g}]")
    J, K, gamma, d = hyperbolic_matrices(X, Y, eta, eta_prime, clip=False)
    if np.any(np.abs(d) > 1.0 + 1e-10):
        raise AdmissibilityError(f"two-plane determinant {float(np.max(np.abs(d))):.6g} exceeds 1")
    J2, K2, _, _ = hyperbolic_matrices(X, Y, eta, eta_prime, clip=True)
    return CouplingMatrices(J2, K2)
