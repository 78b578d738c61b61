"""Eavesdropper information bounds for the permuted time-bin protocol.

The attack model: the adversary applies a fixed linear map to every time
slot, turning an empty slot into ``v0`` (no click at the receiver) or
``p0`` (click), and an occupied slot into ``vmu`` (no click) or ``pmu``
(click).  Unitarity pins the overlap ``<v0|vmu> = exp(-mu/2)``, the
monitored interference visibility pins ``<vmu|pmu>**2 = V``, and ``p0``
is taken orthogonal to everything, which is the adversary's best choice.
The single remaining degree of freedom is ``x = <v0|pmu>``, constrained
to the interval where the Gram matrix of (v0, vmu, pmu) stays positive
semidefinite.

Two routes compute the adversary's Holevo information:

* closed forms (:func:`holevo_ae`, :func:`holevo_be`) built from the
  eigenvalue structure of the conditional states, and
* a brute-force density-matrix oracle (:func:`holevo_oracle`) that embeds
  the slot vectors explicitly, builds the d-fold tensor-product states,
  and diagonalizes.  The oracle is the ground truth the closed forms are
  tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "EveGram",
    "SecurityReport",
    "entropy_term",
    "x_interval",
    "holevo_ae",
    "holevo_be",
    "holevo_oracle",
    "eve_optimal_holevo",
    "mutual_info_ab",
    "secure_fraction",
]

_GRID_POINTS = 10_001
_REFINE_XTOL = 1e-10
_PSD_TOL = 1e-12


@dataclass(frozen=True)
class EveGram:
    """Inner products constraining the adversary's slot-level attack.

    g: ``<v0|vmu>``, fixed to ``exp(-mu/2)`` by unitarity.
    w: ``<vmu|pmu>``, fixed to ``sqrt(V)`` by the visibility monitor.
    x: ``<v0|pmu>``, the adversary's free parameter.

    ``p0`` is orthogonal to all three vectors and does not appear.
    """

    g: float
    w: float
    x: float

    def __post_init__(self):
        for name, val in (("g", self.g), ("w", self.w), ("x", self.x)):
            if not 0.0 <= val <= 1.0:
                raise InvalidArgumentError(f"{name}={val} outside [0, 1]")
        if self.gram_determinant() < -_PSD_TOL:
            raise InvalidArgumentError(
                f"no vector geometry realizes g={self.g}, w={self.w}, x={self.x}"
            )

    @classmethod
    def from_channel(cls, mu: float, visibility: float, x: float) -> "EveGram":
        if mu <= 0.0:
            raise InvalidArgumentError(f"mu={mu} must be positive")
        if not 0.0 <= visibility <= 1.0:
            raise InvalidArgumentError(f"visibility={visibility} outside [0, 1]")
        return cls(g=math.exp(-mu / 2.0), w=math.sqrt(visibility), x=x)

    def gram_determinant(self) -> float:
        """Determinant of the 3x3 Gram matrix of (v0, vmu, pmu).

        Non-negative iff the three unit vectors are realizable.
        """
        g, w, x = self.g, self.w, self.x
        return 1.0 + 2.0 * g * w * x - g * g - w * w - x * x


@dataclass(frozen=True)
class SecurityReport:
    """Adversary bounds and the secure fraction at the optimal attack."""

    chi_ae: float  # Holevo bound on info about the sender's symbol (bits)
    chi_be: float  # Holevo bound on info about the receiver's outcome (bits)
    i_ab: float    # secure bits per detected qudit after subtracting the leak
    x_star: float  # adversary's optimal <v0|pmu>


def entropy_term(p):
    """``-p * log2(p)`` with the limit value 0 at ``p = 0``.

    Accepts scalars or arrays.  Every eigenvalue contribution in the
    closed forms below is this same function.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0.0):
        raise InvalidArgumentError("entropy_term requires p >= 0")
    out = np.zeros_like(arr)
    pos = arr > 0.0
    out[pos] = -arr[pos] * np.log2(arr[pos])
    if np.isscalar(p) or arr.ndim == 0:
        return float(out)
    return out


def x_interval(mu: float, visibility: float) -> tuple[float, float]:
    """Range of ``x = <v0|pmu>`` allowed by positive semidefiniteness.

    With ``g = exp(-mu/2)`` and ``w = sqrt(V)`` the Gram determinant is a
    downward parabola in x; its roots are ``g*w -/+ sqrt((1-g^2)(1-w^2))``,
    intersected with [0, 1].
    """
    if mu <= 0.0:
        raise InvalidArgumentError(f"mu={mu} must be positive")
    if not 0.0 <= visibility <= 1.0:
        raise InvalidArgumentError(f"visibility={visibility} outside [0, 1]")
    g = math.exp(-mu / 2.0)
    w = math.sqrt(visibility)
    half_width = math.sqrt(max(0.0, (1.0 - g * g) * (1.0 - w * w)))
    lo = max(0.0, g * w - half_width)
    hi = min(1.0, g * w + half_width)
    return lo, hi


def _validate_domain(d: int, q: float, mu: float) -> None:
    if not (isinstance(d, (int, np.integer)) and d >= 2):
        raise InvalidArgumentError(f"d={d} must be an integer >= 2")
    if not 0.0 <= q <= 1.0 / (d - 1):
        raise InvalidArgumentError(f"Q={q} outside [0, 1/(d-1)] for d={d}")
    if mu <= 0.0:
        raise InvalidArgumentError(f"mu={mu} must be positive")


def _average_state_entropy(d: int, q: float, mu: float, x):
    """Entropy of the adversary's ensemble-average state.

    The average state block-diagonalizes into d identical "wrong outcome"
    blocks (one per p0 position, Gram off-diagonal ``exp(-mu)``) and one
    "correct outcome" block (Gram off-diagonal ``x**2``); the entropy is
    the entropy of the scaled block eigenvalues.
    """
    x = np.asarray(x, dtype=float)
    em = math.exp(-mu)
    e_tot = (d - 1) * q
    wrong = d * entropy_term(q / d * ((d - 2) * em + 1.0)) + d * (
        d - 2
    ) * entropy_term(q / d * (1.0 - em))
    xx = x * x
    correct = entropy_term((1.0 - e_tot) / d * ((d - 1) * xx + 1.0)) + (
        d - 1
    ) * entropy_term((1.0 - e_tot) / d * (1.0 - xx))
    return wrong + correct


def holevo_ae(d: int, q: float, mu: float, x):
    """Holevo bound on the adversary's information about the sender's
    symbol, in bits.

    Conditioned on the sent symbol, the wrong-outcome states carry the
    adversary's marker vector at distinct slots and are mutually
    orthogonal, so the conditional entropy is that of the bare outcome
    distribution ``{1-(d-1)Q, Q, ..., Q}``.

    ``x`` may be an array; the result is clamped to [0, log2(d)].
    """
    _validate_domain(d, q, mu)
    e_tot = (d - 1) * q
    conditional = (d - 1) * entropy_term(q) + entropy_term(1.0 - e_tot)
    chi = _average_state_entropy(d, q, mu, x) - conditional
    return _clamp_bits(chi, d, np.isscalar(x))


def holevo_be(d: int, q: float, mu: float, x):
    """Holevo bound on the adversary's information about the receiver's
    outcome, in bits.

    Conditioned on the received symbol, the wrong-outcome states share
    the marker slot and overlap pairwise by ``exp(-mu)``, which
    concentrates the conditional spectrum into ``Q*((d-2)*exp(-mu)+1)``
    plus ``d-2`` copies of ``Q*(1-exp(-mu))`` and lowers the conditional
    entropy; the bound is correspondingly larger than :func:`holevo_ae`.
    """
    _validate_domain(d, q, mu)
    em = math.exp(-mu)
    e_tot = (d - 1) * q
    conditional = (
        entropy_term(q * ((d - 2) * em + 1.0))
        + (d - 2) * entropy_term(q * (1.0 - em))
        + entropy_term(1.0 - e_tot)
    )
    chi = _average_state_entropy(d, q, mu, x) - conditional
    return _clamp_bits(chi, d, np.isscalar(x))


def _clamp_bits(chi, d: int, scalar: bool):
    # entropy arithmetic near p in {0, 1} leaves -1e-16-size residue
    clipped = np.clip(chi, 0.0, math.log2(d))
    return float(clipped) if scalar or np.ndim(clipped) == 0 else clipped


def _vn_entropy(rho: np.ndarray) -> float:
    evals = np.linalg.eigvalsh(rho)
    return float(np.sum(entropy_term(np.clip(evals, 0.0, None))))


def holevo_oracle(d: int, q: float, mu: float, x: float) -> tuple[float, float]:
    """Brute-force Holevo bounds from explicit density matrices.

    Embeds the four slot vectors in R^4, forms every d-slot tensor
    product state, builds the conditional mixtures for sender and
    receiver, and evaluates ``S(rho_bar) - mean_i S(rho_i)`` by
    eigendecomposition.  Exponential in d, hence the d <= 4 guard.

    Returns ``(chi_ae, chi_be)``.
    """
    _validate_domain(d, q, mu)
    if d > 4:
        raise InvalidArgumentError("oracle cost grows as 4**d; use d in {2, 3, 4}")
    if not 0.0 <= x <= 1.0:
        raise InvalidArgumentError(f"x={x} outside [0, 1]")

    g = math.exp(-mu / 2.0)
    v0 = np.array([1.0, 0.0, 0.0, 0.0])
    vmu = np.array([g, math.sqrt(max(0.0, 1.0 - g * g)), 0.0, 0.0])
    # pmu only needs unit norm and <v0|pmu> = x; the bounds do not depend
    # on <vmu|pmu>, so the free component goes on a fresh axis.
    pmu = np.array([x, 0.0, math.sqrt(max(0.0, 1.0 - x * x)), 0.0])
    p0 = np.array([0.0, 0.0, 0.0, 1.0])

    def product_state(slot_vectors):
        out = slot_vectors[0]
        for vec in slot_vectors[1:]:
            out = np.kron(out, vec)
        return out

    def correct_state(i):
        return product_state([pmu if m == i else v0 for m in range(d)])

    def wrong_state(i, k):
        # sent i, received k: marker p0 at slot k, surviving vmu at slot i
        return product_state(
            [p0 if m == k else (vmu if m == i else v0) for m in range(d)]
        )

    e_tot = (d - 1) * q
    dim = 4**d
    rho_bar = np.zeros((dim, dim))
    cond_ae = 0.0
    cond_be = 0.0
    for i in range(d):
        ci = correct_state(i)
        rho_sender = (1.0 - e_tot) * np.outer(ci, ci)
        rho_receiver = (1.0 - e_tot) * np.outer(ci, ci)
        for k in range(d):
            if k == i:
                continue
            w_ik = wrong_state(i, k)
            w_ki = wrong_state(k, i)
            rho_sender += q * np.outer(w_ik, w_ik)
            rho_receiver += q * np.outer(w_ki, w_ki)
        rho_bar += rho_sender / d
        cond_ae += _vn_entropy(rho_sender) / d
        cond_be += _vn_entropy(rho_receiver) / d

    s_bar = _vn_entropy(rho_bar)
    chi_ae = min(max(s_bar - cond_ae, 0.0), math.log2(d))
    chi_be = min(max(s_bar - cond_be, 0.0), math.log2(d))
    return chi_ae, chi_be


def _golden_max(f, lo: float, hi: float, xtol: float) -> float:
    """Golden-section maximizer on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    e = a + invphi * (b - a)
    fc, fe = f(c), f(e)
    while b - a > xtol:
        if fc >= fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = f(e)
    return 0.5 * (a + b)


def eve_optimal_holevo(d: int, q: float, mu: float, visibility: float) -> SecurityReport:
    """Maximize the receiver-side Holevo bound over the adversary's free
    overlap and report both bounds at the optimum.

    The maximization scans a dense grid (:data:`_GRID_POINTS` points)
    over the admissible interval and refines the best cell by
    golden-section search.  The two bounds differ by an x-independent
    amount, so the same ``x_star`` maximizes both.
    """
    _validate_domain(d, q, mu)
    lo, hi = x_interval(mu, visibility)
    if not lo <= hi:
        raise InvalidArgumentError(
            f"empty admissible interval for mu={mu}, visibility={visibility}"
        )
    if hi - lo < _REFINE_XTOL:
        x_star = 0.5 * (lo + hi)
    else:
        xs = np.linspace(lo, hi, _GRID_POINTS)
        vals = holevo_be(d, q, mu, xs)
        best = int(np.argmax(vals))
        a = xs[max(best - 1, 0)]
        b = xs[min(best + 1, _GRID_POINTS - 1)]
        x_star = _golden_max(lambda t: holevo_be(d, q, mu, t), a, b, _REFINE_XTOL)
    chi_ae = holevo_ae(d, q, mu, x_star)
    chi_be = holevo_be(d, q, mu, x_star)
    i_ab = max(mutual_info_ab(d, q) - chi_ae, 0.0)
    return SecurityReport(chi_ae=chi_ae, chi_be=chi_be, i_ab=i_ab, x_star=x_star)


def mutual_info_ab(d: int, q: float) -> float:
    """Shannon information shared per detected qudit, in bits.

    ``log2(d) + (d-1)*Q*log2(Q) + (1-(d-1)Q)*log2(1-(d-1)Q)``, i.e. the
    qudit capacity minus the equivocation of the symmetric error channel.
    """
    if not (isinstance(d, (int, np.integer)) and d >= 2):
        raise InvalidArgumentError(f"d={d} must be an integer >= 2")
    if not 0.0 <= q <= 1.0 / (d - 1):
        raise InvalidArgumentError(f"Q={q} outside [0, 1/(d-1)] for d={d}")
    e_tot = (d - 1) * q
    return math.log2(d) - (d - 1) * entropy_term(q) - entropy_term(1.0 - e_tot)


def secure_fraction(d: int, q: float, mu: float, visibility: float) -> float:
    """Secure bits per detected qudit against the optimal attack.

    Subtracts the sender-side Holevo bound at the adversary's optimum
    from the shared information and clamps at zero.  The sender-side
    bound is the right leak term here because reconciliation is direct:
    the distilled key is the sender's raw string and the receiver
    corrects toward it.
    """
    report = eve_optimal_holevo(d, q, mu, visibility)
    return report.i_ab
