"""Recurrence regime classification and predicted limit constants.

Everything here is a deterministic function of the two environment laws.
The cumulant-like function

    psi(t) = log E[ sum_i A_i^t ] = log E[N] + log( sum_j p_j a_j^t )

(the split uses independence of the weights from N) is convex in t. Its
minimum over [0,1] (chi), its derivative at 1, its root above 1 (kappa), and
the Legendre-type rate

    j_tilde(a) = inf_{t >= 0} { psi(-t) - a t },   gamma_tilde = sup{a : j_tilde(a) > 0}

drive the regime tags and the limit constants for the largest fully visited
generation, the root local time, and the deepest visited vertex.

Regimes:

* TRANSIENT                chi > 0
* POS_REC_CHI_NEG          chi < 0
* POS_REC_BOUNDARY         chi = 0, psi'(1) > 0
* NULL_REC_CRITICAL        chi = 0, psi'(1) = 0
* NULL_REC_SUBDIFFUSIVE    chi = 0, psi'(1) < 0   (kappa meaningful here)

with equalities read within the classification tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .env import EnvironmentSpec, require_valid
from .errors import NumericalError, UsageError
from .scalaropt import bisect_sign_change, golden_min

DEFAULT_TOL = 1e-9

KAPPA_TCAP_START = 4.0
KAPPA_TCAP_LIMIT = 512.0

TRANSIENT = "TRANSIENT"
POS_REC_CHI_NEG = "POS_REC_CHI_NEG"
POS_REC_BOUNDARY = "POS_REC_BOUNDARY"
NULL_REC_CRITICAL = "NULL_REC_CRITICAL"
NULL_REC_SUBDIFFUSIVE = "NULL_REC_SUBDIFFUSIVE"

RECURRENT_REGIMES = (POS_REC_CHI_NEG, POS_REC_BOUNDARY,
                     NULL_REC_CRITICAL, NULL_REC_SUBDIFFUSIVE)

LOG_N = "LOG_N"
LOG_N_CUBED = "LOG_N_CUBED"
POLY = "POLY"


def _log_mean_offspring(spec: EnvironmentSpec) -> float:
    return math.log(spec.offspring.mean())


def psi(spec: EnvironmentSpec, t: float) -> float:
    """log E[N] + logsumexp_j(log p_j + t log a_j)."""
    terms = [math.log(p) + t * math.log(a) for a, p in spec.weights.support]
    m = max(terms)
    return _log_mean_offspring(spec) + m + math.log(
        sum(math.exp(x - m) for x in terms))


def psi_prime(spec: EnvironmentSpec, t: float) -> float:
    """d/dt psi = (sum_j p_j a_j^t log a_j) / (sum_j p_j a_j^t), shift-stabilized."""
    logs = [(math.log(a), math.log(p) + t * math.log(a))
            for a, p in spec.weights.support]
    m = max(x for _, x in logs)
    num = sum(la * math.exp(x - m) for la, x in logs)
    den = sum(math.exp(x - m) for _, x in logs)
    return num / den


def chi(spec: EnvironmentSpec, tol: float = DEFAULT_TOL) -> float:
    """inf of psi over [0, 1] by golden section plus endpoint evaluation."""
    require_valid(spec)
    _, val = golden_min(lambda t: psi(spec, t), 0.0, 1.0, tol)
    return val


def kappa(spec: EnvironmentSpec, tol: float = DEFAULT_TOL) -> float:
    """inf{t > 1 : psi(t) = 0}; +inf when psi never returns to 0.

    Requires psi(1) = 0 and psi'(1) < 0 (within tol): the regime where the
    root above 1 is meaningful.
    """
    require_valid(spec)
    if abs(psi(spec, 1.0)) > tol or psi_prime(spec, 1.0) >= -tol:
        raise UsageError("kappa needs psi(1) = 0 and psi'(1) < 0")
    if spec.weights.a_max() <= 1.0:
        # all steps of psi(t) for t > 1 stay nonpositive; no crossing
        return math.inf
    t_hi = KAPPA_TCAP_START
    while psi(spec, t_hi) <= 0.0:
        t_hi *= 2.0
        if t_hi > KAPPA_TCAP_LIMIT:
            raise NumericalError(
                "kappa: psi stayed <= 0 up to t = %g" % KAPPA_TCAP_LIMIT)
    return bisect_sign_change(lambda t: psi(spec, t) <= 0.0, 1.0, t_hi, tol)


def s_inf(spec: EnvironmentSpec) -> float:
    """Asymptotic slope of psi(-t): log(1 / a_min)."""
    return -math.log(spec.weights.a_min())


def j_tilde(spec: EnvironmentSpec, a: float, tol: float = DEFAULT_TOL) -> float:
    """inf_{t >= 0} { psi(-t) - a t }.

    Above the slope bound s_inf the infimum runs away to -inf; exactly at
    s_inf it collapses onto the minimal-weight atoms and equals
    log(E[N] * p_min).
    """
    require_valid(spec)
    if a <= 0.0:
        raise UsageError("j_tilde needs a > 0, got %r" % a)
    si = s_inf(spec)
    if a > si:
        return -math.inf
    if a == si:
        return math.log(spec.offspring.mean() * spec.weights.p_min())
    g = lambda t: psi(spec, -t) - a * t

    # convex in t with asymptotic slope si - a > 0: grow the bracket until
    # the tail is visibly rising, then golden-section inside it
    hi = 1.0
    while g(hi) <= g(hi * 0.5):
        hi *= 2.0
        if hi > 1e9:
            raise NumericalError("j_tilde bracket failed to close (a=%r)" % a)
    _, val = golden_min(g, 0.0, hi, tol)
    return val


def gamma_tilde(spec: EnvironmentSpec, tol: float = DEFAULT_TOL) -> float:
    """sup{a > 0 : j_tilde(a) > 0}; requires a recurrent spec (chi <= tol)."""
    require_valid(spec)
    if chi(spec, tol) > tol:
        raise UsageError("gamma_tilde needs a recurrent spec (chi <= 0)")
    si = s_inf(spec)
    if j_tilde(spec, si, tol) > 0.0:
        return si
    # j_tilde(0+) = psi(0) > 0 and j_tilde is nonincreasing in a
    return bisect_sign_change(lambda a: j_tilde(spec, a, tol) > 0.0,
                              0.0, si, tol)


@dataclass(frozen=True)
class PredictedConstants:
    """Limit constants implied by the regime.

    r_limit:     limit of R_n / log n (largest fully visited generation)
    rtilde_limit: limit of R at the n-th root return over log n, = 1/gamma_tilde
    root_local_time_exponent: limit of log ell(root, n) / log n
    xstar_scaling: LOG_N | LOG_N_CUBED | POLY for the deepest visited vertex
    nu, nu_prime: POLY exponent pair (nu = 1 - 1/min(kappa,2)); None unless
        the sub-diffusive regime makes them meaningful
    """

    r_limit: float
    rtilde_limit: float
    root_local_time_exponent: float
    xstar_scaling: str
    nu: float | None
    nu_prime: float | None


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    psi0: float
    psi1: float
    chi: float
    psi_prime_1: float
    kappa: float | None  # None when not meaningful; math.inf allowed
    gamma_tilde: float | None  # None for TRANSIENT
    predicted: PredictedConstants | None  # None for TRANSIENT

    def to_jsonable(self) -> dict:
        kap: float | str | None = self.kappa
        if kap is not None and math.isinf(kap):
            kap = "inf"
        pred = None
        if self.predicted is not None:
            pred = {
                "r_limit": self.predicted.r_limit,
                "rtilde_limit": self.predicted.rtilde_limit,
                "root_local_time_exponent": self.predicted.root_local_time_exponent,
                "xstar_scaling": self.predicted.xstar_scaling,
                "nu": self.predicted.nu,
                "nu_prime": self.predicted.nu_prime,
            }
        return {
            "regime": self.regime,
            "psi0": self.psi0,
            "psi1": self.psi1,
            "chi": self.chi,
            "psi_prime_1": self.psi_prime_1,
            "kappa": kap,
            "gamma_tilde": self.gamma_tilde,
            "predicted": pred,
        }


def classify(spec: EnvironmentSpec, tol: float = DEFAULT_TOL) -> RegimeReport:
    """Classify the environment and fill in its predicted constants."""
    require_valid(spec)
    psi0 = psi(spec, 0.0)
    psi1 = psi(spec, 1.0)
    ch = chi(spec, tol)
    dp1 = psi_prime(spec, 1.0)

    if ch > tol:
        return RegimeReport(TRANSIENT, psi0, psi1, ch, dp1,
                            kappa=None, gamma_tilde=None, predicted=None)

    if ch < -tol:
        regime = POS_REC_CHI_NEG
    elif dp1 > tol:
        regime = POS_REC_BOUNDARY
    elif dp1 < -tol:
        regime = NULL_REC_SUBDIFFUSIVE
    else:
        regime = NULL_REC_CRITICAL

    gt = gamma_tilde(spec, tol)
    kap: float | None = None
    nu = nu_prime = None
    rtilde = 1.0 / gt
    if regime == NULL_REC_SUBDIFFUSIVE:
        kap = kappa(spec, tol)
        mk = min(kap, 2.0)
        nu_prime = 1.0 / mk
        nu = 1.0 - nu_prime
        pred = PredictedConstants(
            r_limit=1.0 / (gt * mk),
            rtilde_limit=rtilde,
            root_local_time_exponent=nu_prime,
            xstar_scaling=POLY,
            nu=nu,
            nu_prime=nu_prime,
        )
    else:
        scaling = LOG_N if regime == POS_REC_CHI_NEG else LOG_N_CUBED
        pred = PredictedConstants(
            r_limit=rtilde,
            rtilde_limit=rtilde,
            root_local_time_exponent=1.0,
            xstar_scaling=scaling,
            nu=None,
            nu_prime=None,
        )
    return RegimeReport(regime, psi0, psi1, ch, dp1,
                        kappa=kap, gamma_tilde=gt, predicted=pred)
