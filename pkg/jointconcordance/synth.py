"""Synthetic competing-risks cohorts and ground-truth metric oracles.

The default generator draws X ~ N(0, 1) and latent exponential times

* censoring with rate ``rate0 * exp(beta0 * X)``,
* event 1 with rate ``rate1 * exp(beta1 * X)``,
* event 2 with rate ``rate2 * exp(beta2 * cos(X))``,

observing the earliest one. Event-type CIFs are closed form, so population
metrics can be computed by quadrature as well as by large-sample simulation.
"""
import logging
import math
import typing
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .base import Report
from .core import Dataset, RiskModel, evaluation_horizon, require_dimension
from .errors import BracketingFailure, QuadratureNonConvergence
from .metrics import MetricReport, joint_concordance
from .utils import rng_for

_LOGGER = logging.getLogger(__name__)

_MIN_LARGE_COHORT = 100_000
_HERMITE_NODES = 64
_DOMAIN = 9.0
_PIECES = 32
_GRID_POINTS = 2049
_MAX_LEGENDRE_ORDER = 64
_MAX_DOUBLINGS = 60

# -----------------------------------------------------------------------------


@dataclass
class SynthConfig(Report):
    """Parameters of the default competing-risks generator."""

    rate1: float = 1.0
    rate2: float = 2.0
    beta1: float = 1.0
    beta2: float = 1.0
    beta0: float = 0.0
    """Covariate effect on censoring (0 for covariate-independent censoring)."""
    rate0: float = 0.0
    """Censoring baseline rate (0 for no censoring)."""
    n: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.rate1 <= 0 or self.rate2 <= 0:
            raise ValueError("Event rates must be positive")
        if self.rate0 < 0:
            raise ValueError("Censoring rate must be nonnegative")
        if self.n < 2:
            raise ValueError(f"At least 2 subjects required, got {self.n}")

    def event_rates(self, x: np.ndarray) -> np.ndarray:
        """Cause-specific hazards of shape (n, 2)."""
        x = np.asarray(x, dtype=float)
        return np.stack(
            (
                self.rate1 * np.exp(self.beta1 * x),
                self.rate2 * np.exp(self.beta2 * np.cos(x)),
            ),
            axis=-1,
        )

    def censoring_rates(
        self, x: np.ndarray, rate0: typing.Optional[float] = None
    ) -> np.ndarray:
        """Censoring hazard at each covariate value."""
        rate0 = self.rate0 if rate0 is None else rate0
        return rate0 * np.exp(self.beta0 * np.asarray(x, dtype=float))


def generate(cfg: SynthConfig) -> Dataset:
    """Draw a cohort from the default generator."""
    rng = rng_for(cfg.seed)
    x = rng.standard_normal(cfg.n)
    rates = np.column_stack((cfg.censoring_rates(x), cfg.event_rates(x)))
    draws = rng.standard_exponential((cfg.n, 3))

    with np.errstate(divide="ignore"):
        latent = draws / rates

    ds = Dataset.from_arrays(
        x.reshape(-1, 1),
        latent.min(axis=1),
        latent.argmin(axis=1),
        covariate_names=["x"],
        n_event_types=2,
    )

    _LOGGER.debug(
        "Generated %s record(s) (seed=%s, censored=%.3f)",
        cfg.n,
        cfg.seed,
        ds.censored_fraction,
    )
    return ds


def _hermite(nodes: int) -> typing.Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E[f(X)], X ~ N(0, 1)."""
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    return x, w / math.sqrt(2.0 * math.pi)


def expected_censored_fraction(
    rate0: float, cfg: SynthConfig, nodes: int = _HERMITE_NODES
) -> float:
    """Population fraction of censored subjects for censoring rate ``rate0``."""
    x, w = _hermite(nodes)
    censoring = cfg.censoring_rates(x, rate0)
    total = censoring + cfg.event_rates(x).sum(axis=1)
    return float(np.dot(w, censoring / total))


def calibrate_censoring_rate(
    target: float,
    cfg: typing.Optional[SynthConfig] = None,
    precision: float = 1e-4,
    nodes: int = _HERMITE_NODES,
) -> float:
    """Censoring baseline rate giving the target censored fraction.

    Solves the Gauss-Hermite expectation of the censoring share by bisection.

    Example
    -------

    >>> rate = calibrate_censoring_rate(0.5)
    >>> abs(expected_censored_fraction(rate, SynthConfig()) - 0.5) < 1e-4
    True
    """
    if not 0 < target < 1:
        raise ValueError(f"Target censored fraction must be in (0, 1), got {target}")

    cfg = cfg or SynthConfig()

    def excess(rate0: float) -> float:
        return expected_censored_fraction(rate0, cfg, nodes) - target

    upper = 1.0
    for _ in range(_MAX_DOUBLINGS):
        if excess(upper) > 0:
            break
        upper *= 2
    else:
        raise BracketingFailure(
            f"Could not bracket censoring rate for target {target}", target=target
        )

    rate0 = optimize.bisect(excess, 0.0, upper, xtol=1e-14, rtol=1e-14, maxiter=500)
    achieved = excess(rate0) + target
    if abs(achieved - target) >= precision:
        raise BracketingFailure(
            f"Censored fraction {achieved} misses target {target}",
            target=target,
            achieved=achieved,
        )

    _LOGGER.debug(
        "Calibrated censoring rate %s for target %s (beta0=%s)",
        rate0,
        target,
        cfg.beta0,
    )
    return float(rate0)


def population_horizon(
    quantile: float,
    cfg: typing.Optional[SynthConfig] = None,
    nodes: int = _HERMITE_NODES,
) -> float:
    """Quantile of the uncensored event-time distribution.

    Example
    -------

    >>> t = population_horizon(0.75)
    >>> x, w = _hermite(64)
    >>> rates = SynthConfig().event_rates(x).sum(axis=1)
    >>> round(float(np.dot(w, 1 - np.exp(-rates * t))), 6)
    0.75
    """
    if not 0 < quantile < 1:
        raise ValueError(f"Quantile must be in (0, 1), got {quantile}")

    cfg = cfg or SynthConfig()
    x, w = _hermite(nodes)
    rates = cfg.event_rates(x).sum(axis=1)

    def excess(t: float) -> float:
        return float(np.dot(w, -np.expm1(-rates * t))) - quantile

    upper = 1.0
    for _ in range(_MAX_DOUBLINGS):
        if excess(upper) > 0:
            break
        upper *= 2
    else:
        raise BracketingFailure(f"Could not bracket horizon for quantile {quantile}")

    return float(optimize.brentq(excess, 0.0, upper, xtol=1e-14))


# -----------------------------------------------------------------------------
# Other cohorts
# -----------------------------------------------------------------------------


def generate_score_cohort(n: int, seed: int = 0, n_event_types: int = 2) -> Dataset:
    """Uncensored cohort with uniform score columns independent of outcomes.

    Covariates ``u1..uK`` are i.i.d. uniform; event times are unit
    exponential and event types equiprobable.
    """
    rng = rng_for(seed)
    scores = rng.uniform(size=(n, n_event_types))
    times = rng.standard_exponential(n)
    events = rng.integers(1, n_event_types + 1, size=n)
    return Dataset.from_arrays(
        scores,
        times,
        events,
        covariate_names=[f"u{k}" for k in range(1, n_event_types + 1)],
        n_event_types=n_event_types,
    )


@dataclass
class EventSpecificConfig(Report):
    """Generator with independent normal covariates and per-event effects.

    Event k has hazard ``rates[k] * exp(coefficients[k] . x)``.
    """

    rates: typing.List[float] = field(default_factory=lambda: [1.0, 0.5])
    coefficients: typing.List[typing.List[float]] = field(
        default_factory=lambda: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
    )
    rate0: float = 0.0
    n: int = 1000
    seed: int = 0

    def __post_init__(self):
        if len(self.rates) != len(self.coefficients):
            raise ValueError("One coefficient vector required per event type")
        if len({len(beta) for beta in self.coefficients}) != 1:
            raise ValueError("Coefficient vectors must have the same length")
        if any(rate <= 0 for rate in self.rates) or self.rate0 < 0:
            raise ValueError("Rates must be positive")

    @property
    def dimension(self) -> int:
        """Number of covariates."""
        return len(self.coefficients[0])


def generate_event_specific(cfg: EventSpecificConfig) -> Dataset:
    """Draw a cohort from the event-specific covariate generator."""
    rng = rng_for(cfg.seed)
    x = rng.standard_normal((cfg.n, cfg.dimension))
    hazards = np.asarray(cfg.rates) * np.exp(x @ np.asarray(cfg.coefficients).T)
    rates = np.column_stack((np.full(cfg.n, cfg.rate0), hazards))
    draws = rng.standard_exponential(rates.shape)

    with np.errstate(divide="ignore"):
        latent = draws / rates

    return Dataset.from_arrays(
        x,
        latent.min(axis=1),
        latent.argmin(axis=1),
        n_event_types=len(cfg.rates),
    )


class TrueCifModel(RiskModel):
    """Scores subjects by the generator's own cumulative incidences.

    F_k(t | x) = rate_k(x) / r(x) * (1 - exp(-r(x) t)), with r the all-cause rate.
    """

    n_event_types = 2

    def __init__(self, config: typing.Optional[SynthConfig] = None):
        self.config = config or SynthConfig()

    def risk_matrix(self, covariates: np.ndarray, t: float) -> np.ndarray:
        covariates = np.asarray(covariates, dtype=float)
        require_dimension(covariates, 1, "True CIF model")
        rates = self.config.event_rates(covariates[:, 0])
        total = rates.sum(axis=1, keepdims=True)
        return rates / total * -np.expm1(-total * t)


# -----------------------------------------------------------------------------
# Monte Carlo oracle
# -----------------------------------------------------------------------------


def true_metrics_mc(
    model: RiskModel,
    quantile: float = 0.75,
    n_large: int = _MIN_LARGE_COHORT,
    seed: int = 0,
    config: typing.Optional[SynthConfig] = None,
    horizon: typing.Optional[float] = None,
    cohort: typing.Optional[Dataset] = None,
) -> MetricReport:
    """Metrics on a large uncensored cohort, with split-half standard errors.

    The cohort comes from the default generator without censoring unless one
    is given. The horizon defaults to the ``quantile`` of its observed times.
    """
    if cohort is None:
        if n_large < _MIN_LARGE_COHORT:
            raise ValueError(f"At least {_MIN_LARGE_COHORT} subjects required")
        cohort = generate(
            replace(config or SynthConfig(), rate0=0.0, n=n_large, seed=seed)
        )
    elif len(cohort) < _MIN_LARGE_COHORT:
        raise ValueError(f"At least {_MIN_LARGE_COHORT} subjects required")

    t = evaluation_horizon(cohort, quantile) if horizon is None else horizon
    report = joint_concordance(cohort, model, t)

    permutation = rng_for(seed, 1).permutation(len(cohort))
    middle = len(cohort) // 2
    halves = [
        joint_concordance(cohort.subset(np.sort(part)), model, t).values()
        for part in (permutation[:middle], permutation[middle:])
    ]
    report.standard_error = {
        name: abs(halves[0][name] - halves[1][name]) / 2
        for name in halves[0]
        if halves[0][name] is not None and halves[1][name] is not None
    }

    _LOGGER.debug("Oracle JC(%s) = %s", t, report.joint_concordance)
    return report


# -----------------------------------------------------------------------------
# Integral oracle
# -----------------------------------------------------------------------------


@dataclass
class IntegralTerms:
    """Population joint concordance and its decomposition."""

    joint_concordance: float
    conditional_concordance: float
    accuracy_star: float
    comparable_probability: float
    """Probability that a random ordered pair is comparable."""


def _pair_mass(
    cfg: SynthConfig, d: int, xi: np.ndarray, xj: np.ndarray, t: float
) -> np.ndarray:
    """Integral over s in [0, t] of (1 - F_d(s | xj)) dF_d(s | xi)."""
    rates_i = cfg.event_rates(xi)
    rates_j = cfg.event_rates(xj)
    a = rates_i.sum(axis=-1)
    b = rates_j.sum(axis=-1)
    p = rates_j[..., d - 1] / b
    return rates_i[..., d - 1] * (
        (1 - p) * -np.expm1(-a * t) / a + p * -np.expm1(-(a + b) * t) / (a + b)
    )


class _Quadrature:
    """Piecewise Gauss-Legendre rules over X split where indicators jump."""

    def __init__(self, model: RiskModel, t: float, order: int):
        self.model = model
        self.t = t
        self.legendre = np.polynomial.legendre.leggauss(order)
        self.edges = np.linspace(-_DOMAIN, _DOMAIN, _PIECES + 1)
        self.grid = np.linspace(-_DOMAIN, _DOMAIN, _GRID_POINTS)
        self.grid_scores = self.scores(self.grid)

    def scores(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.model.risk_matrix(np.reshape(x, (-1, 1)), self.t), float)

    def types(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.model.predict_types(np.reshape(x, (-1, 1)), self.t))

    def nodes(
        self, breakpoints: np.ndarray
    ) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nodes (P, L), density-weighted weights (P, L) and piece midpoints (P,)."""
        inside = breakpoints[(breakpoints > -_DOMAIN) & (breakpoints < _DOMAIN)]
        edges = np.unique(np.concatenate((self.edges, inside)))
        lengths = np.diff(edges)
        edges, lengths = edges[:-1][lengths > 0], lengths[lengths > 0]
        midpoints = edges + lengths / 2

        offsets, weights = self.legendre
        nodes = midpoints[:, None] + lengths[:, None] / 2 * offsets[None, :]
        density = np.exp(-nodes ** 2 / 2) / math.sqrt(2 * math.pi)
        return nodes, lengths[:, None] / 2 * weights[None, :] * density, midpoints

    def type_breakpoints(self) -> np.ndarray:
        """Where the predicted type changes."""
        types = self.types(self.grid)
        points = []
        for index in np.flatnonzero(types[:-1] != types[1:]):
            left = types[index]

            def side(x: float, left=left) -> float:
                return 1.0 if self.types(np.array([x]))[0] == left else -1.0

            points.append(
                optimize.bisect(
                    side, self.grid[index], self.grid[index + 1], xtol=1e-13
                )
            )

        return np.asarray(points, dtype=float)

    def score_breakpoints(self, d: int, level: float) -> np.ndarray:
        """Where the event-d score crosses ``level``."""
        excess = self.grid_scores[:, d - 1] - level
        signs = np.sign(excess)
        isolated = (signs == 0) & (np.roll(signs, 1) != 0) & (np.roll(signs, -1) != 0)
        points = list(self.grid[isolated])
        for index in np.flatnonzero(signs[:-1] * signs[1:] < 0):
            points.append(
                optimize.brentq(
                    lambda x: self.scores(np.array([x]))[0, d - 1] - level,
                    self.grid[index],
                    self.grid[index + 1],
                    xtol=1e-13,
                )
            )

        return np.asarray(points, dtype=float)


def _integral_terms(
    model: RiskModel,
    t: float,
    cfg: SynthConfig,
    tie_credit: bool,
    order: int,
    hermite_nodes: int,
) -> IntegralTerms:
    rule = _Quadrature(model, t, order)
    hermite_x, hermite_w = _hermite(hermite_nodes)

    outer_nodes, outer_weights, outer_midpoints = rule.nodes(rule.type_breakpoints())
    predicted = np.repeat(rule.types(outer_midpoints), order)
    outer_nodes, outer_weights = outer_nodes.ravel(), outer_weights.ravel()
    outer_scores = rule.scores(outer_nodes)

    comparable = correct = joint = 0.0
    for d in range(1, model.n_event_types + 1):
        # E_xj[mass] is smooth in xj
        expected_mass = _pair_mass(
            cfg, d, outer_nodes[:, None], hermite_x[None, :], t
        ) @ hermite_w
        hits = predicted == d
        comparable += float(outer_weights @ expected_mass)
        correct += float(outer_weights[hits] @ expected_mass[hits])

        for index in np.flatnonzero(hits):
            level = outer_scores[index, d - 1]
            nodes, weights, midpoints = rule.nodes(rule.score_breakpoints(d, level))
            midpoint_scores = rule.scores(midpoints)[:, d - 1]
            credit = (midpoint_scores < level).astype(float)
            if tie_credit:
                credit += 0.5 * (midpoint_scores == level)

            mass = _pair_mass(cfg, d, outer_nodes[index], nodes, t)
            inner = float(np.sum(credit[:, None] * weights * mass))
            joint += outer_weights[index] * inner

    return IntegralTerms(
        joint_concordance=joint / comparable,
        conditional_concordance=joint / correct if correct > 0 else float("nan"),
        accuracy_star=correct / comparable,
        comparable_probability=comparable,
    )


def jc_integral_terms(
    model: RiskModel,
    t: float,
    config: typing.Optional[SynthConfig] = None,
    tie_credit: bool = False,
    tol: float = 1e-4,
) -> IntegralTerms:
    """Population joint concordance and decomposition by nested quadrature.

    Pairs integrate the closed-form time integral of
    (1 - F_d(s | X_j)) dF_d(s | X_i) over independent normal covariates.
    The rule is refined by doubling its order until successive terms agree
    within ``tol``.
    """
    cfg = config or SynthConfig()
    order = 8
    previous = _integral_terms(model, t, cfg, tie_credit, order, _HERMITE_NODES)
    while order < _MAX_LEGENDRE_ORDER:
        order *= 2
        current = _integral_terms(
            model, t, cfg, tie_credit, order, 2 * _HERMITE_NODES
        )
        change = max(
            abs(current.joint_concordance - previous.joint_concordance),
            abs(current.accuracy_star - previous.accuracy_star),
        )
        _LOGGER.debug("Quadrature order %s: change=%s", order, change)
        if change < tol:
            return current
        previous = current

    raise QuadratureNonConvergence(
        f"Joint concordance integral did not converge at horizon {t}", horizon=t
    )


def true_jc_integral(
    model: RiskModel,
    t: float,
    config: typing.Optional[SynthConfig] = None,
    tie_credit: bool = False,
    tol: float = 1e-4,
) -> float:
    """Population joint concordance JC(t) by quadrature."""
    return jc_integral_terms(model, t, config, tie_credit, tol).joint_concordance


def true_accuracy_integral(
    model: RiskModel,
    t: float,
    config: typing.Optional[SynthConfig] = None,
    tol: float = 1e-4,
) -> float:
    """Population accuracy A(t) by quadrature.

    A(t) = E[sum_d I(M_c(X) = d) F_d(t | X)] / E[1 - exp(-r(X) t)].
    """
    cfg = config or SynthConfig()
    hermite_x, hermite_w = _hermite(_HERMITE_NODES)
    total = cfg.event_rates(hermite_x).sum(axis=1)
    event_probability = float(hermite_w @ -np.expm1(-total * t))

    previous = None
    order = 8
    while order <= _MAX_LEGENDRE_ORDER:
        rule = _Quadrature(model, t, order)
        nodes, weights, midpoints = rule.nodes(rule.type_breakpoints())
        predicted = rule.types(midpoints)
        cif = TrueCifModel(cfg).risk_matrix(nodes.reshape(-1, 1), t).reshape(
            nodes.shape + (-1,)
        )
        chosen = np.take_along_axis(
            cif, np.broadcast_to((predicted - 1)[:, None, None], nodes.shape + (1,)), 2
        )[..., 0]
        value = float(np.sum(weights * chosen)) / event_probability
        if previous is not None and abs(value - previous) < tol:
            return value
        previous = value
        order *= 2

    raise QuadratureNonConvergence(
        f"Accuracy integral did not converge at horizon {t}", horizon=t
    )
