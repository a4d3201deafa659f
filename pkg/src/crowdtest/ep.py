"""Approximate marginal inference by damped expectation propagation.

Sweeps run over observed cells in (question, participant) order with all
messages initialized flat, so the first readout reproduces prior-predictive
behavior and two runs on identical input are bitwise identical.
Non-convergence is reported, never raised.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as st

from . import _kernels
from .data import CellPosterior, Posteriors
from .graph import FactorGraphDescription
from .prob import (
    Discrete,
    GammaDist,
    Gaussian1D,
    NegligibleEvidenceError,
    POINT_MASS_VARIANCE,
    std_normal_cdf,
)

__all__ = [
    "EpConfig",
    "InferenceReport",
    "CellUpdate",
    "infer",
    "predictive_response",
    "cell_message_update",
]


@dataclass(frozen=True)
class EpConfig:
    max_sweeps: int = 100
    convergence_eps: float = 1e-4
    damping: float = 0.8
    tau_quadrature_nodes: int = 32

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if not self.convergence_eps > 0.0:
            raise ValueError(f"convergence_eps must be > 0, got {self.convergence_eps}")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must be in (0, 1], got {self.damping}")
        if self.tau_quadrature_nodes < 1:
            raise ValueError("tau_quadrature_nodes must be >= 1")


@dataclass
class InferenceReport:
    posteriors: Posteriors
    sweeps_used: int
    converged: bool
    max_residual: float
    skipped_updates: int = 0
    variance_floor_hits: int = 0

    @property
    def degenerate(self) -> bool:
        return self.skipped_updates > 0 or self.variance_floor_hits > 0


def _precision_clamp(tau: float) -> GammaDist:
    return GammaDist.from_mean_variance(tau, POINT_MASS_VARIANCE)


def infer(graph: FactorGraphDescription, config: EpConfig = EpConfig()) -> InferenceReport:
    """Run EP to convergence on one graph and read out all six families."""
    n_p = graph.num_participants
    n_q = graph.num_questions
    n_c = graph.num_cell_factors
    y_off = graph.y_offsets

    msg = [np.zeros(n_c) for _ in range(7)]
    ab_prec = np.empty(n_p)
    ab_pm = np.empty(n_p)
    di_prec = np.empty(n_q)
    di_pm = np.empty(n_q)
    g_shape = np.empty(n_q)
    g_rate = np.empty(n_q)
    y_logw = np.empty(int(graph.num_options.sum()))
    cell_pc = np.empty(n_c)

    sweeps, converged, resid, skipped, floors = _kernels.ep_infer(
        graph.cell_p, graph.cell_q, graph.cell_r,
        graph.num_options, y_off, graph.gold_idx,
        graph.ability_prec0, graph.ability_pm0,
        graph.difficulty_prec0, graph.difficulty_pm0,
        graph.precision_shape0, graph.precision_rate0,
        graph.learned_tau, graph.tau_fixed,
        config.tau_quadrature_nodes, config.max_sweeps,
        config.convergence_eps, config.damping,
        *msg,
        ab_prec, ab_pm, di_prec, di_pm, g_shape, g_rate, y_logw,
        cell_pc,
    )

    answer = {}
    difficulty = {}
    precision = {}
    for j, qid in enumerate(graph.question_ids):
        k = int(graph.num_options[j])
        if graph.gold_idx[j] >= 0:
            answer[qid] = Discrete.point_mass(int(graph.gold_idx[j]), k)
        else:
            logits = y_logw[y_off[j]: y_off[j] + k]
            w = np.exp(logits - logits.max())
            answer[qid] = Discrete(w / w.sum())
        difficulty[qid] = Gaussian1D.from_natural(di_prec[j], di_pm[j])
        if graph.learned_tau:
            precision[qid] = GammaDist(shape=g_shape[j], scale=1.0 / g_rate[j])
        else:
            precision[qid] = _precision_clamp(float(graph.tau_fixed[j]))

    ability = {
        pid: Gaussian1D.from_natural(ab_prec[i], ab_pm[i])
        for i, pid in enumerate(graph.participant_ids)
    }

    cell = {}
    for i in range(n_c):
        pid = graph.participant_ids[graph.cell_p[i]]
        qid = graph.question_ids[graph.cell_q[i]]
        a = ability[pid]
        d = difficulty[qid]
        cell[(pid, qid)] = CellPosterior(
            p_correct=float(cell_pc[i]),
            response_dist=Discrete.point_mass(
                int(graph.cell_r[i]), int(graph.num_options[graph.cell_q[i]])
            ),
            t=Gaussian1D(a.mean - d.mean, a.variance + d.variance),
        )

    return InferenceReport(
        posteriors=Posteriors(
            answer_dist=answer,
            ability=ability,
            difficulty=difficulty,
            precision=precision,
            cell=cell,
        ),
        sweeps_used=int(sweeps),
        converged=bool(converged),
        max_residual=float(resid),
        skipped_updates=int(skipped),
        variance_floor_hits=int(floors),
    )


def _tau_nodes(precision: GammaDist, n: int) -> np.ndarray:
    """Equal-mass quantile nodes of a Gamma distribution."""
    u = (np.arange(n) + 0.5) / n
    return np.maximum(st.gamma.ppf(u, precision.shape, scale=precision.scale), 1e-12)


def expected_prob_correct(
    t: Gaussian1D, precision, tau_nodes: int = 32
) -> float:
    """E[Phi(sqrt(tau) t)] under a Gaussian t and fixed or Gamma tau."""
    if isinstance(precision, GammaDist):
        taus = _tau_nodes(precision, tau_nodes)
    else:
        taus = np.array([float(precision)])
    z = t.mean / np.sqrt(t.variance + 1.0 / taus)
    return float(np.mean(std_normal_cdf(z)))


def predictive_response(
    graph: FactorGraphDescription,
    posteriors: Posteriors,
    participant_id: str,
    question_id: str,
    tau_nodes: int = 32,
) -> Discrete:
    """Posterior predictive over the response of (participant, question).

    P(r = k) = pi * p(y = k) + (1 - pi)/K with pi the marginal-expected
    correctness probability; defined whether or not the cell was observed.
    """
    ability = posteriors.ability[participant_id]
    difficulty = posteriors.difficulty[question_id]
    t = Gaussian1D(
        ability.mean - difficulty.mean, ability.variance + difficulty.variance
    )
    if graph.learned_tau:
        pi = expected_prob_correct(t, posteriors.precision[question_id], tau_nodes)
    else:
        j = graph.question_ids.index(question_id)
        pi = expected_prob_correct(t, float(graph.tau_fixed[j]), tau_nodes)
    k = graph.num_options[graph.question_ids.index(question_id)]
    p_y = posteriors.answer_dist[question_id].probs
    return Discrete(pi * p_y + (1.0 - pi) / k)


@dataclass(frozen=True)
class CellUpdate:
    """Moment-matched projections of one cell's tilted distribution."""

    t: Gaussian1D
    ability: Gaussian1D
    difficulty: Gaussian1D
    precision: object            # GammaDist in learned mode, else None
    answer_logit: float          # log-weight added to the observed option
    p_correct: float
    normalizer: float


def cell_message_update(
    ability_cavity: Gaussian1D,
    difficulty_cavity: Gaussian1D,
    precision_cavity,
    answer_prob_r: float,
    num_options: int,
    tau_nodes: int = 32,
) -> CellUpdate:
    """One cell's tilted moments given its cavity marginals.

    ``precision_cavity`` is a GammaDist (learned discrimination, integrated
    over quantile nodes) or a plain positive float (fixed discrimination).
    ``answer_prob_r`` is the cavity probability that the question's answer
    equals the observed response.  Raises NegligibleEvidenceError when the
    tilted normalizer falls below 1e-300.
    """
    if not 0.0 <= answer_prob_r <= 1.0:
        raise ValueError(f"answer_prob_r must be in [0, 1], got {answer_prob_r}")
    if num_options < 2:
        raise ValueError(f"num_options must be >= 2, got {num_options}")
    if isinstance(precision_cavity, GammaDist):
        taus = _tau_nodes(precision_cavity, tau_nodes)
        logws = np.full(taus.size, -math.log(taus.size))
    else:
        if not float(precision_cavity) > 0.0:
            raise ValueError(f"fixed precision must be positive, got {precision_cavity}")
        taus = np.array([float(precision_cavity)])
        logws = np.zeros(1)

    m_a, v_a = ability_cavity.mean, ability_cavity.variance
    m_d, v_d = difficulty_cavity.mean, difficulty_cavity.variance
    m_t = m_a - m_d
    v_t = v_a + v_d
    buf1 = np.empty(taus.size)
    buf2 = np.empty(taus.size)
    ok, m_til, v_til, e_tau, e_tau2, l_ephi, l_ephibar, pc, _c1, _c2 = (
        _kernels.cell_moments(
            m_t, v_t, float(answer_prob_r), int(num_options), taus, logws,
            taus.size, buf1, buf2,
        )
    )
    if not ok:
        raise NegligibleEvidenceError(
            f"cell normalizer below 1e-300 (pi_r={answer_prob_r}, t cavity "
            f"mean {m_t:.3g} var {v_t:.3g})"
        )
    ratio_a = v_a / v_t
    ratio_d = v_d / v_t
    shrink = v_t - v_til
    tilted_a = Gaussian1D(
        m_a + ratio_a * (m_til - m_t), max(v_a - ratio_a**2 * shrink, _kernels.VAR_FLOOR)
    )
    tilted_d = Gaussian1D(
        m_d - ratio_d * (m_til - m_t), max(v_d - ratio_d**2 * shrink, _kernels.VAR_FLOOR)
    )
    tilted_g = None
    if isinstance(precision_cavity, GammaDist):
        var_tau = max(e_tau2 - e_tau * e_tau, 1e-12 * e_tau * e_tau + 1e-300)
        tilted_g = GammaDist.from_mean_variance(e_tau, var_tau)
    ell = float(np.logaddexp(l_ephi + math.log(num_options), l_ephibar) - l_ephibar)
    # normalizer: pi_r E[Phi] + (1/K) E[1 - Phi]
    z = answer_prob_r * math.exp(l_ephi) + math.exp(l_ephibar) / num_options
    return CellUpdate(
        t=Gaussian1D(m_til, v_til),
        ability=tilted_a,
        difficulty=tilted_d,
        precision=tilted_g,
        answer_logit=ell,
        p_correct=float(pc),
        normalizer=float(z),
    )
