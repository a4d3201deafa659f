"""Exact posteriors on tiny instances by enumeration and grid integration.

Ground truth for validating the message-passing approximation.  Answers
and correctness are summed exactly; abilities and difficulties are
integrated on trapezoid grids over prior mean +- 4 prior sd; learned
precisions on equal-mass quantile nodes of their Gamma prior.  Everything
is organized around the per-question factorization: given all abilities,
questions are conditionally independent, so no joint enumeration over
answer configurations is ever needed.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats as st

from .data import GoldSet, ModelVariant, Posteriors, PriorSpec, ResponseDataset, CellPosterior
from .graph import build_graph, CLAMP_PRECISION
from .prob import Discrete, GammaDist, Gaussian1D, std_normal_cdf

__all__ = ["OracleConfig", "OracleSizeError", "exact_posteriors", "exact_predictive_response"]

MAX_PARTICIPANTS = 3
MAX_QUESTIONS = 3
MAX_OPTIONS = 3


@dataclass(frozen=True)
class OracleConfig:
    grid_points: int = 21
    grid_range_sds: float = 4.0
    tau_grid_points: int = 15

    def __post_init__(self):
        if self.grid_points < 11:
            raise ValueError(f"grid_points must be >= 11, got {self.grid_points}")
        if self.tau_grid_points < 3:
            raise ValueError("tau_grid_points must be >= 3")
        if not self.grid_range_sds > 0:
            raise ValueError("grid_range_sds must be positive")


class OracleSizeError(ValueError):
    """Instance exceeds the brute-force caps."""


def _check_caps(data: ResponseDataset):
    n_p = len(data.participants)
    n_q = len(data.questions)
    n_k = max((q.num_options for q in data.questions), default=2)
    if n_p > MAX_PARTICIPANTS or n_q > MAX_QUESTIONS or n_k > MAX_OPTIONS:
        raise OracleSizeError(
            f"instance is {n_p} participants x {n_q} questions x {n_k} options; "
            f"caps are {MAX_PARTICIPANTS} x {MAX_QUESTIONS} x {MAX_OPTIONS}"
        )


def _gauss_grid(prec0: float, pm0: float, config: OracleConfig):
    """Trapezoid nodes and prior-weighted weights for one Gaussian variable.

    Clamped (point-mass) variables collapse to a single node.
    """
    mean = pm0 / prec0
    if prec0 >= CLAMP_PRECISION:
        return np.array([mean]), np.array([1.0])
    sd = 1.0 / np.sqrt(prec0)
    half = config.grid_range_sds * sd
    x = np.linspace(mean - half, mean + half, config.grid_points)
    w = st.norm.pdf(x, loc=mean, scale=sd)
    trap = np.full(x.size, x[1] - x[0])
    trap[0] *= 0.5
    trap[-1] *= 0.5
    return x, w * trap


class _Oracle:
    def __init__(
        self,
        data: ResponseDataset,
        gold: GoldSet,
        priors: PriorSpec,
        variant: ModelVariant,
        config: OracleConfig,
    ):
        _check_caps(data)
        self.graph = build_graph(data, gold, priors, variant)
        g = self.graph
        self.config = config
        self.n_p = g.num_participants
        self.n_q = g.num_questions

        self.a_nodes = []
        self.a_weights = []
        for p in range(self.n_p):
            x, w = _gauss_grid(g.ability_prec0[p], g.ability_pm0[p], config)
            self.a_nodes.append(x)
            self.a_weights.append(w)

        # flattened (difficulty, precision) node axis per question
        self.dt_d = []
        self.dt_tau = []
        self.dt_w = []
        for q in range(self.n_q):
            d, wd = _gauss_grid(g.difficulty_prec0[q], g.difficulty_pm0[q], config)
            if g.learned_tau:
                u = (np.arange(config.tau_grid_points) + 0.5) / config.tau_grid_points
                tau = st.gamma.ppf(
                    u, g.precision_shape0[q], scale=1.0 / g.precision_rate0[q]
                )
                wt = np.full(tau.size, 1.0 / tau.size)
            else:
                tau = np.array([g.tau_fixed[q]])
                wt = np.array([1.0])
            dd, tt = np.meshgrid(d, tau, indexing="ij")
            ww = np.outer(wd, wt)
            self.dt_d.append(dd.ravel())
            self.dt_tau.append(tt.ravel())
            self.dt_w.append(ww.ravel())

        # per question: responder list and per-responder gated factors
        # G[m, y, a] = Phi(sqrt(tau_m)(a - d_m)) * [y == r] + (1 - Phi)/K
        self.responders = [[] for _ in range(self.n_q)]
        self.factors = [dict() for _ in range(self.n_q)]
        self.phi = [dict() for _ in range(self.n_q)]
        for i in range(g.num_cell_factors):
            p = int(g.cell_p[i])
            q = int(g.cell_q[i])
            r = int(g.cell_r[i])
            self.responders[q].append((p, r))
        for q in range(self.n_q):
            k = int(g.num_options[q])
            for p, r in self.responders[q]:
                phi = self._phi_pq(p, q)
                G = np.empty((phi.shape[0], k, phi.shape[1]))
                for y in range(k):
                    if y == r:
                        G[:, y, :] = phi + (1.0 - phi) / k
                    else:
                        G[:, y, :] = (1.0 - phi) / k
                self.factors[q][p] = G
                self.phi[q][p] = phi

        # answer prior: uniform, or a point mass on the gold option
        self.y_prior = []
        for q in range(self.n_q):
            k = int(g.num_options[q])
            if g.gold_idx[q] >= 0:
                pri = np.zeros(k)
                pri[int(g.gold_idx[q])] = 1.0
            else:
                pri = np.full(k, 1.0 / k)
            self.y_prior.append(pri)

        self._build_tensors()

    def _phi_pq(self, p: int, q: int) -> np.ndarray:
        """Phi(sqrt(tau_m)(a - d_m)) over the (d, tau) axis x a-axis."""
        a = self.a_nodes[p][None, :]
        d = self.dt_d[q][:, None]
        tau = self.dt_tau[q][:, None]
        return std_normal_cdf(np.sqrt(tau) * (a - d))

    def _reduce(self, q: int, weight_vec: np.ndarray, override: Optional[dict] = None,
                extra: Optional[dict] = None) -> list:
        """Per answer value y: sum over the (d, tau) axis of weight_vec times
        the product of this question's per-responder factors, shaped for
        broadcasting over the full participant grid.

        ``override`` replaces a responder's factor; ``extra`` multiplies an
        additional per-participant factor (no y dependence) into the product.
        """
        k = int(self.graph.num_options[q])
        parts = dict(self.factors[q])
        if override:
            parts = {**parts, **override}
        if extra:
            for p, f in extra.items():
                if p in parts:
                    parts = {**parts, p: parts[p] * f[:, None, :]}
                else:
                    parts = {**parts, p: np.broadcast_to(
                        f[:, None, :], (f.shape[0], k, f.shape[1])
                    )}
        ps = sorted(parts)
        out = []
        for y in range(k):
            if not ps:
                out.append(np.full((1,) * self.n_p, weight_vec.sum()))
                continue
            letters = "ijl"[: len(ps)]
            spec = "m," + ",".join(f"m{c}" for c in letters) + "->" + letters
            arrs = [parts[p][:, y, :] for p in ps]
            red = np.einsum(spec, weight_vec, *arrs)
            out.append(
                red.reshape(
                    tuple(
                        self.a_nodes[p].size if p in ps else 1
                        for p in range(self.n_p)
                    )
                )
            )
        return out

    def _build_tensors(self):
        self.L = []         # per q: list over y of broadcast tensors
        self.Lsum = []      # per q: sum over y with prior
        for q in range(self.n_q):
            Ly = self._reduce(q, self.dt_w[q])
            self.L.append(Ly)
            s = sum(self.y_prior[q][y] * Ly[y] for y in range(len(Ly)))
            self.Lsum.append(s)
        self.W = np.ones([self.a_nodes[p].size for p in range(self.n_p)])
        for p in range(self.n_p):
            shape = [1] * self.n_p
            shape[p] = -1
            self.W = self.W * self.a_weights[p].reshape(shape)
        self.full = self.W.copy()
        for q in range(self.n_q):
            self.full = self.full * self.Lsum[q]
        self.Z = float(self.full.sum())
        if not self.Z > 0.0:
            raise ArithmeticError("zero total evidence: contradictory clamps")

    def _ratio(self, q: int) -> np.ndarray:
        """full / Lsum_q with 0/0 handled (both vanish together)."""
        ls = np.broadcast_to(self.Lsum[q], self.full.shape)
        out = np.zeros_like(self.full)
        nz = ls > 0
        out[nz] = self.full[nz] / ls[nz]
        return out

    def _a_values(self, p: int) -> np.ndarray:
        shape = [1] * self.n_p
        shape[p] = -1
        return self.a_nodes[p].reshape(shape)

    def answer_dist(self, q: int) -> np.ndarray:
        ratio = self._ratio(q)
        k = int(self.graph.num_options[q])
        mass = np.array(
            [self.y_prior[q][y] * float((ratio * self.L[q][y]).sum()) for y in range(k)]
        )
        return mass / mass.sum()

    def ability_moments(self, p: int):
        a = self._a_values(p)
        e1 = float((self.full * a).sum()) / self.Z
        e2 = float((self.full * a * a).sum()) / self.Z
        return e1, e2 - e1 * e1

    def _question_moment(self, q: int, values: np.ndarray):
        """E of a function of (d_q, tau_q) given by per-node values."""
        ratio = self._ratio(q)
        tensors = self._reduce(q, self.dt_w[q] * values)
        num = sum(
            self.y_prior[q][y] * float((ratio * tensors[y]).sum())
            for y in range(len(tensors))
        )
        return num / self.Z

    def difficulty_moments(self, q: int):
        e1 = self._question_moment(q, self.dt_d[q])
        e2 = self._question_moment(q, self.dt_d[q] ** 2)
        return e1, e2 - e1 * e1

    def precision_moments(self, q: int):
        e1 = self._question_moment(q, self.dt_tau[q])
        e2 = self._question_moment(q, self.dt_tau[q] ** 2)
        return e1, e2 - e1 * e1

    def ability_difficulty_cov(self, p: int, q: int) -> float:
        ratio = self._ratio(q)
        tensors = self._reduce(q, self.dt_w[q] * self.dt_d[q])
        a = self._a_values(p)
        e_ad = sum(
            self.y_prior[q][y] * float((ratio * tensors[y] * a).sum())
            for y in range(len(tensors))
        ) / self.Z
        ea, _ = self.ability_moments(p)
        ed, _ = self.difficulty_moments(q)
        return e_ad - ea * ed

    def cell_p_correct(self, p: int, q: int, r: int) -> float:
        """P(the participant knew the answer | data) for an observed cell."""
        k = int(self.graph.num_options[q])
        phi = self.phi[q][p]
        T = np.zeros((phi.shape[0], k, phi.shape[1]))
        for y in range(k):
            if y == r:
                T[:, y, :] = phi
        ratio = self._ratio(q)
        tensors = self._reduce(q, self.dt_w[q], override={p: T})
        num = sum(
            self.y_prior[q][y] * float((ratio * tensors[y]).sum())
            for y in range(k)
        )
        return num / self.Z

    def predictive(self, p: int, q: int) -> np.ndarray:
        """P(a fresh response from p to q equals each option | data)."""
        k = int(self.graph.num_options[q])
        phi = self._phi_pq(p, q)
        ratio = self._ratio(q)
        tensors = self._reduce(q, self.dt_w[q], extra={p: phi})
        e_phi_y = np.array(
            [
                self.y_prior[q][y] * float((ratio * tensors[y]).sum()) / self.Z
                for y in range(k)
            ]
        )
        e_phi = e_phi_y.sum()
        probs = e_phi_y + (1.0 - e_phi) / k
        return probs / probs.sum()

    def posteriors(self) -> Posteriors:
        g = self.graph
        answer = {}
        difficulty = {}
        precision = {}
        for q, qid in enumerate(g.question_ids):
            answer[qid] = Discrete(self.answer_dist(q))
            m, v = self.difficulty_moments(q)
            difficulty[qid] = Gaussian1D(m, max(v, 1e-12))
            if g.learned_tau:
                m, v = self.precision_moments(q)
                precision[qid] = GammaDist.from_mean_variance(m, max(v, 1e-12))
            else:
                precision[qid] = GammaDist.from_mean_variance(
                    float(g.tau_fixed[q]), 1e-12
                )
        ability = {}
        for p, pid in enumerate(g.participant_ids):
            m, v = self.ability_moments(p)
            ability[pid] = Gaussian1D(m, max(v, 1e-12))
        cell = {}
        for i in range(g.num_cell_factors):
            p = int(g.cell_p[i])
            q = int(g.cell_q[i])
            r = int(g.cell_r[i])
            ea, va = self.ability_moments(p)
            ed, vd = self.difficulty_moments(q)
            cov = self.ability_difficulty_cov(p, q)
            cell[(g.participant_ids[p], g.question_ids[q])] = CellPosterior(
                p_correct=self.cell_p_correct(p, q, r),
                response_dist=Discrete.point_mass(r, int(g.num_options[q])),
                t=Gaussian1D(ea - ed, max(va + vd - 2.0 * cov, 1e-12)),
            )
        return Posteriors(
            answer_dist=answer,
            ability=ability,
            difficulty=difficulty,
            precision=precision,
            cell=cell,
        )


def exact_posteriors(
    data: ResponseDataset,
    gold: GoldSet,
    priors: PriorSpec,
    variant: ModelVariant = ModelVariant.FULL,
    config: OracleConfig = OracleConfig(),
) -> Posteriors:
    """All six marginal families, exact up to grid resolution."""
    return _Oracle(data, gold, priors, variant, config).posteriors()


def exact_predictive_response(
    data: ResponseDataset,
    gold: GoldSet,
    priors: PriorSpec,
    participant_id: str,
    question_id: str,
    variant: ModelVariant = ModelVariant.FULL,
    config: OracleConfig = OracleConfig(),
) -> Discrete:
    """Exact posterior predictive over a (possibly unobserved) cell."""
    o = _Oracle(data, gold, priors, variant, config)
    p = o.graph.participant_ids.index(participant_id)
    q = o.graph.question_ids.index(question_id)
    return Discrete(o.predictive(p, q))
