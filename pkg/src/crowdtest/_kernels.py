"""Hot message-passing kernels.

One cell factor couples ability a, difficulty d, precision tau, and answer
y through the observed response r.  Summing the correctness gate exactly
gives the per-cell likelihood

    g(t, tau) = pi_r * Phi(sqrt(tau) t) + (1/K) * (1 - Phi(sqrt(tau) t)),

with t = a - d and pi_r the cavity probability that the answer equals the
observed response.  One update computes the tilted moments of (t, tau, y)
under the cavity, projects them back onto Gaussian/Gamma/discrete messages
with damping, and commits only if every receiving marginal stays proper.

The learned-precision path integrates tau over fixed quantile nodes of the
question's current Gamma marginal, importance-reweighted to the cell's
cavity, so the expensive quantile solves happen once per question per
sweep rather than once per cell.
"""

import math

import numpy as np

from ._backend import jit
from ._scalarmath import (
    gamma_unit_ppf,
    log_std_normal_cdf,
    pdf_over_cdf,
)
from .prob import POINT_MASS_VARIANCE, VARIANCE_FLOOR as VAR_FLOOR

MIN_PRECISION = 1e-12
MIN_GAMMA_SHAPE = 1e-6
MIN_GAMMA_RATE = 1e-12
MIN_NORMALIZER = 1e-300
CLAMP_PRECISION = 1e10


@jit
def _logsumexp(arr, n):
    m = -math.inf
    for j in range(n):
        if arr[j] > m:
            m = arr[j]
    if m == -math.inf:
        return -math.inf
    s = 0.0
    for j in range(n):
        s += math.exp(arr[j] - m)
    return m + math.log(s)


@jit
def cell_moments(m_t, v_t, pi_r, n_options, taus, logws, n_nodes, lp, lpb):
    """Tilted moments of one cell under cavity N(m_t, v_t) x Gamma nodes.

    Returns (ok, mean_t, var_t, e_tau, e_tau2, log_e_phi, log_e_phibar,
    p_correct, cav_tau, cav_tau2).  ``ok`` is False when the normalizer
    falls below 1e-300 (negligible evidence).  ``log_e_phi``/``log_e_phibar``
    are the cavity expectations of Phi and 1-Phi, kept in log domain for
    the answer message.  ``cav_tau``/``cav_tau2`` are the cavity tau moments
    through the same nodes, so the caller can cancel quadrature bias when
    forming the precision message.  var_t is floored at VAR_FLOOR.
    """
    inv_k = 1.0 / n_options
    z_sum = 0.0
    s1 = 0.0
    s2 = 0.0
    st = 0.0
    st2 = 0.0
    c1 = 0.0
    c2 = 0.0
    for j in range(n_nodes):
        tau = taus[j]
        w = math.exp(logws[j])
        c1 += w * tau
        c2 += w * tau * tau
        s2_node = v_t + 1.0 / tau
        s = math.sqrt(s2_node)
        z = m_t / s
        lphi_t = log_std_normal_cdf(z)
        lphi_f = log_std_normal_cdf(-z)
        r_t = pdf_over_cdf(z)
        r_f = pdf_over_cdf(-z)
        mean_t = m_t + v_t * r_t / s
        var_t = v_t - v_t * v_t * r_t * (z + r_t) / s2_node
        mean_f = m_t - v_t * r_f / s
        var_f = v_t - v_t * v_t * r_f * (-z + r_f) / s2_node
        w_t = w * pi_r * math.exp(lphi_t)
        w_f = w * inv_k * math.exp(lphi_f)
        z_sum += w_t + w_f
        s1 += w_t * mean_t + w_f * mean_f
        s2 += w_t * (var_t + mean_t * mean_t) + w_f * (var_f + mean_f * mean_f)
        st += (w_t + w_f) * tau
        st2 += (w_t + w_f) * tau * tau
        lp[j] = logws[j] + lphi_t
        lpb[j] = logws[j] + lphi_f
    if z_sum < MIN_NORMALIZER:
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    mean = s1 / z_sum
    var = s2 / z_sum - mean * mean
    if var < VAR_FLOOR:
        var = VAR_FLOOR
    e_tau = st / z_sum
    e_tau2 = st2 / z_sum
    log_e_phi = _logsumexp(lp, n_nodes)
    log_e_phibar = _logsumexp(lpb, n_nodes)
    p_correct = pi_r * math.exp(log_e_phi) / z_sum
    return True, mean, var, e_tau, e_tau2, log_e_phi, log_e_phibar, p_correct, c1, c2


@jit
def _fill_nodes(nodes, lnodes, g_shape, g_rate, n_nodes):
    n_q = g_shape.size
    for q in range(n_q):
        sh = g_shape[q]
        inv_rate = 1.0 / g_rate[q]
        for j in range(n_nodes):
            t = gamma_unit_ppf(sh, (j + 0.5) / n_nodes) * inv_rate
            if t < 1e-12:
                t = 1e-12
            nodes[q, j] = t
            lnodes[q, j] = math.log(t)


@jit
def _rebuild_marginals(
    cell_p, cell_q, cell_r, k_opt, y_off, gold,
    ab_prec0, ab_pm0, di_prec0, di_pm0, g_shape0, g_rate0,
    msg_ap, msg_apm, msg_dp, msg_dpm, msg_ga, msg_gb, msg_y,
    ab_prec, ab_pm, di_prec, di_pm, g_shape, g_rate, y_logw,
):
    n_p = ab_prec0.size
    n_q = di_prec0.size
    n_c = cell_p.size
    for p in range(n_p):
        ab_prec[p] = ab_prec0[p]
        ab_pm[p] = ab_pm0[p]
    for q in range(n_q):
        di_prec[q] = di_prec0[q]
        di_pm[q] = di_pm0[q]
        g_shape[q] = g_shape0[q]
        g_rate[q] = g_rate0[q]
        lk = math.log(1.0 * k_opt[q])
        for k in range(k_opt[q]):
            y_logw[y_off[q] + k] = -lk
    for i in range(n_c):
        ab_prec[cell_p[i]] += msg_ap[i]
        ab_pm[cell_p[i]] += msg_apm[i]
        di_prec[cell_q[i]] += msg_dp[i]
        di_pm[cell_q[i]] += msg_dpm[i]
        g_shape[cell_q[i]] += msg_ga[i]
        g_rate[cell_q[i]] += msg_gb[i]
        if gold[cell_q[i]] < 0:
            y_logw[y_off[cell_q[i]] + cell_r[i]] += msg_y[i]
    for q in range(n_q):
        mx = -math.inf
        for k in range(k_opt[q]):
            if y_logw[y_off[q] + k] > mx:
                mx = y_logw[y_off[q] + k]
        for k in range(k_opt[q]):
            y_logw[y_off[q] + k] -= mx


@jit
def _cavity_pi_r(y_logw, y_off, k_opt, q, r, ell):
    """Cavity probability that the answer equals option r, removing the
    cell's own answer message ell."""
    base = y_off[q]
    mx = -math.inf
    for k in range(k_opt[q]):
        lw = y_logw[base + k]
        if k == r:
            lw -= ell
        if lw > mx:
            mx = lw
    total = 0.0
    val_r = 0.0
    for k in range(k_opt[q]):
        lw = y_logw[base + k]
        if k == r:
            lw -= ell
        e = math.exp(lw - mx)
        total += e
        if k == r:
            val_r = e
    return val_r / total


@jit
def ep_infer(
    cell_p, cell_q, cell_r,
    k_opt, y_off, gold,
    ab_prec0, ab_pm0, di_prec0, di_pm0, g_shape0, g_rate0,
    learned, tau_fixed,
    n_nodes, max_sweeps, eps, damping,
    msg_ap, msg_apm, msg_dp, msg_dpm, msg_ga, msg_gb, msg_y,
    ab_prec, ab_pm, di_prec, di_pm, g_shape, g_rate, y_logw,
    cell_pc,
):
    """Full damped EP loop over all cells in (question, participant) order.

    Returns (sweeps_used, converged, max_residual, skipped_updates,
    floor_hits); fills marginals, messages, and per-cell correctness
    posteriors in place.
    """
    n_q = k_opt.size
    n_c = cell_p.size

    _rebuild_marginals(
        cell_p, cell_q, cell_r, k_opt, y_off, gold,
        ab_prec0, ab_pm0, di_prec0, di_pm0, g_shape0, g_rate0,
        msg_ap, msg_apm, msg_dp, msg_dpm, msg_ga, msg_gb, msg_y,
        ab_prec, ab_pm, di_prec, di_pm, g_shape, g_rate, y_logw,
    )
    if n_c == 0:
        return 0, 1, 0.0, 0, 0

    nodes = np.empty((n_q, n_nodes))
    lnodes = np.empty((n_q, n_nodes))
    taus1 = np.empty(1)
    logw1 = np.zeros(1)
    lwbuf = np.empty(n_nodes)
    lp = np.empty(n_nodes)
    lpb = np.empty(n_nodes)

    converged = 0
    sweeps_used = 0
    resid = 0.0
    skipped = 0
    floor_hits = 0

    for sweep in range(max_sweeps):
        resid = 0.0
        skipped = 0
        if learned:
            _fill_nodes(nodes, lnodes, g_shape, g_rate, n_nodes)
        for i in range(n_c):
            p = cell_p[i]
            q = cell_q[i]
            r = cell_r[i]
            kq = k_opt[q]

            cav_ap = ab_prec[p] - msg_ap[i]
            cav_apm = ab_pm[p] - msg_apm[i]
            cav_dp = di_prec[q] - msg_dp[i]
            cav_dpm = di_pm[q] - msg_dpm[i]
            if cav_ap <= MIN_PRECISION or cav_dp <= MIN_PRECISION:
                skipped += 1
                continue
            v_a = 1.0 / cav_ap
            m_a = cav_apm * v_a
            v_d = 1.0 / cav_dp
            m_d = cav_dpm * v_d
            m_t = m_a - m_d
            v_t = v_a + v_d

            c_sh = 0.0
            c_ra = 0.0
            if learned:
                c_sh = g_shape[q] - msg_ga[i]
                c_ra = g_rate[q] - msg_gb[i]
                if c_sh <= MIN_GAMMA_SHAPE or c_ra <= MIN_GAMMA_RATE:
                    skipped += 1
                    continue
                for j in range(n_nodes):
                    lwbuf[j] = -msg_ga[i] * lnodes[q, j] + msg_gb[i] * nodes[q, j]
                norm = _logsumexp(lwbuf, n_nodes)
                for j in range(n_nodes):
                    lwbuf[j] -= norm
                tau_arr = nodes[q]
                lw_arr = lwbuf
                nn = n_nodes
            else:
                taus1[0] = tau_fixed[q]
                tau_arr = taus1
                lw_arr = logw1
                nn = 1

            if gold[q] >= 0:
                pi_r = 1.0 if gold[q] == r else 0.0
            else:
                pi_r = _cavity_pi_r(y_logw, y_off, k_opt, q, r, msg_y[i])

            ok, m_til, v_til, e_tau, e_tau2, l_ephi, l_ephibar, _pc, c_tau, c_tau2 = (
                cell_moments(m_t, v_t, pi_r, kq, tau_arr, lw_arr, nn, lp, lpb)
            )
            if not ok:
                skipped += 1
                continue

            ratio_a = v_a / v_t
            ratio_d = v_d / v_t
            shrink = v_t - v_til
            m_ta = m_a + ratio_a * (m_til - m_t)
            v_ta = v_a - ratio_a * ratio_a * shrink
            m_td = m_d - ratio_d * (m_til - m_t)
            v_td = v_d - ratio_d * ratio_d * shrink
            if v_ta < VAR_FLOOR:
                v_ta = VAR_FLOOR
                floor_hits += 1
            if v_td < VAR_FLOOR:
                v_td = VAR_FLOOR
                floor_hits += 1

            commit = True
            d_ap = msg_ap[i]
            d_apm = msg_apm[i]
            if ab_prec0[p] < CLAMP_PRECISION:
                new_ap = 1.0 / v_ta - cav_ap
                new_apm = m_ta / v_ta - cav_apm
                d_ap = msg_ap[i] + damping * (new_ap - msg_ap[i])
                d_apm = msg_apm[i] + damping * (new_apm - msg_apm[i])
                if cav_ap + d_ap <= MIN_PRECISION:
                    commit = False

            d_dp = msg_dp[i]
            d_dpm = msg_dpm[i]
            if di_prec0[q] < CLAMP_PRECISION:
                new_dp = 1.0 / v_td - cav_dp
                new_dpm = m_td / v_td - cav_dpm
                d_dp = msg_dp[i] + damping * (new_dp - msg_dp[i])
                d_dpm = msg_dpm[i] + damping * (new_dpm - msg_dpm[i])
                if cav_dp + d_dp <= MIN_PRECISION:
                    commit = False

            d_ga = msg_ga[i]
            d_gb = msg_gb[i]
            if learned:
                var_tau = e_tau2 - e_tau * e_tau
                floor_tau = 1e-12 * e_tau * e_tau + 1e-300
                if var_tau < floor_tau:
                    var_tau = floor_tau
                til_sh = e_tau * e_tau / var_tau
                til_ra = e_tau / var_tau
                # subtract the cavity projected through the same nodes, not the
                # analytic cavity: a flat likelihood must yield a null message
                var_c = c_tau2 - c_tau * c_tau
                floor_c = 1e-12 * c_tau * c_tau + 1e-300
                if var_c < floor_c:
                    var_c = floor_c
                qc_sh = c_tau * c_tau / var_c
                qc_ra = c_tau / var_c
                d_ga = msg_ga[i] + damping * ((til_sh - qc_sh) - msg_ga[i])
                d_gb = msg_gb[i] + damping * ((til_ra - qc_ra) - msg_gb[i])
                if c_sh + d_ga <= MIN_GAMMA_SHAPE or c_ra + d_gb <= MIN_GAMMA_RATE:
                    commit = False

            d_y = msg_y[i]
            if gold[q] < 0:
                a1 = l_ephi + math.log(1.0 * kq)
                if a1 > l_ephibar:
                    l_num = a1 + math.log1p(math.exp(l_ephibar - a1))
                else:
                    l_num = l_ephibar + math.log1p(math.exp(a1 - l_ephibar))
                ell_new = l_num - l_ephibar
                d_y = msg_y[i] + damping * (ell_new - msg_y[i])

            if not commit:
                skipped += 1
                continue

            ch = abs(d_ap - msg_ap[i])
            if abs(d_apm - msg_apm[i]) > ch:
                ch = abs(d_apm - msg_apm[i])
            if abs(d_dp - msg_dp[i]) > ch:
                ch = abs(d_dp - msg_dp[i])
            if abs(d_dpm - msg_dpm[i]) > ch:
                ch = abs(d_dpm - msg_dpm[i])
            if abs(d_ga - msg_ga[i]) > ch:
                ch = abs(d_ga - msg_ga[i])
            if abs(d_gb - msg_gb[i]) > ch:
                ch = abs(d_gb - msg_gb[i])
            if abs(d_y - msg_y[i]) > ch:
                ch = abs(d_y - msg_y[i])
            if ch > resid:
                resid = ch

            ab_prec[p] += d_ap - msg_ap[i]
            ab_pm[p] += d_apm - msg_apm[i]
            di_prec[q] += d_dp - msg_dp[i]
            di_pm[q] += d_dpm - msg_dpm[i]
            g_shape[q] += d_ga - msg_ga[i]
            g_rate[q] += d_gb - msg_gb[i]
            if gold[q] < 0:
                y_logw[y_off[q] + r] += d_y - msg_y[i]
            msg_ap[i] = d_ap
            msg_apm[i] = d_apm
            msg_dp[i] = d_dp
            msg_dpm[i] = d_dpm
            msg_ga[i] = d_ga
            msg_gb[i] = d_gb
            msg_y[i] = d_y

        _rebuild_marginals(
            cell_p, cell_q, cell_r, k_opt, y_off, gold,
            ab_prec0, ab_pm0, di_prec0, di_pm0, g_shape0, g_rate0,
            msg_ap, msg_apm, msg_dp, msg_dpm, msg_ga, msg_gb, msg_y,
            ab_prec, ab_pm, di_prec, di_pm, g_shape, g_rate, y_logw,
        )
        sweeps_used = sweep + 1
        if resid <= eps:
            converged = 1
            break

    # final readout: posterior correctness probability per observed cell
    if learned:
        _fill_nodes(nodes, lnodes, g_shape, g_rate, n_nodes)
    for i in range(n_c):
        p = cell_p[i]
        q = cell_q[i]
        r = cell_r[i]
        cav_ap = ab_prec[p] - msg_ap[i]
        cav_apm = ab_pm[p] - msg_apm[i]
        cav_dp = di_prec[q] - msg_dp[i]
        cav_dpm = di_pm[q] - msg_dpm[i]
        if cav_ap <= MIN_PRECISION or cav_dp <= MIN_PRECISION:
            cell_pc[i] = math.nan
            continue
        v_a = 1.0 / cav_ap
        m_a = cav_apm * v_a
        v_d = 1.0 / cav_dp
        m_d = cav_dpm * v_d
        if learned:
            c_sh = g_shape[q] - msg_ga[i]
            c_ra = g_rate[q] - msg_gb[i]
            if c_sh <= MIN_GAMMA_SHAPE or c_ra <= MIN_GAMMA_RATE:
                cell_pc[i] = math.nan
                continue
            for j in range(n_nodes):
                lwbuf[j] = -msg_ga[i] * lnodes[q, j] + msg_gb[i] * nodes[q, j]
            norm = _logsumexp(lwbuf, n_nodes)
            for j in range(n_nodes):
                lwbuf[j] -= norm
            tau_arr = nodes[q]
            lw_arr = lwbuf
            nn = n_nodes
        else:
            taus1[0] = tau_fixed[q]
            tau_arr = taus1
            lw_arr = logw1
            nn = 1
        if gold[q] >= 0:
            pi_r = 1.0 if gold[q] == r else 0.0
        else:
            pi_r = _cavity_pi_r(y_logw, y_off, k_opt, q, r, msg_y[i])
        ok, _m, _v, _et, _et2, _lp, _lpb, pc, _c1, _c2 = cell_moments(
            m_a - m_d, v_a + v_d, pi_r, k_opt[q], tau_arr, lw_arr, nn, lp, lpb
        )
        cell_pc[i] = pc if ok else 0.0

    return sweeps_used, converged, resid, skipped, floor_hits


@jit
def ability_ep(
    d_hat, tau_hat, k_opt, matches,
    prior_prec, prior_pm,
    max_sweeps, eps, damping,
):
    """Session-path EP: single ability variable against clamped questions.

    ``matches[i]`` is 1 when the recorded response equals the gold answer.
    Exactly mirrors the full engine on a graph whose difficulties,
    precisions, and answers are all clamped.  Cells must arrive sorted by
    question index.  Returns (precision, precision_mean, converged,
    sweeps_used, residual).
    """
    n = d_hat.size
    msg_p = np.zeros(n)
    msg_pm = np.zeros(n)
    prec = prior_prec
    pm = prior_pm
    taus1 = np.empty(1)
    logw1 = np.zeros(1)
    lp = np.empty(1)
    lpb = np.empty(1)
    converged = 0
    sweeps_used = 0
    resid = 0.0
    if n == 0:
        return prec, pm, 1, 0, 0.0
    for sweep in range(max_sweeps):
        resid = 0.0
        for i in range(n):
            cav_p = prec - msg_p[i]
            cav_pm = pm - msg_pm[i]
            if cav_p <= MIN_PRECISION:
                continue
            v_a = 1.0 / cav_p
            m_a = cav_pm * v_a
            m_t = m_a - d_hat[i]
            v_t = v_a + POINT_MASS_VARIANCE
            taus1[0] = tau_hat[i]
            pi_r = 1.0 if matches[i] == 1 else 0.0
            ok, m_til, v_til, _et, _et2, _lp, _lpb, _pc, _c1, _c2 = cell_moments(
                m_t, v_t, pi_r, k_opt[i], taus1, logw1, 1, lp, lpb
            )
            if not ok:
                continue
            ratio_a = v_a / v_t
            m_ta = m_a + ratio_a * (m_til - m_t)
            v_ta = v_a - ratio_a * ratio_a * (v_t - v_til)
            if v_ta < VAR_FLOOR:
                v_ta = VAR_FLOOR
            new_p = 1.0 / v_ta - cav_p
            new_pm = m_ta / v_ta - cav_pm
            d_p = msg_p[i] + damping * (new_p - msg_p[i])
            d_pm = msg_pm[i] + damping * (new_pm - msg_pm[i])
            if cav_p + d_p <= MIN_PRECISION:
                continue
            ch = abs(d_p - msg_p[i])
            if abs(d_pm - msg_pm[i]) > ch:
                ch = abs(d_pm - msg_pm[i])
            if ch > resid:
                resid = ch
            prec += d_p - msg_p[i]
            pm += d_pm - msg_pm[i]
            msg_p[i] = d_p
            msg_pm[i] = d_pm
        # drift control
        prec = prior_prec
        pm = prior_pm
        for i in range(n):
            prec += msg_p[i]
            pm += msg_pm[i]
        sweeps_used = sweep + 1
        if resid <= eps:
            converged = 1
            break
    return prec, pm, converged, sweeps_used, resid


@jit
def score_branches(
    asked_d, asked_tau, asked_k, asked_match,
    cand_d, cand_tau, cand_k, cand_pos,
    prior_prec, prior_pm,
    max_sweeps, eps, damping,
):
    """Ability variance after each response branch of each candidate.

    A branch's evidence depends on the response only through whether it
    matches gold, so exactly two full re-inferences per candidate cover
    every response.  ``cand_pos`` is where the candidate slots into the
    asked arrays to preserve question-index order.  Returns
    (var_if_match, var_if_miss, both_branches_converged).
    """
    s = asked_d.size
    nc = cand_d.size
    v_match = np.empty(nc)
    v_miss = np.empty(nc)
    conv = np.empty(nc, dtype=np.int64)
    ext_d = np.empty(s + 1)
    ext_tau = np.empty(s + 1)
    ext_k = np.empty(s + 1, dtype=np.int64)
    ext_m = np.empty(s + 1, dtype=np.int64)
    for c in range(nc):
        pos = cand_pos[c]
        for i in range(pos):
            ext_d[i] = asked_d[i]
            ext_tau[i] = asked_tau[i]
            ext_k[i] = asked_k[i]
            ext_m[i] = asked_match[i]
        ext_d[pos] = cand_d[c]
        ext_tau[pos] = cand_tau[c]
        ext_k[pos] = cand_k[c]
        for i in range(pos, s):
            ext_d[i + 1] = asked_d[i]
            ext_tau[i + 1] = asked_tau[i]
            ext_k[i + 1] = asked_k[i]
            ext_m[i + 1] = asked_match[i]
        ext_m[pos] = 1
        prec, _pm, cv1, _sw, _re = ability_ep(
            ext_d, ext_tau, ext_k, ext_m, prior_prec, prior_pm,
            max_sweeps, eps, damping,
        )
        v_match[c] = 1.0 / prec
        ext_m[pos] = 0
        prec, _pm, cv2, _sw, _re = ability_ep(
            ext_d, ext_tau, ext_k, ext_m, prior_prec, prior_pm,
            max_sweeps, eps, damping,
        )
        v_miss[c] = 1.0 / prec
        conv[c] = 1 if (cv1 == 1 and cv2 == 1) else 0
    return v_match, v_miss, conv
