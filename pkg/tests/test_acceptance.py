"""Acceptance suite.

One test per criterion, each printing a pass/fail line (run with -s to see
them inline).  Tolerances are pinned here, not configurable.  Criterion 1
is expected to fail on frustrated instances: per-cell expectation
propagation cannot reach the 0.1 ability-mean tolerance on bimodal
posteriors (the test docstring carries the verification details); the
test still enforces the stated tolerance.
"""

import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats as sps

import crowdtest as ct
from crowdtest import adaptive, harness

pytestmark = pytest.mark.slow
from crowdtest.baselines import majority_vote, inferred_answers, infer_variant
from crowdtest.data import Discrimination, GoldSet, ModelVariant, QuestionSpec, ResponseDataset
from crowdtest.ep import infer
from crowdtest.graph import build_graph
from crowdtest.oracle import exact_posteriors
from crowdtest.prob import Gaussian1D, GammaDist, std_normal_cdf
from crowdtest.synth import SynthConfig, sample

POPULATION_SEED = 0


def _report(criterion: int, ok: bool, detail: str):
    print(f"\n[criterion {criterion:>2}] {'PASS' if ok else 'FAIL'}  {detail}")


def fixed_priors(tau=1.0):
    return ct.default_priors(Discrimination.fixed(tau))


@pytest.fixture(scope="module")
def population():
    """The 120 x 60 x 8 stand-in population shared by criteria 7-10."""
    config = harness.default_population(fixed_priors(), seed=POPULATION_SEED)
    return sample(config)


def _oracle_gaps(data, gold, priors):
    exact = exact_posteriors(data, gold, priors)
    approx = infer(build_graph(data, gold, priors)).posteriors
    worst_tv = max(
        approx.answer_dist[q].tv_distance(exact.answer_dist[q])
        for q in data.question_ids
    )
    worst_mean = worst_sd = 0.0
    for coll, ecoll in (
        (approx.ability, exact.ability),
        (approx.difficulty, exact.difficulty),
    ):
        for key in coll:
            worst_mean = max(worst_mean, abs(coll[key].mean - ecoll[key].mean))
            worst_sd = max(
                worst_sd, abs(coll[key].sd - ecoll[key].sd) / ecoll[key].sd
            )
    return worst_tv, worst_mean, worst_sd


class TestCriterion1OracleEquivalenceFixed:
    def test_fixed_mode_oracle_equivalence(self):
        """20 seeded 3x3x2 Fixed(1) instances vs the exact oracle.

        KNOWN LIMITATION, left red on purpose: on "2-vs-1 frustrated"
        instances the exact posterior is bimodal and the unique fixed point
        of per-cell EP misses the ability mean by up to ~0.12 vs the
        stated 0.1 tolerance (oracle verified by grid refinement and by an
        independent Monte Carlo integrator; fixed point verified unique
        across damping and schedules).  TV and sd tolerances hold on all
        20 instances; the mean tolerance holds on 17.
        """
        t0 = time.time()
        failures = []
        for seed in range(20):
            data, _gold, _truth = sample(SynthConfig(3, 3, 2, fixed_priors(), seed=seed))
            tv, mean_gap, sd_rel = _oracle_gaps(data, GoldSet(), fixed_priors())
            if tv > 0.05 or mean_gap > 0.1 or sd_rel > 0.2:
                failures.append(
                    f"seed {seed}: TV {tv:.4f} mean {mean_gap:.4f} sd {sd_rel:.4f}"
                )
        elapsed = time.time() - t0
        ok = not failures and elapsed < 300
        _report(
            1,
            ok,
            f"oracle equivalence Fixed(1), 20 instances, {elapsed:.0f}s"
            + (f"; {len(failures)} instances out of tolerance" if failures else ""),
        )
        assert elapsed < 300, f"runtime {elapsed:.0f}s exceeds 5 minutes"
        assert not failures, "; ".join(failures)


class TestCriterion2OracleEquivalenceLearned:
    def test_learned_mode_oracle_equivalence(self):
        t0 = time.time()
        priors = ct.PriorSpec(
            ability_prior=Gaussian1D(0.0, 1.0),
            difficulty_prior=Gaussian1D(0.0, 1.0),
            precision_prior=GammaDist(2.0, 0.5),
            discrimination=Discrimination.learned(),
        )
        failures = []
        for seed in range(10):
            data, _gold, _truth = sample(SynthConfig(2, 2, 2, priors, seed=seed))
            tv, mean_gap, sd_rel = _oracle_gaps(data, GoldSet(), priors)
            if tv > 0.05 or mean_gap > 0.1 or sd_rel > 0.2:
                failures.append(
                    f"seed {seed}: TV {tv:.4f} mean {mean_gap:.4f} sd {sd_rel:.4f}"
                )
        elapsed = time.time() - t0
        ok = not failures and elapsed < 600
        _report(2, ok, f"oracle equivalence learned-tau, 10 instances, {elapsed:.0f}s")
        assert elapsed < 600, f"runtime {elapsed:.0f}s exceeds 10 minutes"
        assert not failures, "; ".join(failures)


class TestCriterion3ColdStartSymmetry:
    def test_single_response_three_quarters_both_modes(self):
        data = ResponseDataset(
            questions=[QuestionSpec("q0", 2)],
            records=[ct.ResponseRecord("p0", "q0", 1)],
        )
        results = {}
        for label, priors in (
            ("fixed", fixed_priors()),
            ("learned", ct.default_priors(Discrimination.learned())),
        ):
            rep = infer(build_graph(data, GoldSet(), priors))
            results[label] = rep.posteriors.answer_dist["q0"][1]
        ok = all(abs(v - 0.75) <= 0.01 for v in results.values())
        _report(
            3, ok,
            "cold-start p(y=r): "
            + ", ".join(f"{k} {v:.4f}" for k, v in results.items()),
        )
        for label, value in results.items():
            assert value == pytest.approx(0.75, abs=0.01), label


class TestCriterion4ProbitKernel:
    def test_prob_correct_against_erf_oracle(self):
        rng = np.random.default_rng(99)
        ts = rng.uniform(-6, 6, size=1000)
        taus = rng.uniform(0.01, 60.0, size=1000)
        worst = 0.0
        for t, tau in zip(ts, taus):
            oracle = 0.5 * (1.0 + math.erf(math.sqrt(tau) * t / math.sqrt(2.0)))
            worst = max(worst, abs(float(ct.prob_correct(t, tau)) - oracle))
        ok_link = worst <= 1e-10

        from scipy import integrate

        worst_moment = 0.0
        rng = np.random.default_rng(7)
        for _ in range(25):
            prior = Gaussian1D(rng.uniform(-2, 2), rng.uniform(0.05, 3.0))
            tau = rng.uniform(0.1, 10.0)
            c = bool(rng.random() < 0.5)

            def f(t):
                p = 0.5 * (1.0 + math.erf(math.sqrt(tau) * t / math.sqrt(2.0)))
                lik = p if c else 1.0 - p
                return math.exp(-0.5 * (t - prior.mean) ** 2 / prior.variance) * lik

            lo, hi = prior.mean - 12 * prior.sd, prior.mean + 12 * prior.sd
            z, _ = integrate.quad(f, lo, hi, limit=400)
            m1, _ = integrate.quad(lambda t: t * f(t), lo, hi, limit=400)
            m2, _ = integrate.quad(lambda t: t * t * f(t), lo, hi, limit=400)
            mean, var = m1 / z, m2 / z - (m1 / z) ** 2
            out = ct.probit_factor_moments(prior, tau, c)
            worst_moment = max(
                worst_moment, abs(out.mean - mean), abs(out.variance - var)
            )
        ok = ok_link and worst_moment <= 1e-8
        _report(
            4, ok,
            f"probit link worst {worst:.2e} (tol 1e-10); "
            f"moment matching worst {worst_moment:.2e} (tol 1e-8)",
        )
        assert ok_link
        assert worst_moment <= 1e-8


class TestCriterion5EntropyFormulas:
    def test_entropy_identities_and_breakdown(self):
        zero_ok = adaptive.entropy_reduction(0.42, 0.42) == 0.0
        adds = []
        rng = np.random.default_rng(5)
        for _ in range(100):
            a, b, c = rng.uniform(0.01, 5.0, size=3)
            adds.append(
                abs(
                    adaptive.entropy_reduction(a, b)
                    + adaptive.entropy_reduction(b, c)
                    - adaptive.entropy_reduction(a, c)
                )
            )
        additivity_ok = max(adds) <= 1e-12

        data = ResponseDataset(
            questions=[QuestionSpec(f"q{j}", 4) for j in range(5)],
            participants=["live"],
        )
        gold = GoldSet({f"q{j}": j % 4 for j in range(5)})
        cal = adaptive.CalibrationTable(
            difficulty_mean={f"q{j}": 0.3 * j - 0.5 for j in range(5)},
            precision_mean={f"q{j}": 0.8 + 0.2 * j for j in range(5)},
        )
        sess = adaptive.new_session("live", data, gold, fixed_priors(), cal, 3)
        sess = adaptive.submit_response(sess, "q4", 0)
        worst_breakdown = 0.0
        for qid in sess.unasked_ids:
            score = adaptive.score_question(sess, qid)
            recomputed = score.recompute_from_breakdown(sess.ability_posterior.variance)
            worst_breakdown = max(
                worst_breakdown, abs(score.expected_entropy_reduction - recomputed)
            )
        breakdown_ok = worst_breakdown <= 1e-9
        ok = zero_ok and additivity_ok and breakdown_ok
        _report(
            5, ok,
            f"entropy identities worst {max(adds):.2e} (tol 1e-12); "
            f"breakdown worst {worst_breakdown:.2e} (tol 1e-9)",
        )
        assert zero_ok and additivity_ok and breakdown_ok


class TestCriterion6GenerativeCalibration:
    def test_frequency_matches_quadrature(self):
        """1e5 independent cells (1x1 draws keep cells iid, so the binomial
        bound applies) vs the 1-D quadrature over a - d ~ N(0, 2)."""
        n = 100_000
        k = 8
        hits = 0
        for seed in range(n):
            data, gold, _ = sample(SynthConfig(1, 1, k, fixed_priors(), seed=seed))
            rec = data.records[0]
            if gold.get(rec.question_id) == rec.response:
                hits += 1
        gap_sd = math.sqrt(2.0)
        grid = np.linspace(-8 * gap_sd, 8 * gap_sd, 40001)
        pdf = sps.norm.pdf(grid, scale=gap_sd)
        p_know = float(np.trapezoid(std_normal_cdf(grid) * pdf, grid))
        expected = p_know + (1.0 - p_know) / k
        rate = hits / n
        sigma = math.sqrt(expected * (1.0 - expected) / n)
        gap = abs(rate - expected)
        ok = gap < min(0.01, 3 * sigma)
        _report(
            6, ok,
            f"empirical rate {rate:.5f} vs quadrature {expected:.5f} "
            f"(gap {gap:.5f}, 3-sigma {3 * sigma:.5f})",
        )
        assert gap < 0.01
        assert gap < 3 * sigma


def _paired(rows, size, agg_a, agg_b):
    a = {rep: n for s, rep, agg, n in rows if s == size and agg == agg_a}
    b = {rep: n for s, rep, agg, n in rows if s == size and agg == agg_b}
    diffs = np.array([a[r] - b[r] for r in sorted(a)])
    return float(diffs.mean()), float(diffs.std(ddof=0) / math.sqrt(diffs.size))


class TestCriterion7CrowdCurveShape:
    def test_fig4_shape(self, population):
        data, gold, _ = population
        t0 = time.time()
        spec = harness.ExperimentSpec(
            "crowd-curve", data, gold, fixed_priors(),
            repetitions=200,
            crowd_sizes=(1, 2, 4, 8, 16, 32, 64, 100),
            seed=POPULATION_SEED,
        )
        report = harness.run_crowd_curve(spec)
        elapsed = time.time() - t0

        by_agg = {}
        for size, agg, mean, sd, reps in report.summary:
            by_agg.setdefault(agg, []).append((size, mean, sd / math.sqrt(reps)))
        problems = []
        for agg, seq in by_agg.items():
            seq.sort()
            for (s1, m1, se1), (s2, m2, se2) in zip(seq, seq[1:]):
                band = 2.0 * math.sqrt(se1**2 + se2**2)
                if m2 < m1 - band:
                    problems.append(f"{agg}: mean drops {m1:.2f}->{m2:.2f} at size {s2}")

        top = max(s for s, _, _ in by_agg["full"])
        d_fp, se_fp = _paired(report.rows, top, "full", "participant-only")
        d_pq, se_pq = _paired(report.rows, top, "participant-only", "question-only")
        d_qm, se_qm = _paired(report.rows, top, "question-only", "majority")
        if d_fp < -2 * se_fp:
            problems.append(f"full < participant-only at top size ({d_fp:.3f} +- {se_fp:.3f})")
        if d_pq < -2 * se_pq:
            problems.append(f"participant-only < question-only at top size ({d_pq:.3f})")
        if abs(d_qm) > 2 * se_qm + 1.0:
            # the +-1 allows occasional exact-tie flips between the EP
            # argmax and the deterministic majority tie-break
            problems.append(f"question-only not ~= majority at top size ({d_qm:.3f})")

        ok = not problems and elapsed < 1800
        _report(
            7, ok,
            f"crowd curve 200 reps x 8 sizes in {elapsed:.0f}s; top-size paired "
            f"diffs: full-part {d_fp:+.3f}+-{se_fp:.3f}, part-qonly {d_pq:+.3f}, "
            f"qonly-majority {d_qm:+.3f}",
        )
        assert elapsed < 1800, f"runtime {elapsed:.0f}s exceeds 30 minutes"
        assert not problems, "; ".join(problems)


class TestCriterion8GoldCurveShape:
    def test_fig5_shape(self, population):
        data, gold, _ = population
        spec = harness.ExperimentSpec(
            "gold-curve", data, gold, fixed_priors(),
            repetitions=200,
            reveal_counts=(0, 5, 10, 20, 40),
            gold_crowd_size=20,
            seed=POPULATION_SEED,
        )
        report = harness.run_gold_curve(spec)
        seq = [
            (reveal, mean, sd / math.sqrt(reps))
            for reveal, mean, sd, reps in report.summary
        ]
        problems = []
        for (r1, m1, se1), (r2, m2, se2) in zip(seq, seq[1:]):
            band = 2.0 * math.sqrt(se1**2 + se2**2)
            if m2 < m1 - band:
                problems.append(
                    f"accuracy drops {m1:.4f} -> {m2:.4f} at reveal {r2}"
                )
        ok = not problems
        curve = ", ".join(f"{r}:{m:.3f}" for r, m, _ in seq)
        _report(8, ok, f"gold curve ({curve})")
        assert not problems, "; ".join(problems)


class TestCriterion9SkillScatter:
    def test_fig3_analogue(self, population):
        data, gold, _ = population
        report = harness.run_scatter_skill(
            harness.ExperimentSpec("scatter-skill", data, gold, fixed_priors())
        )
        r2 = dict(report.summary)["r_squared"]
        ok = r2 is not None and r2 >= 0.7
        _report(9, ok, f"hidden-gold scatter R^2 = {r2:.4f} (threshold 0.7)")
        assert ok


class TestCriterion10AdaptiveVsStatic:
    def test_fig6_shape(self, population):
        data, gold, _ = population
        n_q = len(data.questions)
        spec = harness.ExperimentSpec(
            "adaptive-vs-static", data, gold, fixed_priors(),
            budgets=(2, 5, 10, 20, n_q),
            seed=POPULATION_SEED,
        )
        report = harness.run_adaptive_vs_static(spec)
        table = {(b, arm): (r, se) for b, arm, r, se, _n in report.summary}
        problems = []
        for b in (2, 5, 10, 20):
            ra, sea = table[(b, "adaptive")]
            rs, ses = table[(b, "static")]
            band = math.sqrt(sea**2 + ses**2)
            if ra > rs + band:
                problems.append(f"budget {b}: adaptive {ra:.3f} > static {rs:.3f} + 1 sigma")
        full_gap = abs(table[(n_q, "adaptive")][0] - table[(n_q, "static")][0])
        if full_gap > 1e-9:
            problems.append(f"full-budget arms differ by {full_gap:.2e}")
        ok = not problems
        pairs = ", ".join(
            f"b={b}: adaptive {table[(b, 'adaptive')][0]:.3f} vs static "
            f"{table[(b, 'static')][0]:.3f}"
            for b in (2, 5, 10, 20)
        )
        _report(10, ok, pairs + f"; full-budget gap {full_gap:.1e}")
        assert not problems, "; ".join(problems)


class TestCriterion11ConditionalTrec:
    def test_trec_subset_if_supplied(self):
        """Checks the sparse crowdsourcing subset when the user supplies it
        (CROWDTEST_TREC_DIR with responses.csv/questions.csv/gold.csv in
        this package's formats: 369 questions, 8 answers each)."""
        trec_dir = os.environ.get("CROWDTEST_TREC_DIR")
        if not trec_dir:
            _report(11, True, "SKIPPED: set CROWDTEST_TREC_DIR to run the data check")
            pytest.skip("TREC-shaped dataset not supplied (CROWDTEST_TREC_DIR unset)")
        from crowdtest.io import load_dataset

        base = Path(trec_dir)
        data, gold = load_dataset(
            base / "responses.csv", base / "questions.csv", base / "gold.csv"
        )
        votes = majority_vote(data)
        majority_correct = sum(
            1 for q in data.question_ids if votes[q] == gold.get(q)
        )
        report = infer_variant(
            data, GoldSet(), ct.default_priors(), ModelVariant.FULL
        )
        answers = inferred_answers(report.posteriors)
        model_correct = sum(1 for q in data.question_ids if answers[q] == gold.get(q))
        ok = majority_correct == 206 and model_correct >= majority_correct
        _report(
            11, ok,
            f"TREC subset: majority {majority_correct} (expect 206), "
            f"model {model_correct} (expect >= majority)",
        )
        assert majority_correct == 206
        assert model_correct >= majority_correct


class TestCriterion12CliDeterminism:
    def _run(self, argv, cwd):
        return subprocess.run(
            [sys.executable, "-m", "crowdtest.cli", *argv],
            capture_output=True, text=True, cwd=cwd,
        )

    def test_cli_byte_reproducible(self, tmp_path):
        checks = []

        synth_args = [
            "synth", "--participants", "10", "--questions", "8", "--options", "4",
            "--seed", "3", "--discrimination", "fixed:1.0",
        ]
        a = self._run(synth_args + ["--out-dir", str(tmp_path / "a")], tmp_path)
        b = self._run(synth_args + ["--out-dir", str(tmp_path / "b")], tmp_path)
        assert a.returncode == 0, a.stderr
        same = all(
            (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
            for n in ("responses.csv", "questions.csv", "gold.csv", "truth.json")
        ) and a.stdout == b.stdout
        checks.append(("synth", same))

        infer_args = [
            "infer",
            "--responses", str(tmp_path / "a" / "responses.csv"),
            "--questions", str(tmp_path / "a" / "questions.csv"),
            "--gold", str(tmp_path / "a" / "gold.csv"),
            "--discrimination", "learned",
        ]
        a = self._run(infer_args + ["--out", str(tmp_path / "p1.json")], tmp_path)
        b = self._run(infer_args + ["--out", str(tmp_path / "p2.json")], tmp_path)
        assert a.returncode == 0, a.stderr
        checks.append(
            (
                "infer",
                (tmp_path / "p1.json").read_bytes() == (tmp_path / "p2.json").read_bytes(),
            )
        )

        eval_args = [
            "eval", "crowd-curve",
            "--responses", str(tmp_path / "a" / "responses.csv"),
            "--questions", str(tmp_path / "a" / "questions.csv"),
            "--gold", str(tmp_path / "a" / "gold.csv"),
            "--discrimination", "fixed:1.0",
            "--sizes", "2,5", "--reps", "5", "--seed", "17",
        ]
        a = self._run(eval_args + ["--out", str(tmp_path / "e1")], tmp_path)
        b = self._run(eval_args + ["--out", str(tmp_path / "e2")], tmp_path)
        assert a.returncode == 0, a.stderr
        same = (
            a.stdout == b.stdout
            and (tmp_path / "e1.summary.tsv").read_bytes()
            == (tmp_path / "e2.summary.tsv").read_bytes()
            and (tmp_path / "e1.rows.tsv").read_bytes()
            == (tmp_path / "e2.rows.tsv").read_bytes()
        )
        checks.append(("eval", same))

        static_args = [
            "static-set",
            "--responses", str(tmp_path / "a" / "responses.csv"),
            "--questions", str(tmp_path / "a" / "questions.csv"),
            "--gold", str(tmp_path / "a" / "gold.csv"),
            "--budget", "3",
        ]
        a = self._run(static_args, tmp_path)
        b = self._run(static_args, tmp_path)
        assert a.returncode == 0, a.stderr
        checks.append(("static-set", a.stdout == b.stdout))

        ok = all(same for _, same in checks)
        _report(
            12, ok,
            "CLI determinism: "
            + ", ".join(f"{name} {'ok' if same else 'DIFFERS'}" for name, same in checks),
        )
        assert ok, checks
