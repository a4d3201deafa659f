"""Compare the numba-jitted kernels against the interpreted numpy fallback.

The backend is chosen at import time from CROWDTEST_BACKEND, so each
measurement runs in a subprocess.  Workloads: one full-graph inference per
discrimination mode and one batch of adaptive branch scorings.

Usage: python benchmarks/bench_backends.py [--repeats 3]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json
import time

import crowdtest as ct
from crowdtest import adaptive, synth
from crowdtest._backend import BACKEND


def timeit(fn, repeats):
    fn()  # warm-up (and jit compilation on the numba backend)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(repeats):
    results = {"backend": BACKEND}

    for mode_name, disc in (
        ("fixed", ct.Discrimination.fixed(1.0)),
        ("learned", ct.Discrimination.learned()),
    ):
        priors = ct.default_priors(disc)
        cfg = synth.SynthConfig(
            num_participants=40, num_questions=30, num_options=4,
            priors=priors, seed=7,
        )
        data, gold, _ = synth.sample(cfg)
        graph = ct.build_graph(data, gold if mode_name == "fixed" else ct.GoldSet(), priors)
        results[f"infer_{mode_name}_40x30"] = timeit(
            lambda: ct.infer(graph), repeats
        )

    priors = ct.default_priors(ct.Discrimination.fixed(1.0))
    cfg = synth.SynthConfig(
        num_participants=30, num_questions=30, num_options=4, priors=priors, seed=7
    )
    data, gold, _ = synth.sample(cfg)
    cal = adaptive.calibrate(data, gold, priors)
    pid = data.participants[0]
    recorded = {r.question_id: r.response for r in data.records if r.participant_id == pid}

    def session():
        sess = adaptive.new_session(pid, data, gold, priors, cal, budget=10)
        while len(sess.asked) < sess.budget:
            q = adaptive.next_question(sess)
            sess = adaptive.submit_response(sess, q, recorded[q])

    results["adaptive_session_10_of_30"] = timeit(session, repeats)
    print(json.dumps(results))


main(REPEATS)
"""


def run_backend(backend: str, repeats: int) -> dict:
    env = dict(os.environ, CROWDTEST_BACKEND=backend)
    code = _WORKER.replace("REPEATS", str(repeats))
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    rows = [run_backend(b, args.repeats) for b in ("numba", "numpy")]
    keys = [k for k in rows[0] if k != "backend"]
    width = max(len(k) for k in keys)
    header = f"{'workload':<{width}}  " + "  ".join(f"{r['backend']:>12}" for r in rows)
    print(header)
    print("-" * len(header))
    for k in keys:
        cells = "  ".join(f"{r[k] * 1e3:>10.2f}ms" for r in rows)
        ratio = rows[1][k] / rows[0][k]
        print(f"{k:<{width}}  {cells}  ({ratio:.0f}x)")


if __name__ == "__main__":
    main()
