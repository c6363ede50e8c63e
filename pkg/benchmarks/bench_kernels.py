"""Time the compiled and numpy scaling kernels on a synthetic training sample.

    python benchmarks/bench_kernels.py [--sentences 400] [--repeat 20] [--threads 1]

Reports per-call times for both kernels, a full training run with each
backend, and the largest weight difference between the two fits.
"""

import argparse
import time

import numpy as np

from rfmrank import kernels
from rfmrank import _kernels_py
from rfmrank.search import FeatureCache, build_sample, truncated_selection
from rfmrank.synth import SynthSpec, generate
from rfmrank.trainer import TrainerConfig, _Prepared, reference_expectations, train

try:
    from rfmrank import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def make_sample(sentences, seed):
    corpus, _ = generate(SynthSpec(sentences=sentences, candidates=(10, 30), seed=seed))
    cache = FeatureCache()
    sample, table = build_sample(corpus, truncated_selection(corpus, None), cache)
    return sample, table


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sentences", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--iterations", type=int, default=20)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    sample, table = make_sample(args.sentences, args.seed)
    prep = _Prepared(sample, len(table))
    p = np.exp(prep.probs(np.zeros(len(table))))
    er = reference_expectations(sample)
    print(f"sample: {len(sample)} parses, {len(table)} features, "
          f"{len(prep.levels)} count levels, {len(prep.data)} nonzeros")

    backends = [("python", _kernels_py)]
    if _ckernels is not None:
        backends.append(("cython", _ckernels))
    else:
        print("compiled extension not built; timing the numpy fallback only")

    margs = (prep.indptr, prep.indices, prep.data, prep.row_level, p, prep.n_features,
             len(prep.levels))
    mom = _kernels_py.feature_moments(*margs)
    w = np.zeros(len(table))
    rows = []
    fits = {}
    for name, mod in backends:
        t_m = best_of(lambda: mod.feature_moments(*margs), args.repeat)
        t_s = best_of(lambda: mod.solve_increments(mom, prep.levels, er, w, 0.0, 1e-8, 50,
                                                   -30.0, args.threads), args.repeat)
        saved = kernels.feature_moments, kernels.solve_increments
        kernels.feature_moments, kernels.solve_increments = mod.feature_moments, mod.solve_increments
        try:
            t0 = time.perf_counter()
            model, _ = train(sample, table, TrainerConfig(iterations=args.iterations,
                                                          threads=args.threads))
            t_t = time.perf_counter() - t0
        finally:
            kernels.feature_moments, kernels.solve_increments = saved
        fits[name] = model.weights
        rows.append((name, t_m, t_s, t_t))

    print(f"{'backend':8} {'moments ms':>11} {'solve ms':>10} {'train s':>9}")
    for name, t_m, t_s, t_t in rows:
        print(f"{name:8} {t_m * 1e3:11.3f} {t_s * 1e3:10.3f} {t_t:9.3f}")
    if len(rows) == 2:
        py, cy = rows
        print(f"speedup  {py[1] / cy[1]:10.1f}x {py[2] / cy[2]:9.1f}x {py[3] / cy[3]:8.1f}x")
        diff = float(np.max(np.abs(fits["python"] - fits["cython"]))) if len(table) else 0.0
        print(f"max |w_python - w_cython| after {args.iterations} iterations: {diff:.2e}")


if __name__ == "__main__":
    main()
