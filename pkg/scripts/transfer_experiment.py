"""Same-script versus cross-script word recognition at several glyph overlaps.

    python scripts/transfer_experiment.py --seeds 1 2 3 --rhos 1.0 0.5 0.0
"""
import argparse
import logging
import time

from xlhwr.experiments import (CorpusConfig, HmmConfig, SvmConfig, build_luts, run_recognition, self_luts,
                               train_source)
from xlhwr.synthscript import derive_script, random_script


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--rhos", type=float, nargs="+", default=[1.0, 0.5, 0.0])
    ap.add_argument("--n-train", type=int, default=500)
    ap.add_argument("--n-test", type=int, default=100)
    ap.add_argument("--states", type=int, default=8)
    ap.add_argument("--mixtures", type=int, default=4)
    ap.add_argument("--iters", type=int, default=5)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    corpus = CorpusConfig(n_train=args.n_train, n_test=args.n_test)
    print("seed\ttarget\ttop1\ttop5\tmid_top1\tmid_top5\tseconds")
    for seed in args.seeds:
        src = random_script(corpus.n_middle, corpus.n_upper, corpus.n_lower, seed=seed, script_id="S")
        models = train_source(src, corpus, HmmConfig(args.states, args.mixtures, args.iters), SvmConfig(), seed)
        runs = [("same", src, self_luts(src))]
        for rho in args.rhos:
            tgt, _ = derive_script(src, rho, seed=seed + 7, script_id="T")
            runs.append((f"rho={rho}", tgt, None))
        for name, tgt, luts in runs:
            t0 = time.perf_counter()
            luts = luts or build_luts(models, tgt, corpus.char_samples, seed)
            r = run_recognition(models, tgt, luts, corpus, seed)
            print(f"{seed}\t{name}\t{r.metrics.top1:.3f}\t{r.metrics.top5:.3f}\t{r.middle.top1:.3f}\t"
                  f"{r.middle.top5:.3f}\t{time.perf_counter() - t0:.1f}", flush=True)


if __name__ == "__main__":
    main()
