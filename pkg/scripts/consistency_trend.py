"""Posterior mass on the true model as n grows (Gibbs engine, design 1 layout)."""
import argparse

import numpy as np

from gsslogit.core import default_hyperparams
from gsslogit.oracle import posterior_ratio_trace
from gsslogit.pipeline import fit, replication_configs
from gsslogit.simulate import SimConfig, gen_dataset


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[100, 200, 400, 800])
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--setting", type=int, default=4)
    ap.add_argument("--burnin", type=int, default=1000)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=2024)
    a = ap.parse_args(argv)

    base = SimConfig.from_design(1, setting=a.setting, seed=a.seed)
    table = np.zeros((a.reps, len(a.n)))
    for k, cfg in enumerate(replication_configs(base, a.reps)):
        for i, n in enumerate(a.n):
            ds = gen_dataset(SimConfig(**{**cfg.__dict__, "n": n, "n_test": 0}))
            hyper = default_hyperparams(n, ds.design.r)
            d = fit(ds.design, ds.e, "gibbs", hyper, a.burnin, a.samples, cfg.seed, store_beta=False)
            table[k, i] = posterior_ratio_trace(d, ds.true_model).true_prob
        print(f"rep {k:2d}  " + "  ".join(f"{v:.3f}" for v in table[k]), flush=True)
    print("mean    " + "  ".join(f"{v:.3f}" for v in table.mean(axis=0)))
    print("n       " + "  ".join(f"{n:5d}" for n in a.n))


if __name__ == "__main__":
    main()
