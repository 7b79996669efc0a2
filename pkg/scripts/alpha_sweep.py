"""Mean NMI of each collective method as the consensus weight alpha varies.

    python3 scripts/alpha_sweep.py --family synth-c --param 0.1
"""
import argparse

import numpy as np

from multiplex_nmf.core import SolverConfig
from multiplex_nmf.evaluation import nmi
from multiplex_nmf.fuse import run_method
from multiplex_nmf.synth import generate_synth_c, generate_synth_n

GENERATORS = {"synth-c": generate_synth_c, "synth-n": generate_synth_n}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--family", choices=sorted(GENERATORS), default="synth-c")
    p.add_argument("--param", type=float, default=0.1, help="p_var or p_noise")
    p.add_argument("--alphas", default="0,0.01,0.1,0.5,1,10,100")
    p.add_argument("--methods", default="csnmf,cpnmf,csnmtf,cssnmtf")
    p.add_argument("--seeds", type=int, default=5)
    args = p.parse_args(argv)

    alphas = [float(a) for a in args.alphas.split(",")]
    methods = args.methods.split(",")
    nets = [GENERATORS[args.family](args.param, s) for s in range(args.seeds)]
    print("alpha\t" + "\t".join(methods))
    for alpha in alphas:
        cells = []
        for method in methods:
            scores = [nmi(run_method(net, method, SolverConfig(k=2, alpha=alpha, seed=s)).assignment,
                          net.ground_truth)
                      for s, net in enumerate(nets)]
            cells.append(f"{np.mean(scores):.3f}")
        print(f"{alpha:g}\t" + "\t".join(cells))


if __name__ == "__main__":
    main()
