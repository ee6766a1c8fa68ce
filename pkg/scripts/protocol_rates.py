"""Success probability and heralded fidelity of each entangling protocol vs efficiency."""
import argparse

import numpy as np

from ensembleqc.protocols import (ProtocolParams, blockade_entangle, dlcz_entangle,
                                  double_heralding_full, ghz_generate)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=6)
    ap.add_argument("--p-e", type=float, default=0.01)
    args = ap.parse_args(argv)

    print(f"{'eta':>6} {'protocol':>18} {'p_success':>11} {'F_min':>9}")
    for eta in np.linspace(0.2, 1.0, args.points):
        runs = {
            "dlcz": dlcz_entangle(ProtocolParams(eta_D=eta, p_e=args.p_e)),
            "double_heralding": double_heralding_full(eta),
            "blockade_hom": blockade_entangle(ProtocolParams(eta_D=eta)),
            "ghz_Q4": ghz_generate(ProtocolParams(Q=4, eta_D=eta)),
            "ghz_Q6": ghz_generate(ProtocolParams(Q=6, eta_D=eta)),
        }
        for name, run in runs.items():
            print(f"{eta:6.2f} {name:>18} {run.success_probability:11.4e} {run.min_fidelity():9.6f}")


if __name__ == "__main__":
    main()
