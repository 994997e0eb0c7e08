"""Softmax vs calibrated softmax on a confident and a weak logit vector.

Both vectors share the same softmax output because one is a shifted copy of
the other; the calibrated version separates them. The sweep shows how the
top probability shrinks toward 1/C as all logits are lowered.
"""

import argparse

import numpy as np

from dpc.calibration import calibrated_softmax, gradient_shrinkage, softmax


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--gamma", type=float, default=2.5)
    args = p.parse_args(argv)

    confident = np.array([0.0, 2.0, 0.0, 0.0])
    weak = confident - 2.0
    print(f"{'logits':<24} {'softmax':>9} {'calibrated':>11}")
    for o in (confident, weak):
        print(f"{str(o.tolist()):<24} {softmax(o)[1]:>9.4f} {calibrated_softmax(o, args.gamma)[1]:>11.4f}")

    print("\nshift  top-prob   shrinkage on a complementary logit")
    y = np.eye(4)[1]
    for k in (4, 2, 0, -2, -4, -8):
        o = confident + k
        print(f"{k:>5}  {calibrated_softmax(o, args.gamma).max():.4f}     {gradient_shrinkage(o, y, 0, args.gamma):.3e}")


if __name__ == "__main__":
    main()
