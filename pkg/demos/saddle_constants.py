"""Print the saddle-point constants and check the closed-form identities.

Usage: python3 demos/saddle_constants.py [E] [W]
"""

import sys

import numpy as np

from rbmdos import landscape as ls

E = float(sys.argv[1]) if len(sys.argv) > 1 else 1.0
W = float(sys.argv[2]) if len(sys.argv) > 2 else 10.0

sd = ls.saddle_data(E, W)
for name, val in sd.as_dict().items():
    if name != "V":
        print(f"{name:>14s}  {val}")

# the saddles are zeros of the landscape and critical points of it
print("f_a(a+) =", ls.eval_fa(sd.a_plus, E))
print("f_b(b_s) =", ls.eval_fb(sd.b_s, E))
print("L(a-, b_s) =", sd.L_minus)
print("lambda0+^2 * lambda1(S) =", sd.lambda_0_plus**2 * sd.lambda1_S)
print("det S(L+) =", np.linalg.det(ls.S_matrix(sd.L_plus, W)))
