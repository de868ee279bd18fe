"""Sample the band ensemble and compare with the semicircle law.

Usage: python3 demos/mc_semicircle.py [W] [n] [samples]
"""

import sys

from rbmdos import ensemble as ens
from rbmdos import landscape as ls

W = float(sys.argv[1]) if len(sys.argv) > 1 else 16
n = int(sys.argv[2]) if len(sys.argv) > 2 else 256
samples = int(sys.argv[3]) if len(sys.argv) > 3 else 20
seed = 7

h = ens.empirical_dos(ens.ModelParams(0.0, W, n, check_window=False), samples, 40, seed)
print(f"sup |rho_hist - rho_sc| over bins: {ens.sup_density_distance(h):.4f}")
print(f"mass beyond |x| = 2.5: {ens.tail_mass(h):.2e}")

print("\n    E    eps   Re g_mc   Im g_mc   |g_mc - g_sc|   stderr")
for E in (0.0, 0.5, 1.0, 1.5):
    st = ens.stieltjes_mc(ens.ModelParams(E, W, n, eps=0.1, check_window=False), samples, seed)
    ref = ls.semicircle(E, 0.1)
    print(f"{E:5.2f}  {0.1:5.2f}  {st.g_mean.real:8.4f}  {st.g_mean.imag:8.4f}"
          f"  {abs(st.g_mean - ref):13.2e}  {st.g_stderr:8.1e}")
