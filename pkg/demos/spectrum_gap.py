"""Leading eigenvalues of the transfer operator and the scaled gap.

Usage: python3 demos/spectrum_gap.py [E]
"""

import sys

from rbmdos import ensemble as ens
from rbmdos import grid as gr
from rbmdos import spectral

E = float(sys.argv[1]) if len(sys.argv) > 1 else 1.0

print("   W   lambda0                    |lambda1|   gap*W   residual")
for W in (8, 16):
    g = gr.quick_grid(E, W)
    r = spectral.transfer_spectrum(ens.ModelParams(E, W, 1), g)
    print(f"{W:4d}   {r.lambda0:.10f}  {abs(r.lambda1):.5f}   {r.gap * W:.3f}   "
          f"{max(r.residual0, r.residual1):.1e}")
    k = spectral.kernel_top(g)
    print(f"      |lambda0(K)| = {abs(k.lambda0_K):.8f}, |lambda0+|^2 = {k.predicted:.8f}")
