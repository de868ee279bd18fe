"""Compare the transfer sweep with brute-force field integrals at n = 1, 2."""

from rbmdos import grid as gr
from rbmdos import oracle

g = gr.quick_grid(1.0, 4)
for n in (1, 2):
    d = oracle.transfer_deviation(n, g)
    print(f"n={n}: Z transfer {d['transfer_Z']:.12f}  rel dev {d['Z']:.1e}; "
          f"g transfer {d['transfer_g']:.12f}  rel dev {d['g']:.1e}")
