"""Walkthrough: one physical network, three equal-exact channel routes,
and what each approximation actually assumes.

Draws a random passive reciprocal multiport, computes the end-to-end
channel by direct elimination, by the explicit block formula, and through
the cascade decomposition, then enforces each approximation's premise on
the network and watches the corresponding model error collapse to zero.
"""

import numpy as np

from bdris.channels import (channel_app1, channel_app2, channel_app3,
                            channel_compact, channel_exact, channel_explicit,
                            compact_decompose, make_ris_state)
from bdris.netparams import NetworkParameters, PortLayout, Terminations
from bdris.topology import make_mask

rng = np.random.default_rng(1)

N_T, N_I, N_R = 2, 8, 2
Z0 = 50.0

lay = PortLayout(N_T, N_I, N_R)

# passive reciprocal draw: symmetric strict contraction -> positive-real Z
s = rng.standard_normal((lay.n, lay.n)) + 1j * rng.standard_normal((lay.n, lay.n))
s = (s + s.T) / 2.0
s *= 0.9 / np.linalg.norm(s, 2)
z = Z0 * np.linalg.solve(np.eye(lay.n) - s, np.eye(lay.n) + s)
params = NetworkParameters(lay, z)
term = Terminations.matched(lay, Z0)

b = rng.standard_normal((N_I, N_I)) * 0.02
b = (b + b.T) / 2.0

h_direct = channel_exact(params, term, b)
h_blocks = channel_explicit(params, term, b)
dec = compact_decompose(params, term)
h_cascade = channel_compact(dec, make_ris_state(dec, b))

def rel(a, ref):
    return np.linalg.norm(a - ref) / np.linalg.norm(ref)

print("three routes to the same exact channel")
print(f"  direct elimination vs block formula : {rel(h_blocks, h_direct):.2e}")
print(f"  direct elimination vs cascade form  : {rel(h_cascade, h_direct):.2e}")

# approximation errors on the untouched network: all premises violated
print("\napproximation error on a fully general passive network")
for name, fn in (("unilateral", channel_app1),
                 ("+ matched arrays", channel_app2),
                 ("+ uncoupled surface", channel_app3)):
    print(f"  {name:20s}: {rel(fn(params, term, b), h_direct):.3f}")

# now enforce the premises one at a time and watch each model become exact
sl = {g: lay.group_slice(g) for g in "TIR"}

def cut_feedback(zm):
    zm = zm.copy()
    zm[sl["T"], sl["I"]] = 0.0     # nothing flows back into the transmitter
    zm[sl["T"], sl["R"]] = 0.0
    zm[sl["I"], sl["R"]] = 0.0     # or from the loads into the surface
    return NetworkParameters(lay, zm)

p1 = cut_feedback(z)
z2 = z.copy()
z2[sl["T"], sl["T"]] = Z0 * np.eye(N_T)
z2[sl["R"], sl["R"]] = Z0 * np.eye(N_R)
p2 = cut_feedback(z2)
z3 = z2.copy()
z3[sl["I"], sl["I"]] = Z0 * np.eye(N_I)
p3 = cut_feedback(z3)

print("\nsame comparison after enforcing each model's own premise")
print(f"  unilateral          : "
      f"{rel(channel_app1(p1, term, b), channel_exact(p1, term, b)):.2e}")
print(f"  + matched arrays    : "
      f"{rel(channel_app2(p2, term, b), channel_exact(p2, term, b)):.2e}")
print(f"  + uncoupled surface : "
      f"{rel(channel_app3(p3, term, b), channel_exact(p3, term, b)):.2e}")

# the effective surface admittance keeps a positive-definite real part on
# every passive draw -- the property that makes the cascade form well posed
eig_min = np.linalg.eigvalsh(dec.re_ybar_ii)[0]
print(f"\nmin eigenvalue of Re(effective surface admittance): {eig_min:.4e} S")
