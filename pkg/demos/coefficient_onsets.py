"""Sign onsets of the auxiliary coefficient sequences of the discrete energy.

Every sequence should become and stay nonnegative after a finite index.
We scan up to one million and print the onsets, then compare a few
normalized sequences with their limits.
"""
from tikhonov_inertial.ipga import StepParams, appendix_sequences, scan_appendix

#%%

params = StepParams(h=1.0, alpha=3.0, beta=4.0, a=1.0, p=1.8, q=0.5, delta_theta=1.0)
lam = 1.0
s = params.h * params.a / (8 * params.alpha)
onsets = scan_appendix(params, lam, s, k_max=10**6)
for name, k in onsets.items():
    print(f"{name:>32}  {k}")

#%%
# Normalized values at k = 1e6.  Convergence is slow, of order k^(-1) or worse.

k = 1.0e6
rec = appendix_sequences(k, params, lam, s)
h, q, p, a, al = params.h, params.q, params.p, params.a, params.alpha
print("n_k / k^(q-p):", rec.n / k ** (q - p), "limit", 0.5 * a * lam * h ** (q - p + 2))
print("ell_k:", rec.ell, "limit", al * h - lam)
