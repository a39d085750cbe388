"""Which rate regime does a pair (q, p) fall in?

Prints a coarse character map of the discrete classification over the unit
square in q and ``p in (0, 2]``, followed by the full report for one point.
"""
import numpy as np

from tikhonov_inertial.ipga import StepParams
from tikhonov_inertial.rates import classify_continuous, classify_discrete, predict_rates

#%%

symbols = {"none": ".", "energy-bounded": "E", "strong-i": "1", "strong-ii": "2", "strong-iii": "3"}
qs = np.linspace(0.025, 0.975, 40)
for p in np.linspace(2.0, 0.05, 20):
    print(f"p={p:4.2f} " + "".join(symbols[classify_discrete(q, p)] for q in qs))
print("       q from 0 to 1")

#%%
# The continuous cases on the same grid point.

print(classify_continuous(0.9, 1.2))

#%%

rep = predict_rates(StepParams(h=1.0, alpha=15.0, beta=4.0, a=1.0, p=1.6, q=0.7, delta_theta=2.0))
print(rep.to_text())
