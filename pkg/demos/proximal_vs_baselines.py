"""The inertial proximal algorithm on a Gaussian least-squares problem.

We compare the full method with two ablations that share every other
parameter: dropping the gradient correction (``beta = 0``) and dropping the
vanishing damping and scaling (``p = q = 0``).
"""
import numpy as np

from tikhonov_inertial.ipga import StepParams, run_ipga
from tikhonov_inertial.problems import make_l2reg_problem
from tikhonov_inertial.rates import iterations_to_tolerance, predict_rates

#%%

oracle, K, b = make_l2reg_problem(42, 40, 50)
params = StepParams(h=1.0, alpha=15.0, beta=4.0, a=1.0, p=1.9, q=0.95, delta_theta=5.0)
print(predict_rates(params).to_text())

#%%
# Same start for all three runs.

x0 = np.ones(oracle.dimension)
logs = {b: run_ipga(params, oracle, x0, x0.copy(), 100, b) for b in ("full", "no_hessian", "no_decay")}

#%%
# Iterations until each error measure drops below 1e-12 (inf if never).

print(f"{'baseline':>11} {'gap':>6} {'dist':>6} {'step':>6} {'grad':>6}")
for name, log in logs.items():
    its = [iterations_to_tolerance(log.k, s) for s in (log.g_gap, log.dist_min_norm, log.step_norm, log.grad_norm)]
    print(f"{name:>11} " + " ".join(f"{v:>6}" for v in its))
