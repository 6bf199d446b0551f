"""Error against sample count for both estimators, with the closed-form curves.

Run: python demos/03_error_curves.py
"""
from isle.harness import ExperimentConfig, error_curves, run_experiment

m = run_experiment(ExperimentConfig(circuit="GateChain", params="TwoPar"))
c = error_curves(m, n_max=400)
print(f"{'N':>5s}  {'STD-MC emp':>10s} {'theory':>8s}  {'ISLE-d2 emp':>11s} {'theory':>8s}")
for n in (1, 5, 25, 100, 400):
    mc, d2 = c["STD-MC"], c["ISLE-d2"]
    print(f"{n:5d}  {mc[0][n - 1]:10.4f} {mc[1][n - 1]:8.4f}  {d2[0][n - 1]:11.4f} {d2[1][n - 1]:8.4f}")
