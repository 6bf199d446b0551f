"""Fifty repetitions of standard MC against ISLE, summarized as one table.

Run: python demos/02_compare_estimators.py
"""
from isle.harness import ExperimentConfig, run_experiment

for params in ("OnePar", "TwoPar", "ThrPar"):
    m = run_experiment(ExperimentConfig(circuit="InverterChain", params=params))
    print(f"\nInverterChain / {params}   T_c = {m.t_c * 1e12:.2f} ps")
    print(f"{'':9s}{'mean':>8s}{'error':>10s}{'sims':>8s}{'gain':>8s}")
    for name, row in m.table.items():
        gain = row.get("empirical_gain")
        print(f"{name:9s}{row['mean_loss']:8.4f}{row['loss_error']:10.2e}{row['mean_full_sims']:8.0f}"
              f"{'' if gain is None else f'{gain:8.0f}'}")
