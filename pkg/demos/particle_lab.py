"""Condition n independent walkers on an atypical terminal profile and compare
their mid-time profile with the entropic interpolation.

The empirical log-probability of the event, divided by n, estimates minus the
excess entropy of the bridge.  Run from the repository root:
python demos/particle_lab.py
"""

from schrodinger_lab.acceptance import particle_setup
from schrodinger_lab.particles import condition_and_compare


def main():
    print("4-cycle, uniform start, target (0.3, 0.233, 0.233, 0.233), epsilon 0.05")
    print(f"{'n':>5} {'accepted':>9} {'batches':>8} {'TV to mu_1/2':>13} {'rate':>10} {'reference':>10} {'SE':>9}")
    for n in (50, 100, 200):
        cfg, sol, mid = particle_setup(n=n, min_accepted=200)
        rep = condition_and_compare(cfg, sol, mid, bootstrap=500)
        print(f"{n:5d} {rep.accepted:9d} {rep.batches_run:8d} {rep.tv_to_interpolation:13.4f} "
              f"{rep.rate_estimate:10.5f} {rep.reference_value:10.5f} {rep.standard_errors['rate']:9.1e}")
    print("\nThe rate approaches the reference as n grows; at fixed n the gap is a")
    print("finite-size bias that shrinks with n, not sampling noise.")


if __name__ == "__main__":
    main()
