"""Solver accuracy against the closed-form Coulomb spectrum.

Solves every (alpha, j, n_r) combination of the standard accuracy matrix and
tabulates the deviation from the exact spectral function, plus the
expectation-value derivative against the analytic dE/dalpha.
"""

import time

import diracmono as dm
from diracmono import monotonicity as mono
from diracmono.coulomb import CoulombLevel, coulomb_energy, coulomb_energy_derivative


def main():
    t0 = time.time()
    print(f"{'alpha':>6} {'j':>4} {'n_r':>4} {'E_solver':>16} {'E_exact':>16} "
          f"{'dE':>9}  {'dE/da_hf':>12} {'dE/da_exact':>12} {'rel':>8}")
    worst_e, worst_d = 0.0, 0.0
    for j in (0.5, 1.5):
        channel = dm.ChannelSpec(d=3, tau=-1, j=j)
        for alpha in (0.2, 0.5, 0.9):
            family = dm.pure_coulomb(alpha)
            results = dm.solve_batch(channel, [family], [0, 1, 2])[0]
            for n_r, state in results.items():
                level = CoulombLevel(n=int(n_r + j + 0.5), j=j, alpha=alpha)
                exact = coulomb_energy(level)
                d_hf = mono.hf_derivative(state, family)
                d_ex = coulomb_energy_derivative(level)
                rel = abs(d_hf - d_ex) / abs(d_ex)
                worst_e = max(worst_e, abs(state.E - exact))
                worst_d = max(worst_d, rel)
                print(f"{alpha:>6.2f} {j:>4.1f} {n_r:>4d} {state.E:>16.12f} "
                      f"{exact:>16.12f} {state.E - exact:>9.1e}  "
                      f"{d_hf:>12.8f} {d_ex:>12.8f} {rel:>8.1e}")
    print(f"\nworst |E - exact| = {worst_e:.2e}, worst derivative rel. error = "
          f"{worst_d:.2e}, elapsed {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()
