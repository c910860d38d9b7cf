"""A quick tour of the simulator and the classical beamformers.

Samples a few channel realizations for a small cell-free setup, runs the
three classical baselines on each, and prints the resulting communication /
sensing numbers side by side. Runs in a few seconds.

    python3 demos/01_baselines_tour.py
"""

import numpy as np

from cfisac import metrics
from cfisac.baselines import cb_comm, cb_sense, wmmse
from cfisac.system import SystemConfig, sample_channel_at

# 3 APs with 4 antennas each serve 2 users and sense one target. The sum
# power across APs is 1 and the noise power 0.1 (10 dB system SNR).
config = SystemConfig.reference(M=3, U=2, N_t=4, beta_s=2.0, seed=0)
print(f"config: {config.M} APs x {config.N_t} antennas, {config.U} UEs, "
      f"P_m = {config.P:.3f}, beta_s = {config.beta_s}")

for index in range(3):
    sample = sample_channel_at(config, index)
    print(f"\nrealization {index}: target angles "
          f"{np.round(np.degrees(sample.theta), 1)} deg")
    header = f"  {'method':10s} {'rate u1':>8s} {'rate u2':>8s} " \
             f"{'sens SNR':>9s} {'objective':>10s}"
    print(header)
    solutions = {
        "cb-comm": cb_comm(config, sample),
        "cb-sense": cb_sense(config, sample),
        "wmmse": wmmse(config, sample)[0],
    }
    for name, sol in solutions.items():
        rep = metrics.evaluate(config, sample, sol)
        print(f"  {name:10s} {rep.rates[0]:8.3f} {rep.rates[1]:8.3f} "
              f"{rep.sensing_snr:9.3f} {rep.objective:10.3f}")

print("\nNotes: wmmse maximizes the sum rate and ignores sensing; cb-sense "
      "puts all power on the target and zeroes the rates; the learned model "
      "(see demo 02) trades the two off through the weighted objective.")
