"""An adversary that learns when to strike.

The adversary watches the victim's cart-pole state and chooses, every step,
whether to pay one unit for a targeted perturbation.  A fragile victim is
cheap to topple; a robust one forces many more paid perturbations.  Pass a
checkpoint path to benchmark a trained victim, otherwise a random one is used.
"""

import sys

import numpy as np

from agelab.harness.checkpoint import load_checkpoint
from agelab.neural import QNetwork
from agelab.resilience import AdversaryConfig, quasi_stable, train_adversary
from agelab.rng import SplitMix64

victim = load_checkpoint(sys.argv[1]) if len(sys.argv) > 1 else QNetwork.initialize(rng=SplitMix64(5))
adversary, log = train_adversary(victim, AdversaryConfig(max_timesteps=20_000), SplitMix64(6))

print("episodes:", len(log.victim_reward))
print("final 100-episode regret:", round(float(log.ma100_regret()[-1]), 1))
print("final 100-episode perturbations:", round(float(log.ma100_perturbations()[-1]), 2))
if len(log.perturbations) >= 299:
    print("quasi-stable:", quasi_stable(log.perturbations))
print("victim episode lengths (last 10):", np.array(log.victim_reward[-10:], dtype=int))
