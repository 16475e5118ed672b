"""Attacking a DQN once it has learned cart-pole.

Train until the 100-episode mean passes the convergence threshold, then
branch the same trained state into a mild (p = 0.2) and a heavy (p = 0.8)
attack.  Heavy attacks refill the replay memory with poisoned transitions
and the curve does not come back.  This takes a few minutes on one core.
"""

import copy

import numpy as np

from agelab.attacks import AttackSpec
from agelab.rng import SplitMix64
from agelab.trainer import DQNTrainer, TrainerConfig, moving_average

base = DQNTrainer(TrainerConfig(), SplitMix64(1))
base.run(stop_at_convergence=True)
if base.log.convergence_step is None:
    raise SystemExit("no convergence within the step budget; try another seed")
print("converged at step", base.log.convergence_step)

for p in (0.2, 0.8):
    run = copy.deepcopy(base)
    run.set_attack(AttackSpec(p_attack=p), horizon=50_000)
    run.run()
    ma = moving_average(run.log.ep_reward)
    after = np.array(run.log.ep_end_step) > run.log.attack_start_step
    print(f"p={p}: lowest 100-episode mean after attack {np.nanmin(ma[after]):.0f}, final {ma[-1]:.0f}")
