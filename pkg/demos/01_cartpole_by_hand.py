"""Cart-pole from first principles.

Run a few hand-written controllers through the Euler-integrated dynamics and
see how long each keeps the pole up.  A bang-bang rule on the pole angle
already balances for a while; adding the angular velocity does far better.
"""

import numpy as np

from agelab import cartpole
from agelab.rng import SplitMix64

rng = SplitMix64(2024)

# always push right: the pole falls left within a few dozen steps
print("push right      ", cartpole.rollout(lambda obs: 1, rng))

# push toward the side the pole leans
print("follow angle    ", cartpole.rollout(lambda obs: int(obs[2] > 0), rng))

# lean plus a damping term on the angular velocity
def pd(obs):
    return int(obs[2] + 0.5 * obs[3] > 0)

lengths = [cartpole.rollout(pd, rng) for _ in range(20)]
print("angle + velocity", np.mean(lengths), "(cap is", cartpole.MAX_STEPS, ")")

# one step from rest, pushing right, for a feel of the magnitudes
state = cartpole.EnvState(0.0, 0.0, 0.0, 0.0)
print(cartpole.step(state, 1).next_state)
