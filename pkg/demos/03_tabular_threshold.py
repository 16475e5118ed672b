"""The one-half threshold on a toy chain.

An always-successful adversary redirects the agent's action with
probability p, while the replay buffer still books the transition under the
action the agent meant to take.  Below p = 0.5 the nominal experience
outweighs the poisoned share and Q-learning recovers the optimal policy;
above it the learned ranking flips.
"""

from agelab.rng import SplitMix64
from agelab.tabular import chain_mdp, tabular_attack_experiment, uniform_threshold_holds

mdp = chain_mdp()
for p in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
    wins = sum(tabular_attack_experiment(mdp, p, rng=SplitMix64(seed), episodes=600).converged
               for seed in range(5))
    print(f"p={p:.1f}  converged {wins}/5   threshold says {'recover' if uniform_threshold_holds(p) else 'fail'}")
