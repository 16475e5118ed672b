"""How AGE spends its exploration budget.

Epsilon-greedy explores uniformly.  AGE explores with the same probability
but draws from a Boltzmann distribution over adversarial gains, so the
actions an attacker would push the agent toward are the ones it tries most.
"""

import numpy as np

from agelab.exploration import age_probabilities, zeta_adv

q = np.array([2.0, 1.5, -0.5, 0.8])
print("Q values:", q)

for eps in (1.0, 0.5, 0.1, 0.02):
    z = zeta_adv(q, eps)
    p = age_probabilities(q, eps)
    print(f"eps={eps:<5} zeta={np.round(z, 3)}  P(action)={np.round(p, 3)}")

# the worst action collects almost all exploratory mass as eps shrinks,
# while the greedy action's total share tends to 1
uniform = np.full(4, 0.02 / 4)
uniform[np.argmax(q)] += 0.98
print("eps-greedy at 0.02:", np.round(uniform, 4))
