"""Team regret minimization with value decomposition for Dec-POMDPs.

Subpackages: diffcore (autodiff, MLPs, optimizers), regret (team-regret
accounting), belief (differentiable particle filter), trainer (losses and
training loops), envs (matrix game and grid battle), harness (CLI and
experiment orchestration).
"""

__version__ = "0.1.0"
