"""Learning control on lifted LTI systems.

Model-based norm-optimal gain synthesis and a model-free actor-critic
learner tune the same basis-function feedforward on a simulated
closed-loop motion system, trial by trial.
"""

__version__ = "0.1.0"
