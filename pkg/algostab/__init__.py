"""
Algorithm Stability Toolkit

Treats iterative algorithms as perturbed discrete-time dynamical systems,
builds converse Lyapunov functions numerically, evaluates disturbance bounds
and checks them against simulated trajectories.
"""

__version__ = "1.0.0"
