"""Minimum-time evader trajectories for multi-pursuer asset-guarding
engagements: alternating best responses over convex trajectory subproblems,
with closed-loop verification against conventional pursuer guidance."""

__version__ = "0.1.0"
