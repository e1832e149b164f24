"""RL-driven design-space exploration for 2D-mesh AI accelerators.

Library layout:

- graph: operator graphs, synthetic transformer workloads, feature extraction
- procnode: process-node parameter table and scaling factors
- kvcache: KV-cache footprint and compaction arithmetic
- arch: chip configuration and the analytical PPA models
- partition: operator placement and per-tile allocation statistics
- rlenv: state/action encoding, reward, constraints
- neural: numpy MLPs, stochastic heads, Adam, checkpoints
- sac: soft actor-critic trainer with prioritized replay
- planner: world model and MPC action refinement
- surrogate: learned PPA pre-filter
- search: per-node episode loop, Pareto archive, baselines
- analysis / plots: post-hoc statistics, CSV reports, figures
- cli: the `meshdse` command
"""

__version__ = "0.1.0"
