"""Empirical thresholds used by the experiment assertions.

Every constant here was calibrated by a recorded oracle run of the CLI
on this code base (2026-08-10, default configs from
condlab.experiments.default_config unless noted).  Recalibration
requires re-running the quoted command and updating the number together
with the observed value in the comment.
"""

# Tail-to-head decay of the L2-L2 operator distance along the laminate
# sequence with periods {2, 4, 8, 16} targeting diag(1, 2).
# Oracle: `lab gconv` (square, level 6, K = 8); observed
# d_16/d_2 = 0.094 with distances 0.300, 0.136, 0.062, 0.028.
GCONV_TAIL_RATIO = 0.35

# Resolvability guard for laminate periods: 4 * n * (max element extent
# along the laminate normal) must not exceed this slack.  The nominal
# guard is 1.0 (four elements per period); the disk mesh's boundary
# projection stretches its worst element by about 4/pi over the
# 2^-level pitch, so the slack admits the calibrated configurations
# (disk level 6, n = 16: 1.26; square level 6, n = 16: 1.0) while still
# refusing aliased periods.
G_SEQUENCE_RESOLUTION_SLACK = 1.3

# Per-level decay of the operator distance between a field and its
# push-forward under the twist map.  Oracle: `lab pushforward`
# (disk levels 4 -> 6, twist 0.3); observed ratios 0.276 and 0.258.
PUSHFORWARD_LEVEL_RATIO = 0.7

# Finite-sample slack for the lower-semicontinuity inequality on
# natural-norm distances at the homogenization limit.
LSC_SLACK = 0.05

# Spread of the ratio ||delta R|| / ||delta ND|| over the electrode
# perturbation family (1 + t) * identity, t in {0.01, 0.02, 0.04}.
# Oracle: `lab electrode_stability` (disk level 5, 4 electrodes);
# observed ratios 0.5964..0.5965, spread 1.0002.
STABILITY_RATIO_SPREAD = 4.0

# The laminate tail value of the voltage misfit must undercut the best
# constant-scalar value by this factor for the nonexistence verdict.
# Oracle: `lab nonexistence` (disk level 6, K = 8, 16 currents);
# observed laminate J0 at n = 16 of 0.0335 vs scalar grid min 0.399,
# ratio 0.084.
NONEXISTENCE_GAP_FACTOR = 0.1

# Relative tolerance on the disk eigenvalue oracle (1/k for the
# current-to-voltage map) at level 6, K = 8.
# Oracle: `lab spectrum`; observed worst relative error 0.26% at k = 8.
SPECTRUM_RTOL = 0.02

# Fitted log-log exponent windows for the continuity sweeps.
# Oracle: `lab continuity_sweep` (disk level 5); observed exponents
# 0.968 (uniform scaling family) and 0.968 (shrinking inclusion family).
CONTINUITY_LINF_EXPONENT = (0.9, 1.1)
CONTINUITY_L1_EXPONENT = (0.0, 1.05)
