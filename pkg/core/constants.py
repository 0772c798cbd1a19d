"""Numeric tolerances and fixed names shared across the toolkit."""

# Register size
MIN_QUBITS = 1
MAX_QUBITS = 12

# DensityMatrix invariants
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_FLOOR = -1e-10
IMAG_TOL = 1e-12

# Exact identities checked by the oracles
EXACT_TOL = 1e-12
TWIRL_OFFDIAG_TOL = 1e-10

# Proposed protocol
PROB_Z_ROUND = 1.0 / 3.0      # Pr[z-basis round]
ERROR_SCALE = 1.5             # f_hat = 1 - ERROR_SCALE * qber
DISTINGUISH_C = 2.0 / 3.0     # Pr[r=1] = c (1 - f)

PROTOCOL_NAMES = ("proposed", "guhne", "dfe")
NOISE_KINDS = ("perfect", "white", "dephased", "adversarial-minus", "custom-mixture")
# "dark-replaced" is accepted as an alias of the white replacement
NOISE_KIND_ALIASES = {"dark-replaced": "white"}
NOISE_MODELS = ("iid", "dark-count")
SWEEP_PARAMETERS = ("p_dark", "delta", "f", "M")

CSV_COLUMNS = (
    "protocol", "L", "N", "M", "p_dark", "delta", "correlation", "trials",
    "mse", "mse_stderr", "bias", "bias_stderr", "analytic_variance", "lower_bound",
    "measurement_error", "measurement_stderr", "sampling_error", "cross_term", "cross_stderr",
)
# quantities monotonicity_violations can follow
TREND_TERMS = ("mse", "measurement")

# Paths
CONFIG_PATH = 'config/settings.json'
EXPERIMENTS_PATH = 'config/experiments'
OUTPUT_PATH = 'results'
MANIFEST_SUFFIX = '.meta.json'

# RNG stream tags mixed into SeedSequence entropy
STREAM_ENSEMBLE = 0
STREAM_SUBSET = 1
STREAM_ROUNDS = 2
