# config.py

# --- Trial Design Settings ---
N_PILOT = 30
N_MAX = 1500
ALPHA_TARGET = 0.05
POWER_TARGET = 0.8
STEP_SIZE_SCALE_FACTOR = 0.5
FUTILITY_POWER_BOUNDARY = 0.11
B_BOOTSTRAP = 100          # Bootstrap replicates for the variance of the ATE
T_NULL_SAMPLES = 100       # Null test-statistic samples drawn by SECRETS
MOMENT_METHOD = "secrets"
CP_MOMENT_METHOD = "secrets"
RETUNE_PER_REPLICATE = False
ARM_SIZE_INCREMENT = 0     # 0 disables the arm-size grid projection

# --- Synthetic Intervention Settings ---
R_TRAIN_VAL = 7 / 3
RIDGE_GRID = (0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)
PRE_PERIOD_END = None      # None means baseline_index + 1
MIN_SI_DONORS = 3          # SI tuning splits donors into train and validation

# --- Critical Value Tuning (testing_params) ---
T_LOWER = 3.0
T_UPPER = 5.0
T_LIMIT_EXP = 2.0
N_S = 10
DELTA_ALPHA = 1e-3
MAX_TUNING_ROUNDS = 20

# --- Baseline Settings ---
INTERIM_INFORMATION_FRACTION = 0.99
CP_PROMISING_THRESHOLD = 0.5

# --- Synthetic Cohort Settings ---
VISITS = 8
BASELINE_INDEX = 2
ENDPOINT_INDEX = 7
BASELINE_MEAN = 30.0
BASELINE_SD = 8.0
CONTROL_DRIFT = -1.0
TREATMENT_EFFECT_MEAN = -3.17  # CHAMP's observed ATE
TREATMENT_EFFECT_SD = 2.0
NOISE_SD = 2.0
LATENT_FACTOR_COUNT = 2
LATENT_LOADING_SD = 4.0
DRAW_BLOCK_SIZE = 25       # Subjects drawn per memoised block

# --- Evaluation Settings ---
N_TRIALS = 100
SEED = 20240101
FEASIBILITY_POWER_TOLERANCE = 0.01
FEASIBILITY_ALPHA_TOLERANCE = 0.01

# --- Runtime Settings ---
WORKERS_ENV = "TADSIE_WORKERS"
LOG_LEVEL_ENV = "TADSIE_LOG_LEVEL"
DEFAULT_WORKERS = 1
DEFAULT_LOG_LEVEL = "WARNING"
