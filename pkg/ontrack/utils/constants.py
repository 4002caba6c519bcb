"""Constants and file-layout names."""

# Dataset layout
IMG_DIR = "img"
FRAME_NAME = "{:04d}.ppm"
GROUNDTRUTH_FILE = "groundtruth_rect.txt"
RESULTS_FILE = "results.txt"
META_FILE = "meta.json"

# OTB-style metrics
SUCCESS_THRESHOLDS = [round(0.05 * i, 2) for i in range(21)]
PRECISION_THRESHOLD_PX = 20.0

# VOT reinitialization protocol
VOT_REINIT_DELAY = 5
VOT_BURN_IN = 10

# Ablation grids
LAMBDA_SWEEP = [round(0.1 * i, 1) for i in range(11)]
ANTI_DRIFT_IOU = 0.3
ABLATION_SEEDS = list(range(10))
