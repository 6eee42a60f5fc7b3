# Bitstream container
CONTAINER_MAGIC = b"EVNV"
CONTAINER_VERSION = 1
FRAME_TYPE_I = 0
FRAME_TYPE_P = 1

# Bumped whenever the latent layout produced by the networks changes
MODEL_VERSION = 1

# Entropy coding
FREQ_PRECISION_BITS = 16
FREQ_TOTAL = 1 << FREQ_PRECISION_BITS
DEFAULT_SUPPORT = 64
SCALE_BOUND = 0.11
SCALE_TABLE_MAX = 64.0
SCALE_TABLE_LEVELS = 64
LIKELIHOOD_BOUND = 1e-9

# Networks
MODEL_STRIDE = 16  # four stride-2 stages between frame and latent
LONG_TERM_OFFSET = 4  # x_hat[t - 4] is the long-term reference
RING_SIZE = 4

# Evaluation
PSNR_PEAK_8BIT = 255.0
YUV_PSNR_WEIGHTS = (6.0, 1.0, 1.0)
BD_RATE_VARIANT = "pchip"

# Training log columns
TRAIN_LOG_COLUMNS = ["stage", "step", "idx", "lambda", "distortion", "bpp_mv", "bpp_context", "total"]
RD_CSV_COLUMNS = ["label", "idx", "bpp", "psnr"]
